import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdwpcn import kernels
from fdwpcn.beamform import build_b, dominant_eigenvector, optimal_beamformer, power_iteration


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_single_user_b_is_outer_product():
    h = crandn(np.random.default_rng(0), 4)
    np.testing.assert_allclose(build_b(0.5, 0.5, [1.0], [1.0], h[None]), np.outer(h, h.conj()), atol=1e-15)


def test_zero_duals_give_zero_b():
    h = crandn(np.random.default_rng(1), 3, 4)
    assert not build_b(0.4, 0.6, np.zeros(3), np.full(3, 0.7), h).any()


def test_b_matches_brute_force():
    rng = np.random.default_rng(2)
    h = crandn(rng, 2, 4)
    lam, beta = rng.random(2), np.array([0.7, 0.9])
    b = build_b(0.3, 0.7, lam, beta, h)
    ref = np.zeros((4, 4), dtype=complex)
    for j in range(2):
        for r in range(4):
            for c in range(4):
                ref[r, c] += 0.3 / 0.7 * lam[j] * beta[j] * h[j, r] * np.conj(h[j, c])
    np.testing.assert_allclose(b, ref, atol=1e-14)
    np.testing.assert_allclose(kernels.weighted_cov(h, 0.3 / 0.7 * lam * beta), ref, atol=1e-14)


def test_negative_dual_rejected():
    with pytest.raises(ValueError):
        build_b(0.5, 0.5, [-1.0], [1.0], np.ones((1, 2)))


def test_rank_one_gives_matched_beam():
    h = crandn(np.random.default_rng(3), 4)
    sol = optimal_beamformer(np.outer(h, h.conj()), 2.0)
    assert np.linalg.norm(sol.w) ** 2 == pytest.approx(2.0)
    assert abs(np.vdot(h / np.linalg.norm(h), sol.direction)) == pytest.approx(1.0)
    assert sol.lambda_dl == pytest.approx(np.linalg.norm(h) ** 2)


def test_scaled_identity_tie_breaks_to_e1():
    sol = optimal_beamformer(3.0 * np.eye(4), 0.5)
    np.testing.assert_allclose(sol.w, np.sqrt(0.5) * np.eye(4)[0], atol=1e-12)


def test_zero_b_is_degenerate():
    sol = optimal_beamformer(np.zeros((3, 3)), 1.0)
    assert sol.degenerate and sol.lambda_dl == 0.0
    np.testing.assert_array_equal(sol.w, [1.0, 0.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_rayleigh_quotient_maximal(seed):
    rng = np.random.default_rng(seed)
    a = crandn(rng, 4, 4)
    b = a @ a.conj().T
    lam, u = dominant_eigenvector(b)
    x = crandn(rng, 1000, 4)
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    quotients = np.einsum("ni,ij,nj->n", x.conj(), b, x).real
    top = np.vdot(u, b @ u).real
    assert top == pytest.approx(lam, rel=1e-12)
    assert np.all(quotients <= top * (1 + 1e-12))


def test_power_iteration_agrees_with_eigh():
    rng = np.random.default_rng(7)
    a = crandn(rng, 6, 3)
    b = a @ a.conj().T
    ev, u = power_iteration(b)
    lam, v = dominant_eigenvector(b)
    assert ev == pytest.approx(lam, rel=1e-9)
    assert abs(np.vdot(u, v)) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 6), n=st.integers(1, 4))
def test_eigenvector_phase_and_norm(seed, m, n):
    rng = np.random.default_rng(seed)
    h = crandn(rng, n, m)
    lam, u = dominant_eigenvector(build_b(0.5, 0.5, rng.random(n) + 0.1, np.full(n, 0.7), h))
    assert np.linalg.norm(u) == pytest.approx(1.0)
    big = u[np.argmax(np.abs(u))]
    assert abs(big.imag) < 1e-12 and big.real > 0
    assert lam >= 0
