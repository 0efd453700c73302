import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdwpcn.engine import ul_snr
from fdwpcn.wmmse import (dual_lambda, mmse_filter, mse, optimal_weight, phase_duals_and_powers, phase_filters,
                          phase_filters_and_sinr, phase_mse, phase_sinr, ul_power, wmmse_objective)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def instance(seed, n=2, m=4):
    rng = np.random.default_rng(seed)
    return crandn(rng, n, m), rng.random(n) + 0.1, 0.05 + rng.random()


def test_scalar_filter():
    np.testing.assert_allclose(mmse_filter([[1.0]], [1.0], 1.0, 0), [0.5])


def test_zero_power_zero_filter():
    g, p, c = instance(0)
    p[1] = 0.0
    assert not mmse_filter(g, p, c, 1).any()


def test_filter_rejects_zero_noise():
    with pytest.raises(ValueError):
        mmse_filter([[1.0]], [1.0], 0.0, 0)


@pytest.mark.parametrize("seed", range(3))
def test_filter_locally_minimises_mse(seed):
    g, p, c = instance(seed)
    rng = np.random.default_rng(100 + seed)
    for k in range(2):
        v = mmse_filter(g, p, c, k)
        e = mse(v, g, p, c, k)
        for _ in range(100):
            d = crandn(rng, 4)
            assert e <= mse(v + 0.01 * d, g, p, c, k)


def test_mse_hand_values():
    assert mse([0.0, 0.0], [[1.0, 2.0]], [1.0], 1.0, 0) == 1.0
    assert mse([0.5], [[1.0]], [1.0], 1.0, 0) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(5))
def test_rate_mse_identity(seed):
    g, p, c = instance(seed, n=3)
    for k in range(3):
        v = mmse_filter(g, p, c, k)
        e = mse(v, g, p, c, k)
        gamma = ul_snr(v, g, p, 0.0, 0.0, c, k)
        assert 1.0 + gamma == pytest.approx(1.0 / e, rel=1e-9)
        # textbook weight form at the MMSE filter
        assert optimal_weight(e) == pytest.approx(1.0 / abs(1.0 - np.sqrt(p[k]) * np.vdot(v, g[k])), rel=1e-9)


def test_weights():
    assert optimal_weight(1.0) == 1.0 and np.log2(optimal_weight(1.0)) == 0.0
    assert optimal_weight(0.5) == 2.0
    with pytest.raises(ValueError):
        optimal_weight(0.0)


def test_dual_zero_when_budget_slack():
    # lone user with a huge budget: the unconstrained power already fits
    g = np.array([[1.0 + 0j]])
    v = mmse_filter(g, [1.0], 1.0, 0)
    lam = dual_lambda([2.0], v[None], g, [1], [1e6, 0.0], 0)
    assert lam == 0.0


def test_dual_tight_budget_gives_budget_power():
    g = np.array([[1.0 + 0j]])
    v = mmse_filter(g, [1.0], 1.0, 0)
    theta, q = 2.0, 1e-3
    lam = dual_lambda([theta], v[None], g, [1], [q, 0.0], 0)
    assert lam > 0
    assert ul_power([theta], v[None], g, [1], lam, q, 0) == pytest.approx(q, rel=1e-12)


def test_dual_and_power_zero_outside_phase():
    g, p, c = instance(1)
    vs = np.stack([mmse_filter(g, p, c, k) for k in range(2)])
    assert dual_lambda([1.5, 1.5], vs, g, [0, 0], [1.0, 0.0], 0) == 0.0
    assert ul_power([1.5, 1.5], vs, g, [0, 1], 0.0, 1.0, 0) == 0.0
    assert ul_power([1.5, 1.5], vs, g, [1, 1], 0.0, 0.0, 0) == 0.0


def _objective_in_p(p, k, theta, vs, g, c, p_all):
    q = p_all.copy()
    q[k] = p
    return sum(theta[j] * mse(vs[j], g, q, c, j) for j in range(len(q)))


@pytest.mark.parametrize("seed", range(4))
def test_power_matches_grid_search(seed):
    g, p, c = instance(seed)
    theta = 1.0 + np.random.default_rng(seed).random(2)
    vs = np.stack([mmse_filter(g, p, c, k) for k in range(2)])
    for q_hat in (1e-3, 0.05, 10.0):
        lam = dual_lambda(theta, vs, g, [1, 1], [q_hat, 0.0], 0)
        p0 = ul_power(theta, vs, g, [1, 1], lam, q_hat, 0)
        grid = np.linspace(0.0, q_hat, 20001)
        vals = [_objective_in_p(x, 0, theta, vs, g, c, p) for x in grid]
        best = grid[int(np.argmin(vals))]
        assert p0 == pytest.approx(best, rel=1e-4, abs=q_hat * 1e-4)


def test_collinear_power_grows_with_weight():
    g = np.array([[1.0 + 0j, 0.5j]])
    v = mmse_filter(g, [1.0], 0.3, 0)[None]
    # with a priced budget the weight trades off against the dual
    powers = [ul_power([t], v, g, [1], 0.5, 1e9, 0) for t in (1.0, 2.0, 4.0)]
    assert powers[0] < powers[1] < powers[2]
    # a lone user with a free budget ignores the weight
    free = [ul_power([t], v, g, [1], 0.0, 1e9, 0) for t in (1.0, 4.0)]
    assert free[0] == pytest.approx(free[1])
    assert ul_power([4.0], v, g, [1], 0.5, 1e-3, 0) == 1e-3


def test_vectorised_phase_helpers_agree():
    g, p, c = instance(4, n=3)
    vs = np.stack([mmse_filter(g, p, c, k) for k in range(3)])
    np.testing.assert_allclose(phase_filters(g, p, c), vs, atol=1e-12)
    v2, sinr = phase_filters_and_sinr(g, p, c)
    np.testing.assert_allclose(v2, vs, atol=1e-12)
    ref = [ul_snr(vs[k], g, p, 0.0, 0.0, c, k) for k in range(3)]
    np.testing.assert_allclose(sinr, ref, rtol=1e-9)
    np.testing.assert_allclose(phase_sinr(vs, g, p, c), ref, rtol=1e-9)
    np.testing.assert_allclose(phase_mse(vs, g, p, c), [mse(vs[k], g, p, c, k) for k in range(3)], rtol=1e-12)
    theta, q = 1.0 + sinr, np.array([0.01, 1.0, 100.0])
    lam, pw = phase_duals_and_powers(vs, g, theta, q)
    a = [1, 1, 1]
    for k in range(3):
        qk = [q[k], 0.0]
        assert lam[k] == pytest.approx(dual_lambda(theta, vs, g, a, qk, k), rel=1e-9, abs=1e-15)
        assert pw[k] == pytest.approx(ul_power(theta, vs, g, a, lam[k], q[k], k), rel=1e-9)


def test_objective_value():
    assert wmmse_objective([2.0, 1.0], [0.5, 1.0]) == pytest.approx(2.0 - np.log(2.0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 4), m=st.integers(1, 5))
def test_identity_property(seed, n, m):
    g, p, c = instance(seed, n, m)
    v, sinr = phase_filters_and_sinr(g, p, c)
    np.testing.assert_allclose(1.0 + sinr, 1.0 / phase_mse(v, g, p, c), rtol=1e-9)
    lam, pw = phase_duals_and_powers(v, g, 1.0 + sinr, p)
    assert np.all(lam >= 0) and np.all(pw >= 0) and np.all(pw <= p * (1 + 1e-12))


@pytest.mark.parametrize("snr_db", [40.0, 70.0, 100.0])
def test_identity_at_high_sinr(snr_db):
    # near-perfect filters: e is a tiny difference of order-one terms
    rng = np.random.default_rng(7)
    g = crandn(rng, 3, 4)
    p = np.full(3, 10 ** (snr_db / 10))
    v, sinr = phase_filters_and_sinr(g, p, 1.0)
    e = phase_mse(v, g, p, 1.0)
    np.testing.assert_allclose((1.0 + sinr) * e, 1.0, rtol=1e-12)
    assert mse(v[0], g, p, 1.0, 0) == pytest.approx(e[0], rel=1e-12)
