import numpy as np
import pytest

from fdwpcn import kernels
from fdwpcn.beamform import build_b, optimal_beamformer
from fdwpcn.rates import budgets, evaluate, group_rate
from fdwpcn.scenario import SystemConfig, sample_realization


def setup(seed=0):
    cfg = SystemConfig()
    real = sample_realization(cfg, seed)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    return cfg, real, dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def test_budgets_match_numpy():
    cfg, real, dirs = setup()
    hp = np.array([0, 1, 1, 0])
    tau = np.array([0.3, 0.7])
    received, harvest, q_hat = budgets(real, cfg, tau, dirs, hp)
    for k in range(4):
        l = hp[k]
        rec = cfg.p_dl_phase * abs(np.vdot(real.h_true[l, k], dirs[l])) ** 2
        assert received[k] == pytest.approx(rec, rel=1e-12)
        assert q_hat[k] == pytest.approx(tau[l] / tau[1 - l] * 0.7 * min(rec, cfg.p_th), rel=1e-12)


def test_group_rate_matches_evaluate():
    cfg, real, dirs = setup(1)
    hp = np.array([0, 1, 1, 0])
    ev = evaluate(real, cfg, (0.4, 0.6), dirs, hp, np.full(4, 1e-4))
    for l in (0, 1):
        members = np.flatnonzero(hp == l)
        q, p, rate = group_rate(real, cfg, (0.4, 0.6), dirs[l], l, members, np.full(members.size, 1e-4),
                                ev.c_noise[1 - l])
        np.testing.assert_allclose(q, ev.q_hat[members], rtol=1e-12)
        np.testing.assert_allclose(p, ev.p_ul[members], rtol=1e-12)
        assert rate == pytest.approx(ev.rate[members].sum(), rel=1e-12)


def test_beam_search_first_candidate_is_eigen_beam():
    cfg, real, dirs = setup(2)
    members = np.array([0, 2])
    target, prev = np.array([0.3, 0.7]), np.array([0.5, 0.5])
    scale = np.full(2, 0.7)
    out = kernels.beam_search(real.h_hat[0, members], real.h_true[0, members], real.g_hat[1, members], target, prev,
                              1.0, scale, np.full(2, np.inf), np.full(2, 0.7), cfg.p_dl_phase, cfg.p_th, True,
                              0.5, 0.5, cfg.sigma2_ul, -1.0, dirs[0], 5)
    tried, cand, lam, u, b = out[:5]
    assert tried == 0
    np.testing.assert_array_equal(cand, target)
    ref = optimal_beamformer(build_b(0.5, 0.5, target, np.full(2, 0.7), real.h_hat[0, members]), cfg.p_dl_phase)
    assert lam == pytest.approx(ref.lambda_dl, rel=1e-12)
    assert abs(np.vdot(u, ref.direction)) == pytest.approx(1.0, abs=1e-12)


def test_beam_search_gives_up_cleanly():
    cfg, real, dirs = setup(3)
    members = np.array([1])
    out = kernels.beam_search(real.h_hat[0, members], real.h_true[0, members], real.g_hat[1, members],
                              np.ones(1), np.ones(1), 1.0, np.ones(1), np.full(1, np.inf), np.ones(1),
                              cfg.p_dl_phase, cfg.p_th, True, 0.5, 0.5, cfg.sigma2_ul, np.inf, dirs[0], 3)
    assert out[0] == -1
    np.testing.assert_array_equal(out[3], dirs[0])
