import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdwpcn.scenario import (ConfigError, DLBudget, SystemConfig, config_from_pairs, db_to_lin, dbm_to_w,
                             format_config, load_config, parse_kv_text, sample_realization, ul_estimated_channel,
                             w_to_dbm)


def test_defaults_are_valid():
    cfg = SystemConfig()
    assert cfg.K == 4 and cfg.M == 4
    assert cfg.betas.tolist() == [0.7] * 4
    assert cfg.p_dl_phase == cfg.p_dl_max


def test_split_budget_halves_phase_power():
    cfg = SystemConfig(dl_budget=DLBudget.SPLIT)
    assert cfg.p_dl_phase == pytest.approx(cfg.p_dl_max / 2)


@pytest.mark.parametrize("changes", [
    dict(K=0), dict(M=0), dict(sigma2_e=1.0), dict(sigma2_e=-0.1), dict(beta=0.0), dict(beta=1.5),
    dict(d_min=0.5), dict(d_min=20.0), dict(tol_rate=0.0), dict(p_dl_max=-1.0), dict(max_iters=0),
    dict(beta=(0.5, 0.5)),
])
def test_invalid_configs_rejected(changes):
    with pytest.raises(ConfigError):
        SystemConfig(**changes)


def test_unit_conversions():
    assert dbm_to_w(30.0) == pytest.approx(1.0)
    assert w_to_dbm(1e-3) == pytest.approx(0.0)
    assert db_to_lin(-80.0) == pytest.approx(1e-8)


def test_zero_error_variance_gives_zero_error():
    real = sample_realization(SystemConfig(sigma2_e=0.0), 3)
    assert not real.h_err.any()
    np.testing.assert_array_equal(real.h_true, real.h_hat)


def test_same_seed_is_bit_identical():
    cfg = SystemConfig()
    a, b = sample_realization(cfg, 11), sample_realization(cfg, 11)
    np.testing.assert_array_equal(a.h_hat, b.h_hat)
    np.testing.assert_array_equal(a.h_err, b.h_err)
    np.testing.assert_array_equal(a.distances, b.distances)


def test_true_channel_shared_across_error_variance():
    reals = [sample_realization(SystemConfig(sigma2_e=s), 5) for s in (0.0, 0.01, 0.1)]
    for r in reals[1:]:
        np.testing.assert_array_equal(r.h_true, reals[0].h_true)


@pytest.mark.parametrize("s2", [0.0, 0.1])
def test_estimate_variance_matches_path_loss(s2):
    # 10^5 scalar draws per case: 2 phases x 1 user x 12500 realizations x 4 antennas
    cfg = SystemConfig(K=1, M=4, sigma2_e=s2, c0_db=-10.0, eps_h=3.0)
    h_hat = np.concatenate([sample_realization(cfg, s, distances=1.0).h_hat.ravel() for s in range(12_500)])
    err = np.concatenate([sample_realization(cfg, s, distances=1.0).h_err.ravel() for s in range(2_500)])
    assert h_hat.size == 100_000
    assert np.mean(np.abs(h_hat) ** 2) == pytest.approx(0.1 * (1 - s2), rel=0.01)
    assert np.mean(np.abs(err) ** 2) == pytest.approx(0.1 * s2, rel=0.05, abs=1e-15)


def test_distances_inside_annulus():
    cfg = SystemConfig(K=200, d_min=2.0, r_t=10.0)
    d = sample_realization(cfg, 0).distances
    assert d.min() >= 2.0 and d.max() <= 10.0
    # area-uniform: median radius is sqrt of the mid-area point
    assert np.median(d) == pytest.approx(np.sqrt((100 + 4) / 2), rel=0.1)


def test_ul_estimate_is_conjugate():
    real = sample_realization(SystemConfig(), 1)
    np.testing.assert_array_equal(ul_estimated_channel(real, 2, 1), np.conj(real.h_hat[1, 2]))
    np.testing.assert_array_equal(real.g_hat, np.conj(real.h_hat))
    np.testing.assert_array_equal(np.conj(real.g_hat), real.h_hat)
    with pytest.raises(IndexError):
        ul_estimated_channel(real, 4, 0)
    with pytest.raises(IndexError):
        real.true_channel(0, 2)


def test_realization_arrays_read_only():
    real = sample_realization(SystemConfig(), 1)
    with pytest.raises(ValueError):
        real.h_hat[0, 0, 0] = 0


def test_kv_parsing_and_units(tmp_path):
    text = "K = 2  # users\np_dl_max_dbm = 0\nsigma2_rsi_db = -90\nduplex = hd\nbeta = 0.6,0.8\n"
    path = tmp_path / "cfg.txt"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.K == 2 and cfg.duplex.value == "HD"
    assert cfg.p_dl_max == pytest.approx(1e-3)
    assert cfg.sigma2_rsi == pytest.approx(1e-9)
    assert cfg.betas.tolist() == [0.6, 0.8]


@pytest.mark.parametrize("text", ["K", "K = 1\nK = 2", "bogus = 1", "K = two", " = 3", "duplex = xd",
                                  "p_dl_max = 1\np_dl_max_dbm = 0"])
def test_bad_config_text(text):
    with pytest.raises(ConfigError):
        config_from_pairs(parse_kv_text(text))


def test_format_config_round_trip():
    cfg = SystemConfig(K=3, beta=(0.5, 0.6, 0.7), duplex="HD", sigma2_e=0.1)
    pairs = dict(line.split(" = ", 1) for line in format_config(cfg).splitlines())
    assert config_from_pairs(pairs) == cfg


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6), m=st.integers(1, 6),
       s2=st.sampled_from([0.0, 0.01, 0.1, 0.5]))
def test_realization_shapes(seed, k, m, s2):
    real = sample_realization(SystemConfig(K=k, M=m, sigma2_e=s2), seed)
    assert real.h_hat.shape == real.h_err.shape == (2, k, m)
    np.testing.assert_allclose(real.h_true, real.h_hat + real.h_err, rtol=1e-12, atol=1e-300)
