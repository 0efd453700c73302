import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdwpcn.ehmodel import harvested_energy, harvested_power
from fdwpcn.scenario import EHModel, dbm_to_w, w_to_dbm

P_TH = dbm_to_w(7.0)


def test_zero_beam_harvests_nothing():
    r = harvested_energy(np.ones(3), np.zeros(3), 0.5, 0.5, 0.7, P_TH)
    assert r.q == 0.0 and r.q_hat == 0.0 and not r.saturated


def test_saturated_budget():
    r = harvested_energy([1.0], [10.0], 0.5, 0.5, 0.7, P_TH)
    assert r.saturated
    assert r.q_hat == pytest.approx(0.7 * 10 ** 0.7 * 1e-3, rel=1e-12)
    assert r.q_hat == pytest.approx(3.508e-3, abs=1e-6)
    assert w_to_dbm(r.q_hat) == pytest.approx(5.45, abs=0.01)


def test_linear_region_scalar():
    p = 1e-3
    r = harvested_energy([1.0], [np.sqrt(p)], 0.5, 0.5, 0.7, P_TH)
    assert r.q_hat == pytest.approx(0.7 * p)
    assert not r.saturated


def test_linear_model_never_saturates():
    r = harvested_energy([1.0], [10.0], 0.5, 0.5, 0.7, P_TH, EHModel.LINEAR)
    assert r.q_hat == pytest.approx(0.7 * 100.0)


def test_budget_scales_with_slot_ratio():
    r = harvested_energy([1.0], [0.01], 0.3, 0.7, 1.0, P_TH)
    assert r.q == pytest.approx(0.3 * 1e-4)
    assert r.q_hat == pytest.approx(0.3 / 0.7 * 1e-4)


@pytest.mark.parametrize("tau", [(0.0, 0.5), (0.5, 1.0), (1.2, 0.3)])
def test_rejects_bad_slots(tau):
    with pytest.raises(ValueError):
        harvested_energy([1.0], [1.0], *tau, 0.7, P_TH)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1.0), min_size=1, max_size=8))
def test_vectorised_matches_scalar(received):
    rec = np.array(received)
    betas = np.full(rec.size, 0.7)
    vec = harvested_power(rec, betas, P_TH)
    for x, y in zip(rec, vec):
        r = harvested_energy([1.0], [np.sqrt(x)], 0.5, 0.5, 0.7, P_TH)
        assert y == pytest.approx(r.q_hat, rel=1e-12, abs=1e-300)
    assert np.all(vec <= 0.7 * P_TH)
