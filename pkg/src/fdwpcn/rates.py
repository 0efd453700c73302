"""Evaluate UL rates of a complete network state.

Shared by the group assignment (which scores candidate groupings) and the
engine. A phase radiates its DL energy beam only if at least one user
harvests in it; an idle phase adds no residual self-interference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .scenario import ChannelRealization, Duplex, EHModel, SystemConfig


@dataclass(frozen=True, eq=False)
class Evaluation:
    received: np.ndarray  # incident DL power at each user in its EH slot, W
    harvest: np.ndarray  # beta * min(received, p_th), W
    q_hat: np.ndarray  # UL power budgets, W
    p_ul: np.ndarray  # UL powers after projection onto the budgets
    dl_active: tuple[bool, bool]
    c_noise: tuple[float, float]
    users: tuple[np.ndarray, np.ndarray]  # UL users per phase
    filters: tuple[np.ndarray, np.ndarray]  # MMSE filters per phase, rows follow ``users``
    sinr: np.ndarray
    rate: np.ndarray  # bits per unit block

    @property
    def sum_rate(self) -> float:
        return float(self.rate.sum())


def dl_active(harvest_phase) -> tuple[bool, bool]:
    n1 = int(np.count_nonzero(harvest_phase))
    return n1 < len(harvest_phase), n1 > 0


def noise_levels(cfg: SystemConfig, active) -> tuple[float, float]:
    """Effective UL noise ``c`` per phase: receiver noise plus RSI from the DL beam."""
    rsi = cfg.sigma2_rsi * cfg.p_dl_phase if cfg.duplex is Duplex.FD else 0.0
    return tuple(cfg.sigma2_ul + (rsi if on else 0.0) for on in active)


def _nonlinear(cfg: SystemConfig) -> bool:
    return cfg.eh_model is EHModel.NONLINEAR


def budgets(real: ChannelRealization, cfg: SystemConfig, tau, directions, harvest_phase):
    """Incident power, harvested power and UL budget of every user in its harvest phase."""
    return kernels.harvest_budgets(real.h_true, np.asarray(directions, dtype=complex),
                                   np.asarray(harvest_phase, dtype=np.int64), cfg.betas, cfg.p_dl_phase,
                                   cfg.p_th, _nonlinear(cfg), np.asarray(tau, dtype=float))


def group_rate(real: ChannelRealization, cfg: SystemConfig, tau, direction, l, members, p_ul, c_noise):
    """Budgets and UL rate of the users harvesting in phase ``l`` under beam ``direction``.

    These users transmit in the other phase, so their rate depends on this
    phase's beam alone. ``p_ul`` (one entry per member) is clipped to the
    budgets. Returns (budgets, clipped powers, summed rate).
    """
    return kernels.group_rate(real.h_true[l, members], real.g_hat[1 - l, members], direction,
                              np.asarray(p_ul, dtype=float), cfg.betas[members], cfg.p_dl_phase, cfg.p_th,
                              _nonlinear(cfg), float(tau[l]), float(tau[1 - l]), float(c_noise))


def grouping_rate(real: ChannelRealization, cfg: SystemConfig, tau, directions, harvest_phase, p_ul) -> float:
    """``evaluate(...).sum_rate`` without building the full evaluation."""
    rsi = cfg.sigma2_rsi * cfg.p_dl_phase if cfg.duplex is Duplex.FD else 0.0
    return float(kernels.grouping_rate(real.h_true, real.g_hat, np.asarray(directions, dtype=complex),
                                       np.asarray(harvest_phase, dtype=np.int64), cfg.betas, cfg.p_dl_phase,
                                       cfg.p_th, _nonlinear(cfg), np.asarray(tau, dtype=float),
                                       np.asarray(p_ul, dtype=float), cfg.sigma2_ul, rsi))


def evaluate(real: ChannelRealization, cfg: SystemConfig, tau, directions, harvest_phase, p_ul) -> Evaluation:
    """Rates with MMSE receivers for given beams, grouping and UL powers.

    UL powers are clipped to the budgets implied by ``harvest_phase``.
    """
    hp = np.asarray(harvest_phase, dtype=np.int64)
    tau = np.asarray(tau, dtype=float)
    received, harvest, q_hat = budgets(real, cfg, tau, directions, hp)
    p = np.minimum(np.asarray(p_ul, dtype=float), q_hat)
    active = dl_active(hp)
    c = noise_levels(cfg, active)
    filters, sinr, rate = kernels.ul_rates(real.g_hat, hp, p, np.asarray(c), tau)
    users = (np.flatnonzero(hp != 0), np.flatnonzero(hp != 1))
    return Evaluation(received, harvest, q_hat, p, active, c, users, (filters[users[0]], filters[users[1]]),
                      sinr, rate)
