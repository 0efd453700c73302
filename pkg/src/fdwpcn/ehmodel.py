"""Energy harvesting at the mobile users.

The block length is normalised to one second, so energy in a slot and the
average power over that slot differ only by the slot length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import EHModel


@dataclass(frozen=True)
class HarvestResult:
    q: float  # energy harvested during the EH slot, J
    q_hat: float  # UL power budget over the transmit slot, W
    received_power: float  # incident RF power before saturation, W
    saturated: bool


def harvested_energy(h_true, w, tau_l, tau_lhat, beta, p_th, model=EHModel.NONLINEAR) -> HarvestResult:
    """Energy collected from the DL beam ``w`` over a slot of length ``tau_l``.

    ``h_true`` must be the actual channel; harvesting needs no CSI. The budget
    ``q_hat`` spreads the energy over the user's UL slot ``tau_lhat``.
    """
    if not (0.0 < tau_l < 1.0 and 0.0 < tau_lhat < 1.0):
        raise ValueError(f"slot lengths must lie in (0, 1), got {tau_l}, {tau_lhat}")
    h = np.asarray(h_true, dtype=complex)
    w = np.asarray(w, dtype=complex)
    received = float(abs(np.vdot(h, w)) ** 2)
    saturated = model is EHModel.NONLINEAR and received >= p_th
    useful = min(received, p_th) if model is EHModel.NONLINEAR else received
    q = tau_l * beta * useful
    return HarvestResult(q=q, q_hat=q / tau_lhat, received_power=received, saturated=saturated)


def harvested_power(received, betas, p_th, model=EHModel.NONLINEAR) -> np.ndarray:
    """Vectorised ``beta * min(received, p_th)``: power converted while harvesting."""
    received = np.asarray(received, dtype=float)
    if model is EHModel.NONLINEAR:
        received = np.minimum(received, p_th)
    return betas * received
