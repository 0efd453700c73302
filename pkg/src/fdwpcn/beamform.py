"""Energy beamforming at the H-AP.

For fixed UL duals the Lagrangian is maximised by sending all DL power along
the dominant eigenvector of the dual-weighted channel covariance ``B``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

EIGH_MAX_DIM = 64


@dataclass(frozen=True, eq=False)
class BeamformerSolution:
    w: np.ndarray  # energy beam, ||w||^2 = p_dl
    lambda_dl: float  # largest eigenvalue of B (the DL dual)
    b_matrix: np.ndarray
    degenerate: bool = False
    direction: np.ndarray | None = None  # unit vector along w; derived when omitted

    def __post_init__(self):
        if self.direction is None:
            n = np.linalg.norm(self.w)
            object.__setattr__(self, "direction", self.w / n if n > 0 else self.w)


def build_b(tau_l, tau_lhat, duals, betas, h_hats) -> np.ndarray:
    """Weighted covariance ``(tau_l / tau_lhat) * sum_j lam_j beta_j h_j h_j^H``.

    ``h_hats`` holds the estimated DL channels of the users harvesting in this
    phase, one per row. An empty group gives the zero matrix.
    """
    h = np.asarray(h_hats, dtype=complex)
    if h.ndim == 1:
        h = h[None]
    duals = np.asarray(duals, dtype=float)
    if (duals < 0).any():
        raise ValueError("UL duals must be non-negative")
    weights = (tau_l / tau_lhat) * duals * betas
    b = (h.T * weights) @ h.conj()
    return 0.5 * (b + b.conj().T)


def _fix_phase(u: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(u)))
    if u[i] == 0:
        return u
    return u * (abs(u[i]) / u[i])


def power_iteration(b: np.ndarray, tol: float = 1e-13, max_iter: int = 10_000) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a Hermitian PSD matrix by power iteration."""
    m = b.shape[0]
    x = np.ones(m, dtype=complex) / np.sqrt(m)
    # shift keeps iteration away from a start orthogonal to the dominant space
    x = x + 1e-3 * np.arange(1, m + 1) / m
    x /= np.linalg.norm(x)
    ev = 0.0
    for _ in range(max_iter):
        y = b @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0, x
        x_new = y / ny
        ev_new = float(np.real(np.vdot(x_new, b @ x_new)))
        if abs(ev_new - ev) <= tol * abs(ev_new) and np.linalg.norm(b @ x_new - ev_new * x_new) <= 1e-9 * ev_new:
            return ev_new, x_new
        x, ev = x_new, ev_new
    return ev, x


def dominant_eigenvector(b: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and a unit eigenvector with a deterministic phase.

    When the top eigenvalue is repeated, the vector is the normalised
    projection of the first standard basis vector that is not orthogonal to
    the top eigenspace, so ``c * I`` yields ``e_1``.
    """
    m = b.shape[0]
    if m > EIGH_MAX_DIM:
        ev, u = power_iteration(b)
        return ev, _fix_phase(u / np.linalg.norm(u))
    top, u = kernels.top_eigvec(np.ascontiguousarray(b, dtype=complex))
    return float(top), u


def optimal_beamformer(b: np.ndarray, p_dl_max: float) -> BeamformerSolution:
    """Full-power beam along the dominant eigenvector of ``b``.

    ``b == 0`` has no preferred direction: the beam is ``sqrt(p) e_1`` with
    ``lambda_dl = 0`` and ``degenerate`` set.
    """
    b = np.asarray(b, dtype=complex)
    m = b.shape[0]
    if not b.any():
        e1 = np.zeros(m, dtype=complex)
        e1[0] = 1.0
        return BeamformerSolution(np.sqrt(p_dl_max) * e1, 0.0, b, degenerate=True, direction=e1)
    lam, u = dominant_eigenvector(b)
    return BeamformerSolution(np.sqrt(p_dl_max) * u, lam, b, direction=u)
