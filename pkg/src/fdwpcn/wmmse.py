"""WMMSE block: MMSE receive filters, MSE weights, UL duals and powers.

Single-user functions take the channels of every UL user of one phase
(``g_hats`` with one row per user) and an index ``k``. The ``phase_*``
helpers do the same work for all users of a phase at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import kernels


@dataclass(frozen=True, eq=False)
class UlState:
    users: np.ndarray  # indices of the users transmitting in this phase
    v: np.ndarray  # receive filters, one row per UL user
    theta: np.ndarray
    p_ul: np.ndarray
    lambda_ul: np.ndarray
    c_noise: float


def _noise_check(c_noise):
    if not c_noise > 0:
        raise ValueError(f"receiver noise level must be positive, got {c_noise}")


def mmse_filter(g_hats, p_uls, c_noise, k) -> np.ndarray:
    """``(sum_j p_j g_j g_j^H + c I)^-1 sqrt(p_k) g_k``."""
    _noise_check(c_noise)
    g = np.atleast_2d(np.asarray(g_hats, dtype=complex))
    p = np.asarray(p_uls, dtype=float)
    cov = (g.T * p) @ g.conj() + c_noise * np.eye(g.shape[1])
    return sla.solve(cov, np.sqrt(p[k]) * g[k], assume_a="pos", check_finite=False)


def _own_error(v, g, p) -> np.ndarray:
    """``|1 - sqrt(p_k) v_k^H g_k|^2`` per row, formed in extended precision.

    Near-perfect filters make this a small difference of order-one numbers,
    so plain doubles would lose about ``eps / e`` of relative accuracy.
    """
    v, g = np.atleast_2d(v), np.atleast_2d(g)
    ld = np.longdouble
    vr, vi, gr, gi = (a.astype(ld) for a in (v.real, v.imag, g.real, g.imag))
    s = np.sqrt(np.asarray(p, dtype=ld))
    re = 1 - s * (vr * gr + vi * gi).sum(axis=1)
    im = s * (vr * gi - vi * gr).sum(axis=1)
    return (re * re + im * im).astype(float)


def mse(v, g_hats, p_uls, c_noise, k) -> float:
    g = np.atleast_2d(np.asarray(g_hats, dtype=complex))
    p = np.asarray(p_uls, dtype=float)
    v = np.asarray(v, dtype=complex)
    x = g.conj() @ v  # conj(v^H g_j)
    others = np.delete(p * np.abs(x) ** 2, k)
    own = _own_error(v, g[k], p[k])[0]
    return float(own + others.sum() + c_noise * np.vdot(v, v).real)


def optimal_weight(e: float) -> float:
    """MSE weight ``1 / e``; equals the textbook ``1 / (1 - sqrt(p) v^H g)`` at the MMSE filter."""
    if not e > 0:
        raise ValueError(f"MSE must be positive, got {e}")
    return 1.0 / e


def _weighted_terms(thetas, vs, g_hats, a, k):
    thetas = np.asarray(thetas, dtype=float) * np.asarray(a, dtype=float)
    vs = np.atleast_2d(np.asarray(vs, dtype=complex))
    g = np.atleast_2d(np.asarray(g_hats, dtype=complex))
    cross = vs.conj() @ g[k]  # v_j^H g_k for every j
    num = thetas[k] * cross[k].real
    den = float(np.sum(thetas * np.abs(cross) ** 2))
    return num, den


def dual_lambda(thetas, vs, g_hats, a, q_hats, k) -> float:
    """UL budget dual of user ``k``, clamped at zero.

    ``q_hats`` are the user's budgets (one per phase; the phase it does not
    transmit in contributes zero). Returns 0 for a user outside the phase or
    with no budget.
    """
    if not np.asarray(a)[k]:
        return 0.0
    root = float(np.sum(np.sqrt(np.asarray(q_hats, dtype=float))))
    if root <= 0.0:
        return 0.0
    num, den = _weighted_terms(thetas, vs, g_hats, a, k)
    return max(0.0, num / root - den)


def ul_power(thetas, vs, g_hats, a, lam, q_hat, k) -> float:
    """Minimiser of the WMMSE objective in ``p_k`` on ``[0, q_hat]``."""
    if not np.asarray(a)[k] or q_hat <= 0.0:
        return 0.0
    num, den = _weighted_terms(thetas, vs, g_hats, a, k)
    if num <= 0.0 or den + lam <= 0.0:
        return 0.0
    return min((num / (den + lam)) ** 2, float(q_hat))


def wmmse_objective(thetas, es) -> float:
    thetas = np.asarray(thetas, dtype=float)
    return float(np.sum(thetas * np.asarray(es) - np.log(thetas)))


# vectorised per-phase helpers -------------------------------------------------


_posv = sla.get_lapack_funcs("posv", dtype=complex)


def phase_filters(g, p, c_noise) -> np.ndarray:
    """MMSE filters of all UL users of one phase, one row per user (Cholesky solve)."""
    n, m = g.shape
    if n == 0:
        return np.zeros((0, m), dtype=complex)
    _noise_check(c_noise)
    cov = (g.T * p) @ g.conj()
    cov[np.diag_indices(m)] += c_noise
    _, x, info = _posv(cov, (g * np.sqrt(p)[:, None]).T, lower=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"MMSE covariance not positive definite (info={info})")
    return x.T


def phase_filters_and_sinr(g, p, c_noise) -> tuple[np.ndarray, np.ndarray]:
    """MMSE filters and the SINRs they achieve, from one Cholesky solve (compiled)."""
    _noise_check(c_noise)
    g = np.ascontiguousarray(g, dtype=complex)
    v = np.empty_like(g)
    sinr = np.empty(g.shape[0])
    kernels.ul_phase(g, np.asarray(p, dtype=float), float(c_noise), v, sinr)
    return v, sinr


def phase_cross(v, g) -> np.ndarray:
    """``x[k, j] = v_k^H g_j``."""
    return v.conj() @ g.T


def _abs2(z):
    return z.real ** 2 + z.imag ** 2


def phase_mse(v, g, p, c_noise, cross=None) -> np.ndarray:
    x = phase_cross(v, g) if cross is None else cross
    mag = _abs2(x) * p
    np.fill_diagonal(mag, 0.0)
    return _own_error(v, g, p) + mag.sum(axis=1) + c_noise * _abs2(v).sum(axis=1)


def phase_sinr(v, g, p, c_noise, cross=None) -> np.ndarray:
    x = phase_cross(v, g) if cross is None else cross
    mag = _abs2(x) * p
    signal = mag.diagonal().copy()
    np.fill_diagonal(mag, 0.0)
    den = mag.sum(axis=1) + c_noise * _abs2(v).sum(axis=1)
    return np.divide(signal, den, out=np.zeros(signal.shape), where=signal > 0)


def phase_duals_and_powers(v, g, theta, q_hat):
    """Clamped duals and projected powers for every UL user of a phase."""
    x = phase_cross(v, g)
    num = theta * np.diagonal(x).real
    den = np.sum(theta[:, None] * np.abs(x) ** 2, axis=0)  # sum_j theta_j |v_j^H g_k|^2
    root = np.sqrt(q_hat)
    lam = np.zeros_like(num)
    has = root > 0
    lam[has] = np.maximum(0.0, num[has] / root[has] - den[has])
    p = np.zeros_like(num)
    ok = (num > 0) & (den + lam > 0) & has
    p[ok] = np.minimum((num[ok] / (den[ok] + lam[ok])) ** 2, q_hat[ok])
    return lam, p
