"""Compiled inner loops for UL rate evaluation.

The solvers score thousands of tiny (M x M) problems per run, where numpy's
per-call overhead dominates. These loops do the same arithmetic as the
numpy helpers in ``wmmse`` and ``rates``; the tests check they agree.
"""
from __future__ import annotations

import numba
import numpy as np

@numba.njit(cache=True)
def chol_solve(a, b):
    """Solve ``a x = b`` for Hermitian positive definite ``a`` via Cholesky."""
    m, n = b.shape
    low = np.linalg.cholesky(a)
    y = np.empty((m, n), dtype=np.complex128)
    for col in range(n):
        for i in range(m):
            s = b[i, col]
            for j in range(i):
                s -= low[i, j] * y[j, col]
            y[i, col] = s / low[i, i]
    x = np.empty((m, n), dtype=np.complex128)
    for col in range(n):
        for i in range(m - 1, -1, -1):
            s = y[i, col]
            for j in range(i + 1, m):
                s -= np.conj(low[j, i]) * x[j, col]
            x[i, col] = s / np.conj(low[i, i])
    return x


@numba.njit(cache=True)
def ul_phase(g, p, c_noise, v_out, sinr_out):
    """MMSE filters (rows of ``v_out``) and SINRs of the UL users of one phase."""
    n, m = g.shape
    if n == 0:
        return
    cov = np.zeros((m, m), dtype=np.complex128)
    rhs = np.empty((m, n), dtype=np.complex128)
    for k in range(n):
        root = np.sqrt(p[k])
        for i in range(m):
            rhs[i, k] = root * g[k, i]
            gi = p[k] * g[k, i]
            for j in range(m):
                cov[i, j] += gi * np.conj(g[k, j])
    for i in range(m):
        cov[i, i] += c_noise
    x = chol_solve(cov, rhs)
    for k in range(n):
        for i in range(m):
            v_out[k, i] = x[i, k]
        # SINR of the computed filter itself, so it stays consistent with
        # the MSE of that filter even when the solve has lost digits
        signal = 0.0
        interference = 0.0
        norm2 = 0.0
        for j in range(n):
            z = 0.0j
            for i in range(m):
                z += np.conj(x[i, k]) * g[j, i]
            mag = p[j] * (z.real * z.real + z.imag * z.imag)
            if j == k:
                signal = mag
            else:
                interference += mag
        for i in range(m):
            norm2 += x[i, k].real ** 2 + x[i, k].imag ** 2
        sinr_out[k] = signal / (interference + c_noise * norm2) if signal > 0.0 else 0.0


@numba.njit(cache=True)
def harvest_budgets(h_true, directions, hp, betas, p_phase, p_th, nonlinear, tau):
    """Incident power, harvested power and UL budget of each user in its harvest phase."""
    K = hp.shape[0]
    m = directions.shape[1]
    received = np.empty(K)
    harvest = np.empty(K)
    q_hat = np.empty(K)
    for k in range(K):
        l = hp[k]
        z = 0.0j
        for i in range(m):
            z += np.conj(h_true[l, k, i]) * directions[l, i]
        rec = p_phase * (z.real * z.real + z.imag * z.imag)
        received[k] = rec
        harvest[k] = betas[k] * (min(rec, p_th) if nonlinear else rec)
        q_hat[k] = tau[l] / tau[1 - l] * harvest[k]
    return received, harvest, q_hat


@numba.njit(cache=True)
def ul_rates(g_hat, hp, p, c_noise, tau):
    """Filters (one row per user), SINRs and rates with every user in its UL phase."""
    K, m = g_hat.shape[1], g_hat.shape[2]
    filters = np.zeros((K, m), dtype=np.complex128)
    sinr = np.zeros(K)
    rate = np.zeros(K)
    for l in range(2):
        n = 0
        for k in range(K):
            if hp[k] != l:
                n += 1
        if n == 0:
            continue
        idx = np.empty(n, dtype=np.int64)
        g = np.empty((n, m), dtype=np.complex128)
        pl = np.empty(n)
        j = 0
        for k in range(K):
            if hp[k] != l:
                idx[j] = k
                g[j] = g_hat[l, k]
                pl[j] = p[k]
                j += 1
        v = np.empty((n, m), dtype=np.complex128)
        s = np.empty(n)
        ul_phase(g, pl, c_noise[l], v, s)
        for j in range(n):
            k = idx[j]
            filters[k] = v[j]
            sinr[k] = s[j]
            rate[k] = tau[l] * np.log2(1.0 + s[j])
    return filters, sinr, rate


@numba.njit(cache=True)
def grouping_rate(h_true, g_hat, directions, hp, betas, p_phase, p_th, nonlinear, tau, p_in, sigma2_ul, rsi):
    """Summed UL rate of a grouping; same arithmetic as ``harvest_budgets`` then ``ul_rates``."""
    K = hp.shape[0]
    _, _, q_hat = harvest_budgets(h_true, directions, hp, betas, p_phase, p_th, nonlinear, tau)
    p = np.empty(K)
    n1 = 0
    for k in range(K):
        p[k] = min(p_in[k], q_hat[k])
        n1 += hp[k]
    c_noise = np.empty(2)
    c_noise[0] = sigma2_ul + (rsi if n1 < K else 0.0)
    c_noise[1] = sigma2_ul + (rsi if n1 > 0 else 0.0)
    _, _, rate = ul_rates(g_hat, hp, p, c_noise, tau)
    return rate.sum()


@numba.njit(cache=True)
def group_rate(h_true_l, g_hat_ul, direction, p_in, betas, p_phase, p_th, nonlinear, tau_l, tau_ul, c_noise):
    """Budgets, clipped powers and summed UL rate of one harvest group under one beam."""
    n, m = h_true_l.shape
    q_hat = np.empty(n)
    p = np.empty(n)
    for k in range(n):
        z = 0.0j
        for i in range(m):
            z += np.conj(h_true_l[k, i]) * direction[i]
        rec = p_phase * (z.real * z.real + z.imag * z.imag)
        q_hat[k] = tau_l / tau_ul * betas[k] * (min(rec, p_th) if nonlinear else rec)
        p[k] = min(p_in[k], q_hat[k])
    v = np.empty((n, m), dtype=np.complex128)
    s = np.empty(n)
    ul_phase(g_hat_ul, p, c_noise, v, s)
    total = 0.0
    for k in range(n):
        total += tau_ul * np.log2(1.0 + s[k])
    return q_hat, p, total


@numba.njit(cache=True)
def top_eigvec(b):
    """Largest eigenvalue of Hermitian ``b`` and a unit eigenvector.

    A repeated top eigenvalue yields the normalised projection of the first
    standard basis vector not orthogonal to the top eigenspace. The phase is
    fixed so the largest-magnitude entry is real and non-negative.
    """
    m = b.shape[0]
    vals, vecs = np.linalg.eigh(b)
    top = vals[m - 1]
    floor = top - 1e-10 * max(abs(vals[0]), abs(top))
    if m == 1 or vals[m - 2] < floor:
        u = vecs[:, m - 1].copy()
    else:
        first = 0
        while vals[first] < floor:
            first += 1
        basis = np.ascontiguousarray(vecs[:, first:])
        u = np.zeros(m, dtype=np.complex128)
        for i in range(m):
            u = basis @ np.conj(basis[i])
            if np.linalg.norm(u) > 1e-8:
                break
        u = u / np.linalg.norm(u)
    best = 0
    for i in range(1, m):
        if abs(u[i]) > abs(u[best]):
            best = i
    if u[best] != 0:
        u = u * (abs(u[best]) / u[best])
    return top, u


@numba.njit(cache=True)
def weighted_cov(h, weights):
    """``sum_j weights[j] h_j h_j^H`` over the rows of ``h``, exactly Hermitian."""
    n, m = h.shape
    b = np.zeros((m, m), dtype=np.complex128)
    for k in range(n):
        wk = weights[k]
        for i in range(m):
            hi = wk * h[k, i]
            b[i, i] += (hi * np.conj(h[k, i])).real
            for j in range(i + 1, m):
                b[i, j] += hi * np.conj(h[k, j])
    for i in range(m):
        for j in range(i + 1, m):
            b[j, i] = np.conj(b[i, j])
    return b


@numba.njit(cache=True)
def beam_search(h_hat_l, h_true_l, g_hat_ul, target, prev, eta, scale, p_in, betas, p_phase, p_th, nonlinear,
                tau_l, tau_ul, c_noise, current, prev_dir, tries):
    """Backtracking over dual weights ``eta * target + (1 - eta) * prev`` for one phase.

    ``eta`` halves after every candidate whose eigen-beam loses group rate
    against ``current``. Returns the number of rejected candidates (``-1`` if
    all were), the accepted weights, top eigenvalue, direction, covariance,
    degenerate flag, budgets and clipped powers.
    """
    n, m = h_hat_l.shape
    for t in range(tries):
        cand = eta * target + (1.0 - eta) * prev
        b = weighted_cov(h_hat_l, scale * cand)
        nonzero = False
        for i in range(m):
            for j in range(m):
                if b[i, j] != 0:
                    nonzero = True
        if nonzero:
            lam, u = top_eigvec(b)
        else:
            lam, u = 0.0, prev_dir.copy()
        q_hat, p, rate = group_rate(h_true_l, g_hat_ul, u, p_in, betas, p_phase, p_th, nonlinear, tau_l, tau_ul,
                                    c_noise)
        if rate >= current:
            return t, cand, lam, u, b, not nonzero, q_hat, p
        eta *= 0.5
    empty = np.zeros(n)
    return -1, empty, 0.0, prev_dir.copy(), np.zeros((m, m), dtype=np.complex128), True, empty, empty
