"""Rate evaluation and the two solvers.

``algorithm1`` alternates energy beamforming, the WMMSE block and group
assignment at a fixed slot split. ``algorithm2`` wraps it in a golden-section
search over the split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assign import AssignContext, Assignment, coordinate_sweep
from .beamform import BeamformerSolution, optimal_beamformer
from .rates import Evaluation, _nonlinear, budgets, evaluate, grouping_rate
from .scenario import ChannelRealization, Duplex, EHModel, SystemConfig
from .timesearch import TauSearchTrace, golden_search
from .wmmse import UlState, phase_duals_and_powers, phase_filters_and_sinr, phase_mse, phase_sinr, wmmse_objective

BEAM_BACKTRACKS = 4
SUPPORT_SWEEP = True
TAU_SCAN_POINTS = 40


@dataclass(frozen=True, eq=False)
class Allocation:
    assignment: Assignment
    tau: tuple[float, float]
    beams: tuple[BeamformerSolution, BeamformerSolution]
    dl_active: tuple[bool, bool]
    ul_state: tuple[UlState, UlState]
    mode: Duplex

    @property
    def p_ul(self) -> np.ndarray:
        K = self.assignment.harvest_phase.size
        p = np.zeros(K)
        for st in self.ul_state:
            p[st.users] = st.p_ul
        return p

    @property
    def lambda_ul(self) -> np.ndarray:
        lam = np.zeros(self.assignment.harvest_phase.size)
        for st in self.ul_state:
            lam[st.users] = st.lambda_ul
        return lam

    @property
    def directions(self) -> np.ndarray:
        return np.stack([b.direction for b in self.beams])

    def transmitted_beam(self, phase: int) -> np.ndarray:
        """Beam actually radiated in ``phase`` (zero when nobody harvests)."""
        w = self.beams[phase].w
        return w if self.dl_active[phase] else np.zeros_like(w)


@dataclass(frozen=True)
class IterationRecord:
    sum_rate: float
    gamma_u: float  # WMMSE objective after the filter, weight and power updates
    gamma_u_entry: float  # same objective entering those updates


@dataclass
class SolveReport:
    sum_rate: float
    per_user_rate: np.ndarray
    per_user_harvest: np.ndarray  # beta * min(received, p_th) while harvesting, W
    snr: np.ndarray
    trace: list[IterationRecord] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    tau: tuple[float, float] = (0.5, 0.5)


@dataclass(frozen=True)
class RateSummary:
    sum_rate: float
    per_user_rate: np.ndarray
    per_user_harvest: np.ndarray
    snr: np.ndarray


def ul_snr(v, g_hats, p_uls, w_norm2, sigma2_rsi, sigma2_ul, k, mode=Duplex.FD) -> float:
    """UL SINR of user ``k`` behind receive filter ``v``.

    ``w_norm2`` is the DL power radiated in the same phase; it only enters
    through residual self-interference in full-duplex mode.
    """
    v = np.asarray(v, dtype=complex)
    g = np.atleast_2d(np.asarray(g_hats, dtype=complex))
    p = np.asarray(p_uls, dtype=float)
    x = np.abs(g.conj() @ v) ** 2  # |v^H g_j|^2
    vv = float(np.vdot(v, v).real)
    rsi = sigma2_rsi * vv * w_norm2 if Duplex(mode) is Duplex.FD else 0.0
    signal = p[k] * x[k]
    den = float(np.sum(p * x) - signal) + rsi + sigma2_ul * vv
    if signal == 0.0:
        return 0.0
    return float(signal / den)


def sum_rate(alloc: Allocation, real: ChannelRealization, cfg: SystemConfig) -> RateSummary:
    """Rates of an allocation using its stored receive filters and powers."""
    K = real.K
    snr = np.zeros(K)
    for l, st in enumerate(alloc.ul_state):
        if st.users.size:
            g = real.g_hat[l, st.users]
            snr[st.users] = phase_sinr(st.v, g, st.p_ul, st.c_noise)
    ul_phase = 1 - alloc.assignment.harvest_phase
    rate = np.asarray(alloc.tau)[ul_phase] * np.log2(1.0 + snr)
    _, harvest, _ = budgets(real, cfg, alloc.tau, alloc.directions, alloc.assignment.harvest_phase)
    return RateSummary(float(rate.sum()), rate, harvest, snr)


def _phase_beam(real, cfg, tau, lam, hp, prev_dir, l) -> BeamformerSolution:
    """Eigen-beam of phase ``l`` for dual weights ``lam``.

    A phase nobody harvests in, or whose weighted covariance vanishes, keeps
    the previous direction and is flagged degenerate.
    """
    members = np.flatnonzero(hp == l)
    if members.size:
        weights = (tau[l] / tau[1 - l]) * lam[members] * cfg.betas[members]
        b = kernels.weighted_cov(real.h_hat[l, members], weights)
        if b.any():
            return optimal_beamformer(b, cfg.p_dl_phase)
    m = real.M
    return BeamformerSolution(math.sqrt(cfg.p_dl_phase) * prev_dir, 0.0, np.zeros((m, m), dtype=complex),
                              degenerate=True, direction=prev_dir)


def _beams(real, cfg, tau, lam, hp, prev_dirs):
    out = tuple(_phase_beam(real, cfg, tau, lam, hp, prev_dirs[l], l) for l in (0, 1))
    return out, np.stack([sol.direction for sol in out])


def _unit_sum(x):
    t = float(np.sum(x))
    return x / t if t > 0 else x


@dataclass
class _StepMemory:
    """Per-phase relaxation of the dual weights that feed the beams."""
    eta: list = field(default_factory=lambda: [1.0, 1.0])
    last: list = field(default_factory=lambda: [None, None])  # (members, accepted step)


def _harvest_weights(real, cfg, lam, hp, dirs) -> np.ndarray:
    """Dual weights for the beam, zeroed for users already past saturation.

    Past ``p_th`` more incident power buys a user no budget, so under the
    nonlinear model its pull on the beam is the subgradient zero. Saturation
    is judged from the estimated channel, the only one the H-AP knows.
    """
    if not _nonlinear(cfg):
        return lam
    gain = np.abs(np.einsum("ki,ki->k", real.h_hat[hp, np.arange(hp.size)].conj(), dirs[hp])) ** 2
    return np.where(cfg.p_dl_phase * gain < cfg.p_th, lam, 0.0)


def _beam_step(real, cfg, tau, hp, lam, weights, beams, dirs, p, ev: Evaluation, memory: _StepMemory):
    """Move each beam toward the eigen-beam of the latest duals without losing rate.

    A phase's beam only sets the budgets of the users transmitting in the
    other phase, so each phase gets its own backtracking: the relaxed step
    first, then the dual weights pulled halfway back to the previous ones,
    up to ``BEAM_BACKTRACKS`` times. The relaxation halves whenever two
    accepted steps point in opposite directions, which damps the
    period-two swing between users competing for the same beam, and doubles
    (up to one) while they agree. A user
    whose budget was binding keeps transmitting at its moved budget.
    Returns beams, directions, weights, budgets and projected UL powers.
    """
    beams, weights = list(beams), weights.copy()
    pull = _harvest_weights(real, cfg, lam, hp, dirs)
    dirs = dirs.copy()
    q_hat, p = ev.q_hat.copy(), np.minimum(p, ev.q_hat)
    for l in (0, 1):
        members = np.flatnonzero(hp == l)
        if not members.size:
            continue
        c_noise = ev.c_noise[1 - l]
        current = float(ev.rate[members].sum())
        binding = lam[members] > 0
        target, prev = _unit_sum(pull[members]), _unit_sum(weights[members])
        scale = (tau[l] / tau[1 - l]) * cfg.betas[members]
        # binding users keep transmitting at their moved budget
        p_in = np.where(binding, np.inf, p[members])
        tried, cand, lam_dl, u, b, degenerate, c_q, c_p = kernels.beam_search(
            real.h_hat[l, members], real.h_true[l, members], real.g_hat[1 - l, members], target, prev,
            memory.eta[l], scale, p_in, cfg.betas[members], cfg.p_dl_phase, cfg.p_th, _nonlinear(cfg),
            float(tau[l]), float(tau[1 - l]), float(c_noise), current, dirs[l], BEAM_BACKTRACKS + 1)
        if tried < 0:
            continue
        step = cand - prev
        last = memory.last[l]
        if last is not None and np.array_equal(last[0], members):
            turn = float(step @ last[1])
            if turn < 0:
                memory.eta[l] *= 0.5
            elif turn > 0:
                memory.eta[l] = min(1.0, 2.0 * memory.eta[l])
        memory.last[l] = (members, step)
        weights[members] = cand
        beams[l] = BeamformerSolution(math.sqrt(cfg.p_dl_phase) * u, float(lam_dl), b, bool(degenerate), u)
        dirs[l] = u
        q_hat[members], p[members] = c_q, c_p
    return tuple(beams), dirs, weights, q_hat, p


def _beams_settled(real, cfg, tau, lam, hp, dirs, tol=1e-9) -> bool:
    """True if the next beam update would leave every active direction in place.

    The first iteration still beams with the initial duals, so its rate change
    says nothing about the WMMSE duals until this holds.
    """
    _, new = _beams(real, cfg, tau, _harvest_weights(real, cfg, lam, hp, dirs), hp, dirs)
    overlap = np.abs(np.sum(new.conj() * dirs, axis=1)) ** 2
    return bool(np.all(overlap >= 1.0 - tol))


def _support_sweep(real, cfg, tau, dirs, hp, ev: Evaluation) -> Evaluation:
    """Switch single users off (zero power) or to full budget when that pays.

    Zero UL power is a fixed point of the WMMSE power update, so the block
    updates alone can neither silence a user whose interference costs more
    than its rate nor revive one. A move must gain more than ``tol_rate``.
    """
    p = ev.p_ul.copy()
    best = ev.sum_rate
    changed = False
    for k in range(p.size):
        keep = p[k]
        for cand in (0.0, ev.q_hat[k]):
            if cand == keep:
                continue
            p[k] = cand
            value = grouping_rate(real, cfg, tau, dirs, hp, p)
            if value > best + cfg.tol_rate:
                best, keep, changed = value, cand, True
        p[k] = keep
    return evaluate(real, cfg, tau, dirs, hp, p) if changed else ev


def _thetas(ev: Evaluation):
    """MSE weights ``1 / e = 1 + SINR`` at the evaluation's MMSE filters."""
    return [1.0 + ev.sinr[ev.users[l]] for l in (0, 1)]


def _allocation(cfg, tau, hp, beams, ev: Evaluation, thetas, lam) -> Allocation:
    states = []
    for l in (0, 1):
        idx = ev.users[l]
        states.append(UlState(users=idx, v=ev.filters[l], theta=thetas[l], p_ul=ev.p_ul[idx],
                              lambda_ul=lam[idx], c_noise=ev.c_noise[l]))
    return Allocation(Assignment(hp), tuple(tau), beams, ev.dl_active, tuple(states), cfg.duplex)


def _check_tau(tau1):
    if not 0.0 < tau1 < 1.0:
        raise ValueError(f"tau1 must lie in (0, 1), got {tau1}")
    return (float(tau1), 1.0 - float(tau1))


def algorithm1(cfg: SystemConfig, real: ChannelRealization, tau1: float,
               assignment: Assignment | None = None,
               update_assignment: bool | None = None) -> tuple[Allocation, SolveReport]:
    """Alternating optimisation at a fixed slot split.

    Every iteration updates, in order: DL beams, MMSE filters, weights, UL
    duals, UL powers, then the grouping; the loop stops once the sum-rate
    changes by at most ``cfg.tol_rate``. Half-duplex mode pins the grouping
    (everybody harvests first, transmits second). Starts from unit duals,
    the parity grouping and full-budget UL powers.
    """
    tau = _check_tau(tau1)
    K, M = real.K, real.M
    if cfg.duplex is Duplex.HD:
        hp = Assignment.half_duplex(K).harvest_phase.copy()
        update_assignment = False
    else:
        hp = (assignment or Assignment.parity(K)).harvest_phase.copy()
        update_assignment = True if update_assignment is None else update_assignment

    lam = np.ones(K)
    weights = lam.copy()  # duals the current beams were built from
    dirs = np.zeros((2, M), dtype=complex)
    dirs[:, 0] = 1.0
    beams, dirs = _beams(real, cfg, tau, weights, hp, dirs)
    ev = evaluate(real, cfg, tau, dirs, hp, np.full(K, np.inf))
    p = ev.p_ul
    thetas = _thetas(ev)
    rate_prev = ev.sum_rate

    trace: list[IterationRecord] = []
    best = (rate_prev, hp.copy(), beams, ev, thetas, lam.copy())
    last = best
    converged = False
    memory = _StepMemory()
    for it in range(cfg.max_iters):
        beams, dirs, weights, q_hat, p = _beam_step(real, cfg, tau, hp, lam, weights, beams, dirs, p, ev, memory)

        gamma_entry = gamma_exit = 0.0
        for l in (0, 1):
            idx = ev.users[l]
            if not idx.size:
                continue
            g = real.g_hat[l, idx]
            c = ev.c_noise[l]
            gamma_entry += wmmse_objective(thetas[l], phase_mse(ev.filters[l], g, p[idx], c))
            v, sinr = phase_filters_and_sinr(g, p[idx], c)
            theta = 1.0 + sinr  # 1 / MSE at the MMSE filter
            lam[idx], p[idx] = phase_duals_and_powers(v, g, theta, q_hat[idx])
            gamma_exit += wmmse_objective(theta, phase_mse(v, g, p[idx], c))

        ev = evaluate(real, cfg, tau, dirs, hp, p)
        if update_assignment:
            chosen, ev = coordinate_sweep(AssignContext(real, cfg, tau, dirs, p, Assignment(hp)), ev)
            hp = chosen.harvest_phase.copy()
        p = ev.p_ul
        thetas = _thetas(ev)
        rate = ev.sum_rate
        trace.append(IterationRecord(rate, gamma_exit, gamma_entry))
        last = (rate, hp.copy(), beams, ev, thetas, lam.copy())
        if rate > best[0]:
            best = last
        if abs(rate - rate_prev) <= cfg.tol_rate and (it > 0 or _beams_settled(real, cfg, tau, lam, hp, dirs)):
            polished = _support_sweep(real, cfg, tau, dirs, hp, ev) if SUPPORT_SWEEP else ev
            if polished is ev:
                converged = True
                break
            ev, memory = polished, _StepMemory()
            p, thetas, rate = ev.p_ul, _thetas(ev), ev.sum_rate
            last = (rate, hp.copy(), beams, ev, thetas, lam.copy())
            if rate > best[0]:
                best = last
        rate_prev = rate

    rate, hp, beams, ev, thetas, lam = last if converged else best
    alloc = _allocation(cfg, tau, hp, beams, ev, thetas, lam)
    report = SolveReport(sum_rate=rate, per_user_rate=ev.rate, per_user_harvest=ev.harvest, snr=ev.sinr,
                         trace=trace, iterations=len(trace), converged=converged, tau=tau)
    return alloc, report


def algorithm2(cfg: SystemConfig, real: ChannelRealization, tol_tau: float | None = None,
               max_evals: int = 100, scan: int = TAU_SCAN_POINTS) -> tuple[Allocation, SolveReport, TauSearchTrace]:
    """Golden-section search of the slot split around ``algorithm1``.

    The sum-rate is often bimodal in the split once groupings may swap
    phases, so a coarse scan of ``scan - 1`` splits picks the bracket first
    (``scan=0`` searches the whole interval). The equal split is always
    evaluated and kept if nothing beats it.
    """
    solved: dict[float, tuple[Allocation, SolveReport]] = {}

    def f(t):
        solved[t] = algorithm1(cfg, real, t)
        return solved[t][1].sum_rate

    trace = golden_search(f, cfg.tol_tau if tol_tau is None else tol_tau, max_evals, x0=0.5, scan=scan)
    alloc, report = solved[trace.tau_star]
    return alloc, report, trace


def audit(alloc: Allocation, real: ChannelRealization, cfg: SystemConfig, atol: float = 1e-12) -> list[str]:
    """Check every constraint of the sum-rate problem; returns the violations."""
    problems = []
    K = real.K
    a = alloc.assignment.a
    if a.shape != (K, 2) or np.any((a != 0) & (a != 1)) or np.any(a.sum(axis=1) != 1):
        problems.append("assignment is not one-hot per user")
    t1, t2 = alloc.tau
    if not (0 < t1 < 1 and 0 < t2 < 1) or abs(t1 + t2 - 1.0) > 1e-12:
        problems.append(f"slot lengths {alloc.tau} infeasible")
    if alloc.mode is Duplex.HD and np.any(a[:, 0] != 1):
        problems.append("half-duplex users must all harvest in the first slot")

    p_cap = cfg.p_dl_phase
    for l in (0, 1):
        radiated = float(np.vdot(alloc.transmitted_beam(l), alloc.transmitted_beam(l)).real)
        if radiated > p_cap * (1 + 1e-9) + atol:
            problems.append(f"phase {l}: DL power {radiated:.6g} W exceeds {p_cap:.6g} W")
        harvesting = [k for k in range(K) if a[k, l] == 1]
        if bool(harvesting) != alloc.dl_active[l]:
            problems.append(f"phase {l}: DL activity does not match the harvesting group")

    betas = cfg.betas
    for l, st in enumerate(alloc.ul_state):
        expected_c = cfg.sigma2_ul
        if alloc.mode is Duplex.FD and alloc.dl_active[l]:
            expected_c += cfg.sigma2_rsi * p_cap
        if st.c_noise < cfg.sigma2_ul or not math.isclose(st.c_noise, expected_c, rel_tol=1e-12):
            problems.append(f"phase {l}: UL noise level {st.c_noise} inconsistent with the DL beam")
        for j, k in enumerate(st.users):
            k = int(k)
            if a[k, 1 - l] != 1:
                problems.append(f"user {k} transmits in phase {l} but does not harvest in phase {1 - l}")
                continue
            h = real.h_true[1 - l, k]
            w = alloc.transmitted_beam(1 - l)
            incident = abs(sum(np.conj(h[i]) * w[i] for i in range(real.M))) ** 2
            useful = min(incident, cfg.p_th) if cfg.eh_model is EHModel.NONLINEAR else incident
            budget = alloc.tau[1 - l] / alloc.tau[l] * betas[k] * useful
            pk = float(st.p_ul[j])
            if pk < 0:
                problems.append(f"user {k}: negative UL power")
            if pk > budget * (1 + 1e-12) + atol:
                problems.append(f"user {k}: UL power {pk:.6g} W exceeds harvested budget {budget:.6g} W")
    covered = sorted(int(k) for st in alloc.ul_state for k in st.users)
    if covered != list(range(K)):
        problems.append("every user must transmit in exactly one phase")
    return problems
