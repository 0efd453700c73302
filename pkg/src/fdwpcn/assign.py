"""Binary group assignment: which phase each user harvests in.

A user harvesting in phase ``l`` transmits in the other phase. Candidates are
scored by the UL sum-rate with the DL beam directions and the UL power
vector held at the current iterate; powers are clipped to the budgets the
candidate grouping implies and MMSE receivers are recomputed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .rates import Evaluation, evaluate, grouping_rate
from .scenario import ChannelRealization, SystemConfig

MAX_ENUMERATION_K = 16


@dataclass(frozen=True, eq=False)
class Assignment:
    harvest_phase: np.ndarray  # 0 or 1 per user

    def __post_init__(self):
        hp = np.asarray(self.harvest_phase, dtype=int).copy()
        if hp.ndim != 1 or np.any((hp != 0) & (hp != 1)):
            raise ValueError("harvest_phase must be a vector of 0/1 entries")
        hp.setflags(write=False)
        object.__setattr__(self, "harvest_phase", hp)

    @classmethod
    def from_matrix(cls, a) -> "Assignment":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[1] != 2 or np.any(a.sum(axis=1) != 1) or np.any((a != 0) & (a != 1)):
            raise ValueError("each row of a must be [1, 0] or [0, 1]")
        return cls(np.argmax(a, axis=1))

    @classmethod
    def parity(cls, K: int) -> "Assignment":
        """Even-indexed users harvest in the first phase."""
        return cls(np.arange(K) % 2)

    @classmethod
    def half_duplex(cls, K: int) -> "Assignment":
        """Everybody harvests in the first phase and transmits in the second."""
        return cls(np.zeros(K, dtype=int))

    @property
    def a(self) -> np.ndarray:
        """``a[k, l] = 1`` iff user k harvests in phase l."""
        out = np.zeros((self.harvest_phase.size, 2), dtype=int)
        out[np.arange(self.harvest_phase.size), self.harvest_phase] = 1
        return out

    @property
    def groups(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(np.flatnonzero(self.harvest_phase == l) for l in (0, 1))


@dataclass(frozen=True, eq=False)
class AssignContext:
    real: ChannelRealization
    cfg: SystemConfig
    tau: tuple[float, float]
    directions: np.ndarray  # unit DL beam direction per phase, shape (2, M)
    p_ul: np.ndarray
    assignment: Assignment  # incumbent


def _evaluate(ctx: AssignContext, harvest_phase) -> Evaluation:
    return evaluate(ctx.real, ctx.cfg, ctx.tau, ctx.directions, harvest_phase, ctx.p_ul)


def objective(ctx: AssignContext, harvest_phase) -> float:
    """Time-weighted UL sum-rate of a candidate grouping."""
    return grouping_rate(ctx.real, ctx.cfg, ctx.tau, ctx.directions, harvest_phase, ctx.p_ul)


def coordinate_sweep(ctx: AssignContext, incumbent: Evaluation | None = None) -> tuple[Assignment, Evaluation]:
    """One sweep over users in index order, flipping a user's group when it pays.

    Ties keep the incumbent, so the objective never decreases. ``incumbent``
    may carry the already computed evaluation of ``ctx.assignment``. Returns
    the new grouping with its evaluation.
    """
    start = ctx.assignment.harvest_phase
    hp = start.copy()
    best = objective(ctx, hp)
    for k in range(hp.size):
        hp[k] ^= 1
        value = objective(ctx, hp)
        if value > best:
            best = value
        else:
            hp[k] ^= 1
    if incumbent is None or not np.array_equal(hp, start):
        incumbent = _evaluate(ctx, hp)
    return Assignment(hp), incumbent


def coordinate_assign(ctx: AssignContext) -> Assignment:
    """Grouping after one coordinate sweep (see ``coordinate_sweep``)."""
    return coordinate_sweep(ctx)[0]


def enumerate_assign(ctx: AssignContext) -> Assignment:
    """Best of all 2^K groupings; ties go to the lexicographically smallest."""
    K = ctx.assignment.harvest_phase.size
    if K > MAX_ENUMERATION_K:
        raise ValueError(f"exhaustive assignment refused for K={K} > {MAX_ENUMERATION_K}")
    best, best_hp = -np.inf, None
    for combo in itertools.product((0, 1), repeat=K):
        hp = np.array(combo)
        value = objective(ctx, hp)
        if value > best:
            best, best_hp = value, hp
    return Assignment(best_hp)
