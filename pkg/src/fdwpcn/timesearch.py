"""Golden-section search over the first slot length and a concavity probe."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonFiniteObjective(ArithmeticError):
    pass


@dataclass
class TauSearchTrace:
    evaluations: list[tuple[float, float]] = field(default_factory=list)
    tau_star: float = 0.5
    value: float = float("nan")
    iterations: int = 0
    brackets: list[tuple[float, float]] = field(default_factory=list)


def golden_search(f: Callable[[float], float], tol_tau: float = 1e-3, max_evals: int = 100,
                  x0: float | None = None, scan: int = 0) -> TauSearchTrace:
    """Maximise ``f`` on ``[tol_tau, 1 - tol_tau]``.

    With ``scan > 1`` the points ``k / scan`` are evaluated first and the
    golden-section bracket is narrowed to one scan step either side of the
    best of them (or of the incumbent ``x0``), which keeps the search on the
    highest bump of a multimodal ``f``. Stops once the bracket is shorter than
    ``tol_tau`` or the evaluation budget is spent. The returned point is the
    final bracket midpoint unless some evaluated point scores strictly higher.
    """
    trace = TauSearchTrace()
    cache: dict[float, float] = {}

    def fe(x):
        if x not in cache:
            y = float(f(x))
            if not math.isfinite(y):
                raise NonFiniteObjective(f"objective is {y} at tau={x!r}")
            cache[x] = y
            trace.evaluations.append((x, y))
        return cache[x]

    a, b = tol_tau, 1.0 - tol_tau
    if x0 is not None:
        fe(x0)
    if scan > 1:
        for k in range(1, scan):
            fe(min(max(k / scan, a), b))
        centre = max(cache, key=cache.__getitem__)
        a, b = max(a, centre - 1.0 / scan), min(b, centre + 1.0 / scan)
    trace.brackets.append((a, b))
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    fc, fd = fe(c), fe(d)
    while b - a >= tol_tau and len(trace.evaluations) < max_evals:
        if fc == fd:
            # a unimodal maximum lies between two equal probes
            a, b = c, d
            c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
            fc, fd = fe(c), fe(d)
        elif fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fe(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fe(d)
        trace.iterations += 1
        trace.brackets.append((a, b))

    mid = 0.5 * (a + b)
    best_x, best_y = mid, fe(mid)
    for x, y in list(cache.items()):
        if y > best_y:
            best_x, best_y = x, y
    trace.tau_star, trace.value = best_x, best_y
    return trace


@dataclass
class ConcavityReport:
    concave: bool
    taus: np.ndarray
    values: np.ndarray
    second_differences: np.ndarray
    threshold: float

    @property
    def worst(self) -> float:
        return float(self.second_differences.max()) if self.second_differences.size else 0.0


def concavity_probe(f: Callable[[float], float], grid_step: float = 0.02) -> ConcavityReport:
    """Check second central differences of ``f`` on a uniform grid inside (0, 1).

    Diagnostic only: inner re-optimisation can make ``f`` slightly non-smooth.
    """
    if not 0.0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")
    n = int(round(1.0 / grid_step))
    taus = np.arange(1, n) * grid_step
    values = np.array([float(f(t)) for t in taus])
    second = values[2:] - 2.0 * values[1:-1] + values[:-2]
    threshold = 1e-6 * float(np.max(np.abs(values))) if values.size else 0.0
    return ConcavityReport(bool(np.all(second <= threshold)), taus, values, second, threshold)
