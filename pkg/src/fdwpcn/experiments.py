"""Monte Carlo sweeps over the system parameters and canned figure recipes.

Every (sweep value, seed) pair draws one channel realization that all
schemes share, so scheme comparisons are paired. Results are reduced in grid
order whatever order the workers finish in, and the CSV output is
byte-identical across reruns.
"""
from __future__ import annotations

import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import algorithm1, algorithm2
from .scenario import ConfigError, Duplex, SystemConfig, db_to_lin, dbm_to_w, sample_realization

CSV_HEADER = "scheme,sweep_var,sweep_value,mean_sum_rate_bits,stderr_bits,mean_harvest_w,mean_iters,n_fail"
FIXED_TAU = 0.5


class SweepVariable(str, enum.Enum):
    P_DL_DBM = "p_dl_dbm"
    SIGMA2_RSI_DB = "sigma2_rsi_db"
    SIGMA2_UL_DBM = "sigma2_ul_dbm"
    K = "K"
    SIGMA2_E = "sigma2_e"
    TAU1_FIXED = "tau1_fixed"


class Scheme(str, enum.Enum):
    FD_OPT = "FD-opt"
    FD_FIXED = "FD-fixed"
    HD_OPT = "HD-opt"
    HD_FIXED = "HD-fixed"

    @property
    def duplex(self) -> Duplex:
        return Duplex.FD if self.value.startswith("FD") else Duplex.HD

    @property
    def optimal(self) -> bool:
        return self.value.endswith("opt")


def parse_scheme(text) -> Scheme:
    if isinstance(text, Scheme):
        return text
    for s in Scheme:
        if str(text).strip().lower() == s.value.lower():
            return s
    raise ConfigError(f"unknown scheme {text!r} (choose from {', '.join(s.value for s in Scheme)})")


def parse_sweep_variable(text) -> SweepVariable:
    if isinstance(text, SweepVariable):
        return text
    for v in SweepVariable:
        if str(text).strip().lower() == v.value.lower():
            return v
    raise ConfigError(f"unknown sweep variable {text!r} (choose from {', '.join(v.value for v in SweepVariable)})")


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig
    sweep_variable: SweepVariable
    sweep_values: tuple[float, ...]
    n_realizations: int = 1000
    schemes: tuple[Scheme, ...] = (Scheme.FD_OPT, Scheme.HD_OPT)
    seed0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sweep_variable", parse_sweep_variable(self.sweep_variable))
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        schemes = tuple(dict.fromkeys(parse_scheme(s) for s in self.schemes))
        object.__setattr__(self, "schemes", schemes)
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise ConfigError("n_realizations must be a positive integer")
        if not self.sweep_values:
            raise ConfigError("sweep_values must not be empty")
        steps = np.diff(self.sweep_values)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError("sweep_values must be strictly monotone")
        if not schemes:
            raise ConfigError("at least one scheme is required")
        if self.sweep_variable is SweepVariable.K and any(v != int(v) or v < 1 for v in self.sweep_values):
            raise ConfigError("K sweep values must be positive integers")
        if self.sweep_variable is SweepVariable.TAU1_FIXED and any(not 0 < v < 1 for v in self.sweep_values):
            raise ConfigError("tau1_fixed values must lie in (0, 1)")
        for v in self.sweep_values:
            config_at(self, v)  # validate every point up front

    @property
    def seeds(self) -> range:
        return range(self.seed0, self.seed0 + self.n_realizations)


def config_at(spec: ExperimentSpec, value: float) -> SystemConfig:
    """Base config with the swept parameter set to ``value``."""
    var, base = spec.sweep_variable, spec.base
    if var is SweepVariable.P_DL_DBM:
        return base.replace(p_dl_max=dbm_to_w(value))
    if var is SweepVariable.SIGMA2_RSI_DB:
        return base.replace(sigma2_rsi=db_to_lin(value))
    if var is SweepVariable.SIGMA2_UL_DBM:
        return base.replace(sigma2_ul=dbm_to_w(value))
    if var is SweepVariable.K:
        return base.replace(K=int(value))
    if var is SweepVariable.SIGMA2_E:
        return base.replace(sigma2_e=value)
    return base


def fixed_tau(spec: ExperimentSpec, value: float) -> float:
    return value if spec.sweep_variable is SweepVariable.TAU1_FIXED else FIXED_TAU


@dataclass
class SeedOutcome:
    sum_rate: float
    harvest: np.ndarray  # per user, W
    iterations: int
    converged: bool
    tau1: float


def run_scheme(cfg: SystemConfig, real, scheme: Scheme, tau1: float = FIXED_TAU) -> SeedOutcome:
    """Solve one realization with one scheme."""
    cfg = cfg.replace(duplex=scheme.duplex)
    if scheme.optimal:
        _, report, _ = algorithm2(cfg, real)
    else:
        _, report = algorithm1(cfg, real, tau1)
    return SeedOutcome(report.sum_rate, report.per_user_harvest, report.iterations, report.converged,
                       report.tau[0])


def _grid_task(args):
    spec, value, seed = args
    cfg = config_at(spec, value)
    real = sample_realization(cfg, seed)
    tau1 = fixed_tau(spec, value)
    return [run_scheme(cfg, real, s, tau1) for s in spec.schemes]


@dataclass
class SweepRow:
    scheme: Scheme
    sweep_var: SweepVariable
    sweep_value: float
    mean_sum_rate: float
    stderr: float | None  # None when there is a single realization
    mean_harvest: float  # per user, W
    mean_iters: float
    n_fail: int


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: list[SweepRow] = field(default_factory=list)
    # per-seed outcomes keyed by (scheme, sweep value), in seed order
    outcomes: dict = field(default_factory=dict)

    def row(self, scheme, value) -> SweepRow:
        scheme = parse_scheme(scheme)
        for r in self.rows:
            if r.scheme is scheme and r.sweep_value == value:
                return r
        raise KeyError((scheme, value))

    def sum_rates(self, scheme, value) -> np.ndarray:
        return np.array([o.sum_rate for o in self.outcomes[parse_scheme(scheme), float(value)]])

    def harvests(self, scheme, value) -> np.ndarray:
        return np.stack([o.harvest for o in self.outcomes[parse_scheme(scheme), float(value)]])

    @property
    def n_fail(self) -> int:
        return sum(r.n_fail for r in self.rows)


def _summarise(scheme, spec, value, outcomes) -> SweepRow:
    rates = np.array([o.sum_rate for o in outcomes])
    n = rates.size
    stderr = float(rates.std(ddof=1) / math.sqrt(n)) if n > 1 else None
    harvest = float(np.mean([o.harvest.mean() for o in outcomes]))
    iters = float(np.mean([o.iterations for o in outcomes]))
    fails = sum(not o.converged for o in outcomes)
    return SweepRow(scheme, spec.sweep_variable, value, float(rates.mean()), stderr, harvest, iters, fails)


def run_sweep(spec: ExperimentSpec, jobs: int = 1) -> SweepResult:
    """Run every (value, seed) point and aggregate one row per (scheme, value).

    Non-converged inner solves are counted in ``n_fail``; they never stop
    the sweep.
    """
    tasks = [(spec, v, s) for v in spec.sweep_values for s in spec.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_grid_task, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        results = [_grid_task(t) for t in tasks]

    out = SweepResult(spec)
    n = spec.n_realizations
    for i, value in enumerate(spec.sweep_values):
        block = results[i * n:(i + 1) * n]
        for j, scheme in enumerate(spec.schemes):
            outcomes = [r[j] for r in block]
            out.outcomes[scheme, value] = outcomes
    for scheme in spec.schemes:
        for value in spec.sweep_values:
            out.rows.append(_summarise(scheme, spec, value, out.outcomes[scheme, value]))
    return out


def _fmt_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in result.rows:
        stderr = "" if r.stderr is None else f"{r.stderr:.6f}"
        buf.write(f"{r.scheme.value},{r.sweep_var.value},{_fmt_value(r.sweep_value)},{r.mean_sum_rate:.6f},"
                  f"{stderr},{r.mean_harvest:.6e},{r.mean_iters:.6f},{r.n_fail}\n")
    return buf.getvalue()


def _arange(lo, hi, step):
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10")
ALL_SCHEMES = tuple(Scheme)


def figure_recipe(name: str, n_realizations: int = 1000, seed0: int = 0) -> ExperimentSpec:
    """Canned sweep for one of the standard figures.

    Powers are read as dBm. ``fig3`` uses 10 dBm; rerun with
    ``p_dl_max=dbm_to_w(-10)`` for the low-power curve. ``fig10`` sweeps the
    user count with the other parameters at their defaults.
    """
    base = SystemConfig()
    small = base.replace(K=2, M=2)
    fixed = (Scheme.FD_FIXED, Scheme.HD_FIXED)
    recipes = {
        "fig3": (base, SweepVariable.TAU1_FIXED, _arange(0.05, 0.95, 0.05), fixed),
        "fig4": (base, SweepVariable.TAU1_FIXED, (0.5,), fixed),
        "fig5": (base, SweepVariable.P_DL_DBM, (-10.0, 10.0), (Scheme.FD_OPT, Scheme.HD_OPT)),
        "fig6": (small.replace(p_dl_max=dbm_to_w(0.0)), SweepVariable.SIGMA2_E, (0.0, 0.01, 0.1), ALL_SCHEMES),
        "fig7": (small, SweepVariable.P_DL_DBM, _arange(0.0, 60.0, 5.0), ALL_SCHEMES),
        "fig8": (base, SweepVariable.P_DL_DBM, _arange(-20.0, 40.0, 5.0), ALL_SCHEMES),
        "fig9": (base.replace(p_dl_max=dbm_to_w(0.0)), SweepVariable.SIGMA2_RSI_DB, _arange(-110.0, -50.0, 10.0),
                 fixed),
        "fig10": (base.replace(p_dl_max=dbm_to_w(0.0)), SweepVariable.K, _arange(2.0, 20.0, 2.0), ALL_SCHEMES),
    }
    if name not in recipes:
        raise ConfigError(f"unknown figure {name!r} (choose from {', '.join(FIGURES)})")
    cfg, var, values, schemes = recipes[name]
    return ExperimentSpec(cfg, var, values, n_realizations, schemes, seed0)
