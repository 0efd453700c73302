"""System configuration and random channel realizations.

Channels follow a distance-based path-loss model with Rayleigh fading per
antenna. The H-AP only knows an estimate of each channel; the energy
harvesters see the true one. Phases are indexed 0 (first slot, tau_1) and
1 (second slot, tau_2) throughout the package.
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid or unparseable configuration."""


class EHModel(str, enum.Enum):
    NONLINEAR = "NonLinear"
    LINEAR = "Linear"


class Duplex(str, enum.Enum):
    FD = "FD"
    HD = "HD"


class DLBudget(str, enum.Enum):
    # per_phase: every active phase radiates the full p_dl_max.
    # split: each phase gets p_dl_max / 2.
    PER_PHASE = "per_phase"
    SPLIT = "split"


def dbm_to_w(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(watts):
    return 10.0 * np.log10(watts) + 30.0


def db_to_lin(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scenario constants. Powers are in watts, ``c0_db`` is a power gain in dB."""

    K: int = 4
    M: int = 4
    p_dl_max: float = dbm_to_w(10.0)
    sigma2_ul: float = dbm_to_w(-80.0)
    sigma2_rsi: float = db_to_lin(-80.0)
    beta: float | tuple[float, ...] = 0.7
    p_th: float = dbm_to_w(7.0)
    c0_db: float = -10.0
    eps_h: float = 3.0
    r_t: float = 10.0
    d_min: float = 1.0
    sigma2_e: float = 0.01
    eh_model: EHModel = EHModel.NONLINEAR
    duplex: Duplex = Duplex.FD
    tol_rate: float = 1e-4
    tol_tau: float = 1e-3
    max_iters: int = 50
    dl_budget: DLBudget = DLBudget.PER_PHASE

    def __post_init__(self):
        # enums may arrive as plain strings from config files
        for name, kind in (("eh_model", EHModel), ("duplex", Duplex), ("dl_budget", DLBudget)):
            value = getattr(self, name)
            if not isinstance(value, kind):
                try:
                    object.__setattr__(self, name, _parse_enum(kind, value))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        if isinstance(self.beta, (list, np.ndarray)):
            object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        self.validate()

    def validate(self) -> None:
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}")
        for name in ("p_dl_max", "sigma2_ul", "sigma2_rsi", "p_th"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.sigma2_e < 1.0:
            raise ConfigError(f"sigma2_e must lie in [0, 1), got {self.sigma2_e}")
        if isinstance(self.beta, tuple) and len(self.beta) != self.K:
            raise ConfigError(f"beta has {len(self.beta)} entries for K={self.K}")
        if not np.all((self.betas > 0) & (self.betas <= 1)):
            raise ConfigError("beta must lie in (0, 1]")
        if self.d_min < 1.0:
            raise ConfigError("d_min must be at least the 1 m reference distance")
        if self.d_min > self.r_t:
            raise ConfigError(f"d_min={self.d_min} exceeds r_t={self.r_t}")
        if not (self.tol_rate > 0 and self.tol_tau > 0):
            raise ConfigError("tolerances must be positive")
        if not 0 < self.tol_tau < 0.5:
            raise ConfigError("tol_tau must be below 0.5")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError("max_iters must be a positive integer")

    @functools.cached_property
    def betas(self) -> np.ndarray:
        out = np.broadcast_to(np.asarray(self.beta, dtype=float), (self.K,)).copy()
        out.setflags(write=False)
        return out

    @property
    def p_dl_phase(self) -> float:
        """Power radiated by an active DL energy beam in one phase."""
        return self.p_dl_max / 2.0 if self.dl_budget is DLBudget.SPLIT else self.p_dl_max

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def _parse_enum(kind, value):
    if isinstance(value, kind):
        return value
    text = str(value).strip()
    for member in kind:
        if text.lower() in (member.value.lower(), member.name.lower()):
            return member
    choices = ", ".join(m.value for m in kind)
    raise ValueError(f"unknown {kind.__name__} {value!r} (choose from {choices})")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
_INT_FIELDS = {"K", "M", "max_iters"}
_ENUM_FIELDS = {"eh_model": EHModel, "duplex": Duplex, "dl_budget": DLBudget}


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def config_kwargs(pairs: dict[str, str]) -> dict:
    """Convert raw string pairs to SystemConfig keyword arguments.

    Keys ending in ``_dbm`` are converted from dBm to watts and keys ending in
    ``_db`` from dB to a linear gain (``c0_db`` is a field of its own and is
    kept as is). Unknown keys raise ConfigError.
    """
    kwargs = {}
    for key, value in pairs.items():
        name, conv = key, None
        if key not in _FIELD_TYPES:
            if key.endswith("_dbm"):
                name, conv = key[:-4], dbm_to_w
            elif key.endswith("_db"):
                name, conv = key[:-3], db_to_lin
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        if name in kwargs:
            raise ConfigError(f"{name} given twice (via {key!r})")
        try:
            if name in _ENUM_FIELDS:
                kwargs[name] = _parse_enum(_ENUM_FIELDS[name], value)
            elif name in _INT_FIELDS:
                kwargs[name] = int(value)
            elif name == "beta" and "," in value:
                kwargs[name] = tuple(float(v) for v in value.split(","))
            else:
                x = float(value)
                kwargs[name] = float(conv(x)) if conv else x
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return kwargs


def load_config(path: str | Path, base: SystemConfig | None = None, **overrides) -> SystemConfig:
    """Read a key=value config file on top of ``base`` (defaults if None)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_pairs(parse_kv_text(text), base, **overrides)


def config_from_pairs(pairs: dict[str, str], base: SystemConfig | None = None, **overrides) -> SystemConfig:
    kwargs = config_kwargs(pairs)
    kwargs.update(overrides)
    try:
        return dataclasses.replace(base or SystemConfig(), **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: SystemConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, enum.Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Estimated DL channels and their estimation errors.

    ``h_hat`` and ``h_err`` have shape (2, K, M): phase, user, antenna.
    """

    distances: np.ndarray
    h_hat: np.ndarray
    h_err: np.ndarray
    seed: int | None = None
    _true: np.ndarray = field(init=False, repr=False)
    _g_hat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h_hat = np.asarray(self.h_hat, dtype=complex)
        h_err = np.asarray(self.h_err, dtype=complex)
        if h_hat.ndim != 3 or h_hat.shape[0] != 2 or h_hat.shape != h_err.shape:
            raise ValueError("h_hat and h_err must both have shape (2, K, M)")
        distances = np.asarray(self.distances, dtype=float)
        if distances.shape != (h_hat.shape[1],):
            raise ValueError("distances must have one entry per user")
        for name, arr in (("distances", distances), ("h_hat", h_hat), ("h_err", h_err)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        true = h_hat + h_err
        g_hat = h_hat.conj()
        for name, arr in (("_true", true), ("_g_hat", g_hat)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def K(self) -> int:
        return self.h_hat.shape[1]

    @property
    def M(self) -> int:
        return self.h_hat.shape[2]

    @property
    def h_true(self) -> np.ndarray:
        """True DL channels, h_hat + h_err up to rounding."""
        return self._true

    @property
    def g_hat(self) -> np.ndarray:
        """Estimated UL channels (reciprocity: conjugate of the DL estimate)."""
        return self._g_hat

    @classmethod
    def from_true(cls, distances, h_true, h_hat, seed=None) -> "ChannelRealization":
        """Build from the true channel itself, which is then kept bit-exact
        (``h_hat + h_err`` can differ from it by rounding)."""
        h_true = np.array(h_true, dtype=complex)
        real = cls(distances, h_hat, h_true - np.asarray(h_hat, dtype=complex), seed)
        if h_true.shape != real.h_hat.shape:
            raise ValueError("h_true must have the shape of h_hat")
        h_true.setflags(write=False)
        object.__setattr__(real, "_true", h_true)
        return real

    def true_channel(self, k: int, phase: int) -> np.ndarray:
        _check_index(self, k, phase)
        return self._true[phase, k]


def _check_index(real: ChannelRealization, k: int, phase: int) -> None:
    if not 0 <= k < real.K:
        raise IndexError(f"user {k} out of range for K={real.K}")
    if phase not in (0, 1):
        raise IndexError(f"phase must be 0 or 1, got {phase}")


def ul_estimated_channel(real: ChannelRealization, k: int, phase: int) -> np.ndarray:
    """UL channel estimate of user ``k`` in ``phase``."""
    _check_index(real, k, phase)
    return np.conj(real.h_hat[phase, k])


def path_loss_amplitude(cfg: SystemConfig, d) -> np.ndarray:
    return math.sqrt(db_to_lin(cfg.c0_db)) * np.asarray(d, dtype=float) ** (-cfg.eps_h / 2.0)


def sample_realization(cfg: SystemConfig, seed: int, distances=None) -> ChannelRealization:
    """Draw user positions and per-phase channels from one seeded stream.

    Positions are uniform over the annulus d_min <= d <= r_t. The true channel
    is drawn first and the estimate conditionally on it, so that
    ``h_hat ~ CN(0, A^2 (1 - s2))`` and ``h_err ~ CN(0, A^2 s2)`` are
    independent, while the true channel for a given seed does not depend on
    ``sigma2_e``. ``distances`` pins the user distances (positions are still
    drawn so the stream layout is unchanged).
    """
    if cfg.d_min > cfg.r_t:
        raise ConfigError(f"d_min={cfg.d_min} exceeds r_t={cfg.r_t}")
    K, M, s2 = cfg.K, cfg.M, cfg.sigma2_e
    rng = np.random.default_rng(seed)
    u = rng.random(K)
    d = np.sqrt(u * (cfg.r_t**2 - cfg.d_min**2) + cfg.d_min**2)
    if distances is not None:
        d = np.broadcast_to(np.asarray(distances, dtype=float), (K,)).copy()
        if np.any(d < cfg.d_min) or np.any(d > cfg.r_t):
            raise ConfigError("pinned distances must lie in [d_min, r_t]")
    amp = path_loss_amplitude(cfg, d)[None, :, None]
    # (l, k, i) C-order consumption; both draws happen whatever sigma2_e is
    z_true = rng.standard_normal((2, K, M, 2)) @ np.array([1.0, 1.0j]) / math.sqrt(2.0)
    z_innov = rng.standard_normal((2, K, M, 2)) @ np.array([1.0, 1.0j]) / math.sqrt(2.0)
    h = amp * z_true
    h_hat = (1.0 - s2) * h + amp * math.sqrt(s2 * (1.0 - s2)) * z_innov
    return ChannelRealization.from_true(d, h, h_hat, seed)
