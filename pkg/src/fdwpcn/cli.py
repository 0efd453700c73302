"""Command line entry point: solve, sweep, figure and audit.

Exit codes: 0 on success, 2 for configuration errors, 3 when some solve did
not converge or an audited allocation violates a constraint.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .assign import Assignment
from .beamform import BeamformerSolution
from .engine import Allocation, algorithm1, algorithm2, audit
from .experiments import ExperimentSpec, figure_recipe, run_sweep, to_csv
from .scenario import (ChannelRealization, ConfigError, Duplex, SystemConfig, config_from_pairs, format_config,
                       load_config, parse_kv_text, sample_realization)
from .wmmse import UlState

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3
SPEC_KEYS = ("sweep_variable", "sweep_values", "n_realizations", "schemes", "seed0")


def _cplx(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _uncplx(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def allocation_to_json(alloc: Allocation, real: ChannelRealization, cfg: SystemConfig) -> dict:
    """Self-contained record: config, channels and the allocation itself."""
    config = dict(line.split(" = ", 1) for line in format_config(cfg).splitlines())
    return {
        "config": config,
        "realization": {"seed": real.seed, "distances": real.distances.tolist(),
                        "h_hat": _cplx(real.h_hat), "h_err": _cplx(real.h_err)},
        "allocation": {
            "mode": alloc.mode.value,
            "harvest_phase": alloc.assignment.harvest_phase.tolist(),
            "tau": list(alloc.tau),
            "dl_active": list(alloc.dl_active),
            "beams": [{"w": _cplx(b.w), "lambda_dl": b.lambda_dl, "degenerate": b.degenerate,
                       "direction": _cplx(b.direction)} for b in alloc.beams],
            "ul_state": [{"users": st.users.tolist(), "v": _cplx(np.reshape(st.v, (len(st.users), real.M))),
                          "theta": np.asarray(st.theta).tolist(), "p_ul": np.asarray(st.p_ul).tolist(),
                          "lambda_ul": np.asarray(st.lambda_ul).tolist(), "c_noise": st.c_noise}
                         for st in alloc.ul_state],
        },
    }


def allocation_from_json(doc: dict) -> tuple[Allocation, ChannelRealization, SystemConfig]:
    try:
        cfg = config_from_pairs(doc["config"])
        r = doc["realization"]
        real = ChannelRealization(np.asarray(r["distances"]), _uncplx(r["h_hat"]), _uncplx(r["h_err"]), r["seed"])
        a = doc["allocation"]
        m = real.M
        beams = tuple(BeamformerSolution(_uncplx(b["w"]), float(b["lambda_dl"]), np.zeros((m, m), dtype=complex),
                                         bool(b["degenerate"]), _uncplx(b["direction"])) for b in a["beams"])
        states = []
        for st in a["ul_state"]:
            users = np.asarray(st["users"], dtype=int)
            v = _uncplx(st["v"]) if users.size else np.zeros((0, m), dtype=complex)
            states.append(UlState(users, v.reshape(users.size, m), np.asarray(st["theta"], dtype=float),
                                  np.asarray(st["p_ul"], dtype=float), np.asarray(st["lambda_ul"], dtype=float),
                                  float(st["c_noise"])))
        alloc = Allocation(Assignment(a["harvest_phase"]), tuple(a["tau"]), beams,
                           tuple(bool(x) for x in a["dl_active"]), tuple(states), Duplex(a["mode"]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed allocation file: {exc!r}") from None
    return alloc, real, cfg


def _base_config(args, base: SystemConfig | None = None) -> SystemConfig:
    cfg = load_config(args.config, base) if args.config else (base or SystemConfig())
    if args.set:
        pairs = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = (s.strip() for s in item.split("=", 1))
            pairs[key] = value
        cfg = config_from_pairs(pairs, cfg)
    return cfg


def _fmt_array(a) -> str:
    return ",".join(repr(float(x)) for x in np.asarray(a).ravel())


def cmd_solve(args) -> int:
    cfg = _base_config(args)
    if args.mode:
        cfg = cfg.replace(duplex=Duplex(args.mode.upper()))
    real = sample_realization(cfg, args.seed)
    if args.scheme == "opt":
        alloc, report, trace = algorithm2(cfg, real)
    else:
        alloc, report = algorithm1(cfg, real, args.tau)
        trace = None
    lines = {
        "mode": cfg.duplex.value,
        "scheme": args.scheme,
        "seed": args.seed,
        "tau1": repr(report.tau[0]),
        "sum_rate_bits": f"{report.sum_rate:.6f}",
        "iterations": report.iterations,
        "converged": str(report.converged).lower(),
        "per_user_rate_bits": _fmt_array(report.per_user_rate),
        "per_user_harvest_w": ",".join(f"{x:.6e}" for x in report.per_user_harvest),
        "snr": _fmt_array(report.snr),
        "harvest_phase": ",".join(str(int(x)) for x in alloc.assignment.harvest_phase),
    }
    if trace is not None:
        lines["tau_search_iterations"] = trace.iterations
        lines["tau_search_evaluations"] = len(trace.evaluations)
    for key, value in lines.items():
        print(f"{key}={value}")
    if args.out:
        Path(args.out).write_text(json.dumps(allocation_to_json(alloc, real, cfg), indent=1) + "\n")
    return EXIT_OK if report.converged else EXIT_PARTIAL


def _read_spec(path, base: SystemConfig) -> ExperimentSpec:
    try:
        pairs = parse_kv_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from None
    spec_pairs = {k: pairs.pop(k) for k in SPEC_KEYS if k in pairs}
    if "sweep_variable" not in spec_pairs or "sweep_values" not in spec_pairs:
        raise ConfigError("sweep spec needs sweep_variable and sweep_values")
    try:
        values = tuple(float(v) for v in spec_pairs["sweep_values"].split(","))
        kwargs = {"sweep_variable": spec_pairs["sweep_variable"], "sweep_values": values}
        if "n_realizations" in spec_pairs:
            kwargs["n_realizations"] = int(spec_pairs["n_realizations"])
        if "schemes" in spec_pairs:
            kwargs["schemes"] = tuple(s for s in spec_pairs["schemes"].split(",") if s.strip())
        if "seed0" in spec_pairs:
            kwargs["seed0"] = int(spec_pairs["seed0"])
    except ValueError as exc:
        raise ConfigError(f"bad sweep spec: {exc}") from None
    return ExperimentSpec(config_from_pairs(pairs, base), **kwargs)


def _emit(result, out) -> int:
    text = to_csv(result)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_PARTIAL if result.n_fail else EXIT_OK


def _with_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    changes = {}
    if args.seed is not None:
        changes["seed0"] = args.seed
    if getattr(args, "n", None) is not None:
        changes["n_realizations"] = args.n
    if not changes:
        return spec
    fields = dict(base=spec.base, sweep_variable=spec.sweep_variable, sweep_values=spec.sweep_values,
                  n_realizations=spec.n_realizations, schemes=spec.schemes, seed0=spec.seed0)
    fields.update(changes)
    return ExperimentSpec(**fields)


def cmd_sweep(args) -> int:
    spec = _with_overrides(_read_spec(args.spec, _base_config(args)), args)
    return _emit(run_sweep(spec, args.jobs), args.out)


def cmd_figure(args) -> int:
    spec = figure_recipe(args.name)
    if args.config or args.set:
        spec = ExperimentSpec(_base_config(args, spec.base), spec.sweep_variable, spec.sweep_values, spec.n_realizations,
                              spec.schemes, spec.seed0)
    return _emit(run_sweep(_with_overrides(spec, args), args.jobs), args.out)


def cmd_audit(args) -> int:
    try:
        doc = json.loads(Path(args.allocation).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read allocation {args.allocation}: {exc}") from None
    alloc, real, cfg = allocation_from_json(doc)
    problems = audit(alloc, real, cfg)
    for p in problems:
        print(f"violation: {p}")
    if not problems:
        print("ok")
    return EXIT_PARTIAL if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdwpcn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable); *_dbm and *_db keys are converted")

    p = sub.add_parser("solve", help="solve one realization and print its report")
    config_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("fd", "hd"))
    p.add_argument("--scheme", choices=("opt", "fixed"), default="opt")
    p.add_argument("--tau", type=float, default=0.5, help="first slot length for --scheme fixed")
    p.add_argument("--out", help="write the allocation as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run a sweep spec file and write CSV")
    p.add_argument("spec")
    config_flags(p)
    p.add_argument("--seed", type=int, help="first seed (overrides seed0)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", help="run a canned figure recipe and write CSV")
    p.add_argument("name")
    config_flags(p)
    p.add_argument("--seed", type=int, help="first seed")
    p.add_argument("--n", type=int, help="number of realizations (default 1000)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("audit", help="check a saved allocation against every constraint")
    p.add_argument("allocation")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
