"""Command line front end.

Subcommands: derive, walk, evolve, compare, validate.  Each prints a small
JSON report on stdout.  Rates are measured in units of gamma0 and times in
1/gamma0, so ``--delta`` is the dimensionless product gamma0 * Delta.

Exit codes: 0 success, 2 usage, 3 validation failure, 4 numerical
failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .derivation import build_transition_operators, normalization_residual
from .errors import BadParameter, NotConverged, OQWError
from .io import (
    atomic_write,
    dump_operators,
    operators_to_map,
    parse_model_config,
    parse_operators,
    write_trajectory,
)
from .lindblad import GeneratorSpec, OdeConfig, compare_discrete_continuous, ground_state_on_node, rk4_integrate
from .linalg import hermitian_eig
from .states import BlockState
from .walk import choi_matrix, mixing_time, run_walk

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5



def _load_spec(path: str):
    """Parse a config and rescale to gamma0 = 1; returns (spec, configured gamma0)."""
    spec = parse_model_config(Path(path).read_text(encoding="utf-8"))
    return dataclasses.replace(spec, gamma0=1.0), spec.gamma0


def _initial_state(choice: str, dim: int, node_count: int, spec=None) -> BlockState:
    """Initial coin state on node 1: ground (of omega1), mixed, or basis:K."""
    if choice == "ground":
        if spec is None:
            raise BadParameter("--init ground needs --config")
        return ground_state_on_node(spec)
    if choice == "mixed":
        return BlockState.localized(np.eye(dim) / dim, 0, node_count)
    if choice.startswith("basis:"):
        try:
            k = int(choice.split(":", 1)[1])
            rho = np.zeros((dim, dim))
            rho[k, k] = 1.0
        except (ValueError, IndexError):
            raise BadParameter(f"bad basis index in {choice!r}") from None
        return BlockState.localized(rho, 0, node_count)
    raise BadParameter(f"unknown initial state {choice!r}")


def _floats(a) -> list[float]:
    return [float(x) for x in np.asarray(a).ravel()]


def _sidecar(out: str | None, args: argparse.Namespace, extra: dict) -> None:
    if not out:
        return
    meta = {
        "version": __version__,
        "command": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k != "func"},
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }
    atomic_write(out + ".meta.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def cmd_derive(args) -> dict:
    spec, g0 = _load_spec(args.config)
    mode = "exact" if args.mode == "exact" else "first_order"
    ops = build_transition_operators(spec, args.delta, mode)
    res = normalization_residual(ops)
    if args.out:
        atomic_write(args.out, dump_operators(ops, res))
        _sidecar(args.out, args, {"config_gamma0": g0})
    return {
        "delta": args.delta,
        "mode": mode,
        "preset": spec.preset,
        "config_gamma0": g0,
        "operator_count": len(ops.terms),
        "residuals": _floats(res),
    }


def _walk_map(args):
    step_mode = {"first-order": "first_order_warn"}.get(args.mode, args.mode)
    if args.operators:
        ops = parse_operators(Path(args.operators).read_text(encoding="utf-8"))
        return operators_to_map(ops, step_mode), ops, None, None
    spec, g0 = _load_spec(args.config)
    kraus = args.kraus or ("exact" if step_mode == "strict" else "first-order")
    ops = build_transition_operators(spec, args.delta, "exact" if kraus == "exact" else "first_order")
    return ops.to_map(step_mode), ops, spec, g0


def cmd_walk(args) -> dict:
    m, ops, spec, g0 = _walk_map(args)
    init = _initial_state(args.init or ("ground" if spec is not None else "mixed"), m.dim, m.node_count, spec)
    traj = run_walk(m, init, args.steps, ops.delta)
    try:
        tmix = mixing_time(traj, args.eps) if len(traj) > 1 else 0
    except NotConverged:
        tmix = None
    if args.out:
        write_trajectory(traj, args.out)
        _sidecar(args.out, args, {"raw_traces": _floats(traj.raw_traces)})
    return {
        "steps": args.steps,
        "step_mode": m.step_mode,
        "kraus_mode": ops.mode,
        "delta": ops.delta,
        "config_gamma0": g0,
        "residuals": _floats(m.residuals),
        "final_probabilities": _floats(traj.probabilities[-1]),
        "final_trace": traj.states[-1].total_trace(),
        "mixing_time": tmix,
        "eps": args.eps,
    }


def cmd_evolve(args) -> dict:
    spec, g0 = _load_spec(args.config)
    form = "two_level" if args.form == "two-level" else "generic"
    gen = GeneratorSpec.from_model(spec, form)
    init = ground_state_on_node(spec)
    traj = rk4_integrate(gen, init, OdeConfig(args.dt, args.t_final, args.stride))
    if args.out:
        write_trajectory(traj, args.out)
        _sidecar(args.out, args, {"config_gamma0": g0})
    return {
        "form": form,
        "dt": args.dt,
        "t_final": args.t_final,
        "samples": len(traj),
        "config_gamma0": g0,
        "final_probabilities": _floats(traj.probabilities[-1]),
        "final_trace": traj.states[-1].total_trace(),
    }


def cmd_compare(args) -> dict:
    spec, g0 = _load_spec(args.config)
    cmp = compare_discrete_continuous(spec, args.delta, args.steps)
    if args.out:
        lines = ["step,time,deviation"]
        for n, (t, d) in enumerate(zip(cmp.discrete.times, cmp.per_step)):
            lines.append(f"{n},{t:.16e},{d:.16e}")
        atomic_write(args.out, "\n".join(lines) + "\n")
        _sidecar(args.out, args, {"config_gamma0": g0})
    return {
        "delta": args.delta,
        "steps": args.steps,
        "deviation": cmp.deviation,
        "discrete_final": _floats(cmp.discrete.probabilities[-1]),
        "continuous_final": _floats(cmp.continuous.probabilities[-1]),
        "config_gamma0": g0,
    }


def cmd_validate(args) -> dict:
    if args.operators:
        ops = parse_operators(Path(args.operators).read_text(encoding="utf-8"))
    else:
        spec, _ = _load_spec(args.config)
        mode = "exact" if args.mode == "exact" else "first_order"
        ops = build_transition_operators(spec, args.delta, mode)
    m = operators_to_map(ops, "renormalized")
    res = m.residuals
    report = {"residuals": _floats(res), "tolerance": args.tol, "normalized": bool(res.max() <= args.tol)}
    if m.dim * m.node_count <= 16:
        choi = choi_matrix(m)
        report["choi_min_eigenvalue"] = float(hermitian_eig(choi, tol=1e-8).eigenvalues[0])
        report["completely_positive"] = report["choi_min_eigenvalue"] >= -args.tol
    report["ok"] = report["normalized"] and report.get("completely_positive", True)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oqwlab", description="Open quantum walks from a microscopic bath model.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive", help="derive transition operators from a model config")
    d.add_argument("--config", required=True)
    d.add_argument("--delta", type=float, default=0.01, help="time step gamma0*Delta")
    d.add_argument("--mode", choices=["first-order", "exact"], default="first-order")
    d.add_argument("--out")
    d.set_defaults(func=cmd_derive)

    w = sub.add_parser("walk", help="iterate the discrete walk and write a trajectory")
    src = w.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--operators")
    w.add_argument("--delta", type=float, default=0.01)
    w.add_argument("--steps", type=int, default=50)
    w.add_argument("--mode", choices=["strict", "renormalized", "first-order"], default="strict")
    w.add_argument("--kraus", choices=["first-order", "exact"],
                   help="operator construction (default: exact for strict, else first-order)")
    w.add_argument("--init", help="ground | mixed | basis:K (on node 1)")
    w.add_argument("--eps", type=float, default=0.01, help="mixing-time tolerance")
    w.add_argument("--out")
    w.set_defaults(func=cmd_walk)

    e = sub.add_parser("evolve", help="integrate the continuous-time master equation")
    e.add_argument("--config", required=True)
    e.add_argument("--dt", type=float, default=1e-4)
    e.add_argument("--t-final", type=float, default=0.5)
    e.add_argument("--stride", type=int, default=10)
    e.add_argument("--form", choices=["generic", "two-level"], default="generic")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evolve)

    c = sub.add_parser("compare", help="discrete walk versus continuous evolution")
    c.add_argument("--config", required=True)
    c.add_argument("--delta", type=float, default=1e-4)
    c.add_argument("--steps", type=int, default=1000)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("validate", help="normalisation and Choi positivity report")
    vsrc = v.add_mutually_exclusive_group(required=True)
    vsrc.add_argument("--operators")
    vsrc.add_argument("--config")
    v.add_argument("--delta", type=float, default=0.01)
    v.add_argument("--mode", choices=["first-order", "exact"], default="exact")
    v.add_argument("--tol", type=float, default=1e-10)
    v.set_defaults(func=cmd_validate)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = args.func(args)
    except OQWError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"command": args.command, **report}, indent=2, sort_keys=True))
    if args.command == "validate" and not report["ok"]:
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
