"""Command-line interface: classify, decompose, simulate, verify.

Exit codes: 0 the automaton is a lattice gas (or the command succeeded),
3 it is not, 1 the descriptor is invalid, 2 a numerical stage failed.
All output is deterministic JSON keyed to a content hash of the input.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import sim
from .descriptor import (CapExceededError, DescriptorError, NumericalError,
                         content_hash, parse)
from .decider import RESIDUAL_TOL, as_qlga_descriptor, decide
from .heisenberg import CausalityViolation

EXIT_QLGA = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_NOT_QLGA = 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("descriptor", help="descriptor file or inline JSON")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="relative rank tolerance (default 1e-9)")
    p.add_argument("--seed", type=int, default=42,
                   help="seed for randomized linear algebra (default 42)")
    p.add_argument("--backend", choices=["auto", "dense", "clifford"],
                   default="auto")
    p.add_argument("--window", type=int, default=None,
                   help="periodic window length per axis for verification")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.add_argument("--no-timings", action="store_true",
                   help="omit wall-clock timings from the report")


def _emit(doc: dict, args) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _decide(args, include_matrices: bool) -> int:
    d = parse(args.descriptor)
    window = (args.window,) * d.n if args.window else None
    result = decide(d, tol=args.tol, seed=args.seed, backend=args.backend,
                    window=window)
    doc = result.as_dict(include_matrices=include_matrices)
    if args.no_timings:
        doc.pop("timings", None)
    _emit(doc, args)
    return EXIT_QLGA if result.verdict else EXIT_NOT_QLGA


def _cmd_check(args) -> int:
    return _decide(args, include_matrices=False)


def _cmd_decompose(args) -> int:
    return _decide(args, include_matrices=True)


def _cmd_verify(args) -> int:
    d = parse(args.descriptor)
    window = (args.window,) * d.n if args.window else None
    result = decide(d, tol=args.tol, seed=args.seed, backend=args.backend,
                    window=window)
    doc = result.as_dict(include_matrices=False)
    if args.no_timings:
        doc.pop("timings", None)
    checks = {}
    if result.decomposition is not None:
        for name, value in result.decomposition.residuals.items():
            checks[name] = {"value": float(value),
                            "pass": bool(value <= RESIDUAL_TOL * 100)}
    doc["checks"] = checks
    ok = all(c["pass"] for c in checks.values())
    _emit(doc, args)
    if not result.verdict:
        return EXIT_NOT_QLGA
    return EXIT_QLGA if ok else EXIT_NUMERICAL


def _cmd_simulate(args) -> int:
    d = parse(args.descriptor)
    if d.kind != "qlga":
        window = (args.window,) * d.n if args.window else None
        result = decide(d, tol=args.tol, seed=args.seed, backend=args.backend,
                        window=window)
        if not result.verdict:
            print("descriptor is not a lattice gas; cannot simulate",
                  file=sys.stderr)
            return EXIT_NOT_QLGA
        d = as_qlga_descriptor(d, result.decomposition)
    if args.state:
        text = args.state
        if not text.lstrip().startswith("{"):
            with open(text, "r", encoding="utf-8") as fh:
                text = fh.read()
        state = sim.state_from_json(text)
    else:
        cell0 = (0,) * d.n
        state = sim.from_cells({cell0: args.excite}, d)
    state = sim.run(state, d, args.steps)
    doc = {
        "descriptor_hash": content_hash(d),
        "steps": args.steps,
        "norm": state.norm(),
        "state": sim.state_to_json(state),
    }
    if args.observe:
        doc["occupations"] = {
            ",".join(str(c) for c in cell): [float(p) for p in probs]
            for cell, probs in sorted(sim.observe(state).items())}
        doc.pop("state")
    _emit(doc, args)
    return EXIT_QLGA


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="qlga",
        description="decide whether a quantum cellular automaton is a"
                    " lattice gas, extract its decomposition, and simulate it")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the criterion and report dimensions")
    _common(p)
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("decompose",
                       help="extract the isomorphism and collision matrices")
    _common(p)
    p.set_defaults(fn=_cmd_decompose)

    p = sub.add_parser("verify",
                       help="decompose and report pass/fail residual checks")
    _common(p)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("simulate", help="evolve a finite configuration")
    _common(p)
    p.add_argument("--state", default=None,
                   help="initial state JSON (file or inline); default is a"
                        " single excited cell at the origin")
    p.add_argument("--excite", type=int, default=1,
                   help="cell basis index for the default initial state")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--observe", action="store_true",
                   help="report per-cell occupation probabilities instead of"
                        " raw amplitudes")
    p.set_defaults(fn=_cmd_simulate)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (DescriptorError, sim.SimulationError, CausalityViolation,
            FileNotFoundError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, CapExceededError,
            np.linalg.LinAlgError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
