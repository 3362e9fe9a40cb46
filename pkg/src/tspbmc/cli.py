"""Command-line entry point.

Subcommands wire the pipeline end to end::

    tspbmc check <protocol> <scenario> [--sessions K] [--max-bound N] ...
    tspbmc encode <protocol> <scenario> --bound N [--out FILE]
    tspbmc oracle <protocol> <scenario> [--depth N]
    tspbmc list [--export DIR]
    tspbmc dump-model <protocol> <scenario> [--sessions K]

Protocol/scenario arguments accept either a file path or the name of an
embedded library entry (see ``tspbmc list``). Exit codes: 0 no attack up
to the bound, 10 attack found (witness written), 2 usage/input error,
3 solver inconclusive.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import library
from .encoder import BmcProblem, encode
from .errors import TspbmcError
from .frontend import parse_protocol, parse_scenario
from .model import build_model, model_to_json
from .oracle import explicit_reach
from .solver import SolverConfig, default_max_bound, iterate_bounds, resolve_solver_command
from .witness import decode, render_html, render_json, render_text, replay

EXIT_NO_ATTACK = 0
EXIT_ATTACK = 10
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3

_RENDERERS = {"text": render_text, "json": render_json, "html": render_html}


class UsageError(Exception):
    pass


def _load_inputs(protocol_arg: str, scenario_arg: str):
    """Resolve each argument as a file path first, then as a library name."""
    entry = None
    if Path(protocol_arg).is_file():
        protocol_text = Path(protocol_arg).read_text(encoding="utf-8")
    else:
        try:
            entry = library.get(protocol_arg)
        except KeyError:
            raise UsageError(
                f"protocol {protocol_arg!r}: no such file or library entry")
        protocol_text = entry.protocol

    if Path(scenario_arg).is_file():
        scenario_text = Path(scenario_arg).read_text(encoding="utf-8")
    elif entry is not None and scenario_arg in entry.scenarios:
        scenario_text = entry.scenarios[scenario_arg]
    else:
        raise UsageError(
            f"scenario {scenario_arg!r}: no such file"
            + (f" or scenario of library entry {entry.name!r}" if entry else ""))

    return parse_protocol(protocol_text), parse_scenario(scenario_text)


def _write_out(text: str, out_path, fmt: str):
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    elif fmt == "json":
        sys.stdout.write(text)


def _report_attack(trace, model, fmt: str, out_path, origin: str) -> int:
    violation = replay(trace, model)
    if violation is not None:
        print(
            f"internal error: {origin} witness failed replay at position "
            f"{violation.position}: {violation.kind}: {violation.detail}",
            file=sys.stderr)
        return EXIT_INCONCLUSIVE
    rendered = _RENDERERS[fmt](trace)
    verdict = (f"attack found: {model.protocol}/{model.scenario} "
               f"k={model.sessions} at {origin} bound {trace.bound}")
    print(verdict, file=sys.stderr if fmt == "json" and not out_path else sys.stdout)
    _write_out(rendered, out_path, fmt)
    if out_path:
        print(f"witness written to {out_path}",
              file=sys.stderr if fmt == "json" else sys.stdout)
    elif fmt != "json":
        sys.stdout.write(rendered)
    return EXIT_ATTACK


def cmd_check(args) -> int:
    spec, scenario = _load_inputs(args.protocol, args.scenario)
    model = build_model(spec, scenario, k=args.sessions, eavesdrop=args.eavesdrop)
    for w in model.warnings:
        print(f"warning: {w}", file=sys.stderr)
    config = SolverConfig(
        command=resolve_solver_command(args.solver),
        timeout=args.timeout,
        max_bound=args.max_bound,
    )
    verdict = iterate_bounds(model, spec.goal, config)
    for bound, status, wall in verdict.per_bound_log:
        print(f"bound {bound}: {status} ({wall:.2f}s)", file=sys.stderr)
    if verdict.outcome == "no-attack-up-to":
        print(f"no attack up to bound {verdict.bound}")
        return EXIT_NO_ATTACK
    if verdict.outcome == "inconclusive":
        print(f"inconclusive: {verdict.reason}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    script = encode(BmcProblem(model, verdict.bound))
    trace = decode(verdict.result, script, model)
    return _report_attack(trace, model, args.format, args.out, "SMT")


def cmd_encode(args) -> int:
    spec, scenario = _load_inputs(args.protocol, args.scenario)
    if args.bound < 1:
        raise UsageError("--bound must be >= 1")
    model = build_model(spec, scenario, k=args.sessions)
    script = encode(BmcProblem(model, args.bound))
    if args.out:
        Path(args.out).write_text(script.text, encoding="utf-8")
    else:
        sys.stdout.write(script.text)
    return EXIT_NO_ATTACK


def cmd_oracle(args) -> int:
    spec, scenario = _load_inputs(args.protocol, args.scenario)
    if args.depth is not None and args.depth < 1:
        raise UsageError("--depth must be >= 1")
    model = build_model(spec, scenario, k=args.sessions)
    depth = args.depth or default_max_bound(model)
    result = explicit_reach(model, spec.goal, depth)
    if result.outcome == "no-attack-up-to":
        print(f"no attack up to depth {result.depth}")
        return EXIT_NO_ATTACK
    return _report_attack(result.trace, model, args.format, args.out, "oracle")


def cmd_list(args) -> int:
    for entry in library.entries().values():
        print(f"{entry.name}: scenarios {', '.join(sorted(entry.scenarios))}")
        if entry.notes:
            for line in entry.notes.splitlines():
                print(f"    {line}")
    if args.export:
        written = library.export(args.export)
        print(f"exported {len(written)} files to {args.export}")
    return EXIT_NO_ATTACK


def cmd_dump_model(args) -> int:
    spec, scenario = _load_inputs(args.protocol, args.scenario)
    model = build_model(spec, scenario, k=args.sessions)
    json.dump(model_to_json(model), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_NO_ATTACK


def _add_io_args(p, with_bound_controls=False):
    p.add_argument("protocol", help="protocol file path or library entry name")
    p.add_argument("scenario", help="scenario JSON path or library scenario name")
    p.add_argument("--sessions", type=int, default=None, metavar="K",
                   help="session count (default: scenario's 'sessions')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tspbmc",
        description="Bounded model checking of timed security protocols via SMT.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run the full BMC pipeline")
    _add_io_args(p)
    p.add_argument("--max-bound", type=int, default=None, metavar="N",
                   help="bound cap (default: 2 x exec-step count)")
    p.add_argument("--solver", default=None, metavar="CMD",
                   help="solver command (default: $TSPBMC_SOLVER, z3 -in, "
                        "or the bundled fallback)")
    p.add_argument("--timeout", type=float, default=60.0, metavar="S",
                   help="per-bound solver timeout in seconds")
    p.add_argument("--eavesdrop", action=argparse.BooleanOptionalAction,
                   default=None, help="override the scenario's eavesdrop flag")
    p.add_argument("--format", choices=sorted(_RENDERERS), default="text")
    p.add_argument("--out", default=None, metavar="PATH",
                   help="write the witness report to PATH")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("encode", help="emit the SMT-LIB2 script for one bound")
    _add_io_args(p)
    p.add_argument("--bound", type=int, required=True, metavar="N")
    p.add_argument("--out", default=None, metavar="PATH")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("oracle", help="explicit-state search (ground truth)")
    _add_io_args(p)
    p.add_argument("--depth", type=int, default=None, metavar="N",
                   help="search depth cap (default: 2 x exec-step count)")
    p.add_argument("--format", choices=sorted(_RENDERERS), default="text")
    p.add_argument("--out", default=None, metavar="PATH")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("list", help="list the embedded library")
    p.add_argument("--export", default=None, metavar="DIR",
                   help="also write all library files under DIR")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("dump-model", help="emit the verification model as JSON")
    _add_io_args(p)
    p.set_defaults(func=cmd_dump_model)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UsageError, TspbmcError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
