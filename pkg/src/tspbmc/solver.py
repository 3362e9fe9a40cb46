"""External SMT solver driver and bound-deepening loop.

Each bound gets a fresh script and a fresh child process (no incremental
push/pop), so any SMT-LIB2-compliant binary works. The child protocol is:
write the script, read the ``(check-sat)`` reply line, and on ``sat`` send
one ``(get-value ...)`` for every declared symbol.

Solver resolution order: explicit ``--solver`` command, the
``TSPBMC_SOLVER`` environment variable, ``z3 -in`` if z3 is on PATH, and
finally the bundled fallback solver (``python -m tspbmc.smtlite``).
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from .encoder import BmcProblem, SmtScript, encode
from .errors import SolverError
from .model import TiisModel
from .sexpr import parse_one, parse_value, read_sexpr

DEFAULT_TIMEOUT = 60.0


@dataclass(frozen=True)
class SolverConfig:
    command: tuple = ()  # empty -> resolve automatically
    timeout: float = DEFAULT_TIMEOUT  # seconds per bound
    max_bound: Optional[int] = None  # default: 2 x total exec-step count

    def __post_init__(self):
        if self.timeout <= 0:
            raise SolverError("timeout must be positive")
        if self.max_bound is not None and self.max_bound < 1:
            raise SolverError("max_bound must be >= 1")


@dataclass(frozen=True)
class RawResult:
    status: str  # sat | unsat | unknown | timeout | error
    values: dict = field(default_factory=dict)  # symbol -> bool | Fraction
    solver_stderr: str = ""
    elapsed: float = 0.0


@dataclass(frozen=True)
class Verdict:
    outcome: str  # attack-found | no-attack-up-to | inconclusive
    bound: int  # sat bound, or the bound cap / offending bound
    result: Optional[RawResult] = None
    reason: str = ""
    per_bound_log: tuple = ()  # (bound, status, wall seconds)


def resolve_solver_command(explicit: Optional[str] = None) -> tuple:
    """Pick the solver command line; see module docstring for the order."""
    for source in (explicit, os.environ.get("TSPBMC_SOLVER")):
        if source:
            parts = tuple(shlex.split(source))
            if not parts:
                raise SolverError("empty solver command")
            return parts
    z3 = shutil.which("z3")
    if z3:
        return (z3, "-in")
    return (sys.executable, "-m", "tspbmc.smtlite")


def _interact(proc, script: SmtScript, box: dict):
    """Child interaction, run on a worker thread so timeouts can kill it."""
    try:
        proc.stdin.write(script.text)
        proc.stdin.flush()
        status = None
        errors = []
        while status is None:
            line = proc.stdout.readline()
            if line == "":
                raise SolverError("solver closed its output before answering")
            line = line.strip()
            if line in ("sat", "unsat", "unknown"):
                status = line
            elif line:
                errors.append(line)
                if len(errors) > 200:
                    raise SolverError("solver never answered check-sat")
        if errors and status is None:
            raise SolverError("; ".join(errors))
        values = {}
        if status == "sat":
            names = sorted(script.var_index)
            proc.stdin.write("(get-value (" + " ".join(names) + "))\n(exit)\n")
            proc.stdin.flush()
            reply = parse_one(read_sexpr(proc.stdout))
            if not isinstance(reply, list):
                raise SolverError(f"unexpected get-value reply: {reply!r}")
            for entry in reply:
                if not (isinstance(entry, list) and len(entry) == 2):
                    raise SolverError(f"malformed model binding: {entry!r}")
                values[entry[0]] = parse_value(entry[1])
            missing = set(names) - set(values)
            if missing:
                raise SolverError(f"model is missing symbols: {sorted(missing)[:5]}")
        else:
            proc.stdin.write("(exit)\n")
            proc.stdin.flush()
        proc.stdin.close()
        box["status"] = status
        box["values"] = values
        box["notes"] = errors
    except (OSError, ValueError, EOFError, SolverError) as e:
        box["exception"] = e


def run_solver(script: SmtScript, config: SolverConfig) -> RawResult:
    command = config.command or resolve_solver_command()
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except OSError as e:
        raise SolverError(f"cannot spawn solver {command!r}: {e}") from e

    box: dict = {}
    worker = threading.Thread(target=_interact, args=(proc, script, box), daemon=True)
    worker.start()
    worker.join(config.timeout)
    timed_out = worker.is_alive()
    if timed_out:
        proc.kill()
        worker.join(5.0)
    try:
        stderr = proc.stderr.read()
    except (OSError, ValueError):
        stderr = ""
    proc.wait()
    elapsed = time.monotonic() - start

    if timed_out:
        return RawResult("timeout", {}, stderr, elapsed)
    if "exception" in box:
        return RawResult("error", {}, f"{box['exception']}\n{stderr}".strip(), elapsed)
    notes = "\n".join(box.get("notes", []))
    if notes:
        stderr = f"{notes}\n{stderr}".strip()
    return RawResult(box["status"], box.get("values", {}), stderr, elapsed)


def default_max_bound(model: TiisModel) -> int:
    return 2 * len(model.exec_steps)


def iterate_bounds(model: TiisModel, goal=None, config: Optional[SolverConfig] = None) -> Verdict:
    """Linear bound deepening n = 1..max_bound; stop at the first sat.

    ``goal`` is accepted for interface symmetry; the reachability goal is
    already baked into the model.
    """
    config = config or SolverConfig()
    max_bound = config.max_bound or default_max_bound(model)
    log = []
    for n in range(1, max_bound + 1):
        script = encode(BmcProblem(model, n))
        result = run_solver(script, config)
        log.append((n, result.status, result.elapsed))
        if result.status == "sat":
            return Verdict("attack-found", n, result, per_bound_log=tuple(log))
        if result.status == "unsat":
            continue
        reason = f"solver returned {result.status} at bound {n}"
        if result.solver_stderr:
            reason += f": {result.solver_stderr.splitlines()[0]}"
        return Verdict("inconclusive", n, result, reason, tuple(log))
    return Verdict("no-attack-up-to", max_bound, per_bound_log=tuple(log))
