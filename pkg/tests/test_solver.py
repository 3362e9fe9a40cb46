import sys

import pytest

from tspbmc import BmcProblem, encode
from tspbmc.encoder import SmtScript
from tspbmc.errors import SolverError
from tspbmc.solver import (
    SolverConfig,
    default_max_bound,
    iterate_bounds,
    resolve_solver_command,
    run_solver,
)

from conftest import BUNDLED, model_of, solver_config


def script_of(text: str, names: dict) -> SmtScript:
    return SmtScript(text, names, (), 1)


def test_run_solver_trivial_sat():
    script = script_of(
        "(set-logic QF_LRA)(declare-const x Bool)(assert x)(check-sat)\n",
        {"x": "Bool"})
    result = run_solver(script, solver_config())
    assert result.status == "sat"
    assert result.values == {"x": True}


def test_run_solver_trivial_unsat():
    script = script_of(
        "(declare-const x Bool)(assert (and x (not x)))(check-sat)\n",
        {"x": "Bool"})
    result = run_solver(script, solver_config())
    assert result.status == "unsat"
    assert result.values == {}


def test_run_solver_missing_binary():
    with pytest.raises(SolverError):
        run_solver(script_of("(check-sat)\n", {}),
                   solver_config(command=("/nonexistent/solver-xyz",)))


def test_run_solver_timeout():
    cfg = solver_config(command=(sys.executable, "-c", "import time; time.sleep(60)"),
                        timeout=0.5)
    result = run_solver(script_of("(check-sat)\n", {}), cfg)
    assert result.status == "timeout"


def test_run_solver_garbage_output():
    cfg = solver_config(command=(sys.executable, "-c", "print('hello'); exit()"))
    result = run_solver(script_of("(check-sat)\n", {}), cfg)
    assert result.status == "error"


def test_config_validation():
    with pytest.raises(SolverError):
        SolverConfig(timeout=0)
    with pytest.raises(SolverError):
        SolverConfig(max_bound=0)


def test_resolve_solver_command(monkeypatch):
    assert resolve_solver_command("mysolver --flag") == ("mysolver", "--flag")
    monkeypatch.setenv("TSPBMC_SOLVER", "envsolver -in")
    assert resolve_solver_command() == ("envsolver", "-in")
    monkeypatch.delenv("TSPBMC_SOLVER")
    monkeypatch.setattr("shutil.which", lambda name: None)
    assert resolve_solver_command() == BUNDLED
    monkeypatch.setattr("shutil.which",
                        lambda name: "/usr/bin/z3" if name == "z3" else None)
    assert resolve_solver_command() == ("/usr/bin/z3", "-in")


def test_iterate_bounds_no_attack(lib):
    model = model_of(lib, "nspkt", "fair")
    verdict = iterate_bounds(model, config=solver_config(max_bound=6))
    assert verdict.outcome == "no-attack-up-to"
    assert verdict.bound == 6
    assert [(b, s) for b, s, _ in verdict.per_bound_log] == [
        (n, "unsat") for n in range(1, 7)]


def test_iterate_bounds_attack_is_minimal(lib):
    model = model_of(lib, "nspkt", "mitm1_lowe")
    verdict = iterate_bounds(model, config=solver_config(max_bound=8))
    assert verdict.outcome == "attack-found"
    assert verdict.bound == 5
    assert [s for _, s, _ in verdict.per_bound_log] == ["unsat"] * 4 + ["sat"]
    names = sorted(encode(BmcProblem(model, 5)).var_index)
    assert sorted(verdict.result.values) == names  # sat carries all symbols


def test_iterate_bounds_inconclusive_propagates(lib):
    model = model_of(lib, "nspkt", "fair")
    cfg = solver_config(command=(sys.executable, "-c", "import time; time.sleep(60)"),
                        timeout=0.5, max_bound=2)
    verdict = iterate_bounds(model, config=cfg)
    assert verdict.outcome == "inconclusive"
    assert "timeout" in verdict.reason


def test_default_max_bound(lib):
    assert default_max_bound(model_of(lib, "nspkt", "fair")) == 6
    assert default_max_bound(model_of(lib, "nspkt", "mitm1_lowe")) == 12
