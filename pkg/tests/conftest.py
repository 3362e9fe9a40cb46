import sys

import pytest

from tspbmc import build_model, library, parse_protocol, parse_scenario
from tspbmc.solver import SolverConfig

# the bundled solver keeps the suite hermetic regardless of what's on PATH
BUNDLED = (sys.executable, "-m", "tspbmc.smtlite")


@pytest.fixture(scope="session")
def lib():
    return library.entries()


def load(lib, protocol: str, scenario: str):
    entry = lib[protocol]
    return (parse_protocol(entry.protocol),
            parse_scenario(entry.scenarios[scenario]))


def model_of(lib, protocol: str, scenario: str, k=None):
    spec, scen = load(lib, protocol, scenario)
    return build_model(spec, scen, k=k)


def solver_config(**kw) -> SolverConfig:
    kw.setdefault("command", BUNDLED)
    kw.setdefault("timeout", 120.0)
    return SolverConfig(**kw)
