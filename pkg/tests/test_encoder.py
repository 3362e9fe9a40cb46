import re
from fractions import Fraction

import pytest

from tspbmc import BmcProblem, encode
from tspbmc.encoder import smt_num
from tspbmc.frontend import INTRUDER

from conftest import model_of, solver_config
from tspbmc.solver import run_solver


def test_bound_must_be_positive(lib):
    model = model_of(lib, "nspkt", "fair")
    with pytest.raises(ValueError):
        BmcProblem(model, 0)


def test_determinism(lib):
    model = model_of(lib, "nspkt", "mitm1_lowe")
    a = encode(BmcProblem(model, 4)).text
    b = encode(BmcProblem(model_of(lib, "nspkt", "mitm1_lowe"), 4)).text
    assert a == b


def test_symbol_scheme_and_counts(lib):
    model = model_of(lib, "nspkt", "fair")
    script = encode(BmcProblem(model, 3))
    fires = [n for n in script.var_index if n.startswith("fire_")]
    assert len(fires) == 9  # 3 positions x 3 steps
    assert script.var_index["fire_1_1_1"] == "Bool"
    assert script.var_index["t_1_2"] == "Real"
    assert script.var_index["tau_0"] == "Real"
    strata = 2 * model.depth
    assert f"k_I_0_3_{strata}" in script.var_index
    assert script.goal_positions == (1, 2, 3)
    assert script.text.startswith("(set-logic QF_LRA)")
    assert script.text.rstrip().endswith("(check-sat)")


def test_fixed_section_order(lib):
    text = encode(BmcProblem(model_of(lib, "nspkt", "fair"), 2)).text
    sections = [m for m in re.findall(r"^; (.+)$", text, re.M)]
    assert sections == ["declarations", "interleaving", "time", "lifetimes",
                        "knowledge", "gating", "goal"]


def test_declarations_sorted(lib):
    text = encode(BmcProblem(model_of(lib, "nspkt", "fair"), 2)).text
    names = re.findall(r"\(declare-const (\S+) ", text)
    assert names == sorted(names)


def test_gating_only_for_intruder_steps(lib):
    model = model_of(lib, "nspkt", "mitm1_lowe")
    text = encode(BmcProblem(model, 2)).text
    gating = text.split("; gating")[1].split("; goal")[0]
    gated_refs = {(st.sid, st.index) for st in model.exec_steps if st.gated}
    assert gated_refs == {(1, 2), (2, 1), (2, 3)}
    for sid, i in gated_refs:
        assert f"fire_1_{sid}_{i}" in gating
    for st in model.exec_steps:
        if not st.gated:
            assert f"(=> fire_1_{st.sid}_{st.index} " not in gating


def test_goal_formula_disjunction_over_instances(lib):
    model = model_of(lib, "dsp", "key_compromise", k=2)
    text = encode(BmcProblem(model, 2)).text
    goal = text.split("; goal")[1]
    strata = 2 * model.depth
    import tspbmc
    kab1 = model.universe.id_of(tspbmc.parse_term("Kab#1"))
    kab2 = model.universe.id_of(tspbmc.parse_term("Kab#2"))
    assert f"k_I_{kab1}_1_{strata}" in goal
    assert f"k_I_{kab2}_1_{strata}" in goal


def test_lifetime_section(lib):
    model = model_of(lib, "nspkt", "fair")
    text = encode(BmcProblem(model, 3)).text
    lifetimes = text.split("; lifetimes")[1].split("; knowledge")[0]
    # Ta#1 used at (1,2), generated at (1,1), bound 10
    assert "(=> done_3_1_2 (<= t_1_2 (+ t_1_1 10.0)))" in lifetimes


def test_smt_num_forms():
    assert smt_num(Fraction(3)) == "3.0"
    assert smt_num(Fraction(-3)) == "(- 3.0)"
    assert smt_num(Fraction(7, 2)) == "(/ 7.0 2.0)"
    assert smt_num(Fraction(-7, 2)) == "(- (/ 7.0 2.0))"


def test_bound_one_pigeonhole_unsat(lib):
    # completing a >1-step session within one transition is impossible
    model = model_of(lib, "nspkt", "fair")
    result = run_solver(encode(BmcProblem(model, 1)), solver_config())
    assert result.status == "unsat"


def test_eavesdrop_off_removes_intruder_taps(lib):
    from tspbmc import build_model
    from conftest import load
    spec, scen = load(lib, "nspkt", "fair")
    on = encode(BmcProblem(build_model(spec, scen, eavesdrop=True), 1)).text
    off = encode(BmcProblem(build_model(spec, scen, eavesdrop=False), 1)).text

    def gains(text):
        m = re.search(r"\(= k_I_(\d+)_1_0 \(or k_I_\1_0_\d+ fire", text)
        return m is not None

    assert gains(on) and not gains(off)


def test_bound_monotonicity_on_attack_instance(lib):
    # once sat, larger bounds stay sat (EF disjunction only grows) as long
    # as unfired steps remain: with no stutter action, every position must
    # fire some step, so bounds beyond the total step count are vacuous
    model = model_of(lib, "nspkt", "mitm1_lowe")
    for n in (5, 6):
        result = run_solver(encode(BmcProblem(model, n)), solver_config())
        assert result.status == "sat", n
    # and the vacuous tail bound is indeed unsat (documented caveat)
    small = model_of(lib, "dsp", "key_compromise")
    result = run_solver(encode(BmcProblem(small, 4)), solver_config())
    assert result.status == "unsat"
