import io
import subprocess
import sys
from fractions import Fraction

from tspbmc.sexpr import parse_all, parse_one, parse_value, read_sexpr, render_value


def run_script(text: str) -> list:
    proc = subprocess.run(
        [sys.executable, "-m", "tspbmc.smtlite"],
        input=text, capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout.strip().splitlines()


def model_values(reply_line: str) -> dict:
    return {entry[0]: parse_value(entry[1]) for entry in parse_one(reply_line)}


def test_trivial_sat_and_model():
    out = run_script(
        "(set-logic QF_LRA)(declare-const x Bool)(assert x)(check-sat)"
        "(get-value (x))")
    assert out[0] == "sat"
    assert model_values(out[1]) == {"x": True}


def test_trivial_unsat():
    out = run_script(
        "(declare-const x Bool)(assert (and x (not x)))(check-sat)")
    assert out == ["unsat"]


def test_difference_logic_sat_with_exact_rationals():
    out = run_script(
        "(set-logic QF_LRA)\n"
        "(declare-const x Real)(declare-const y Real)\n"
        "(assert (>= x (/ 7.0 2.0)))\n"
        "(assert (>= y (+ x 2.0)))\n"
        "(assert (<= y 6.0))\n"
        "(check-sat)\n(get-value (x y))\n")
    assert out[0] == "sat"
    vals = model_values(out[1])
    assert vals["x"] >= Fraction(7, 2)
    assert vals["y"] >= vals["x"] + 2
    assert vals["y"] <= 6


def test_strict_inequalities():
    out = run_script(
        "(declare-const x Real)(declare-const y Real)\n"
        "(assert (< x y))(assert (< y x))(check-sat)")
    assert out == ["unsat"]
    out = run_script(
        "(declare-const x Real)(declare-const y Real)(declare-const z Real)\n"
        "(assert (< x y))(assert (< y z))(assert (<= z (+ x 1.0)))\n"
        "(check-sat)(get-value (x y z))")
    assert out[0] == "sat"
    vals = model_values(out[1])
    assert vals["x"] < vals["y"] < vals["z"] <= vals["x"] + 1


def test_equality_over_reals():
    out = run_script(
        "(declare-const t Real)(declare-const tau Real)(declare-const f Bool)\n"
        "(assert f)(assert (=> f (= t tau)))(assert (= tau 3.0))\n"
        "(check-sat)(get-value (t tau))")
    assert out[0] == "sat"
    vals = model_values(out[1])
    assert vals["t"] == vals["tau"] == 3


def test_negated_theory_atom_is_enforced():
    # (not (<= x 5)) must force x > 5
    out = run_script(
        "(declare-const x Real)\n"
        "(assert (not (<= x 5.0)))(assert (<= x 10.0))\n"
        "(check-sat)(get-value (x))")
    assert out[0] == "sat"
    assert model_values(out[1])["x"] > 5
    out = run_script(
        "(declare-const x Real)\n"
        "(assert (not (<= x 5.0)))(assert (<= x 5.0))(check-sat)")
    assert out == ["unsat"]


def test_boolean_structure():
    out = run_script(
        "(declare-const a Bool)(declare-const b Bool)(declare-const c Bool)\n"
        "(assert (= a (or b c)))(assert (not b))(assert (not c))(assert a)\n"
        "(check-sat)")
    assert out == ["unsat"]
    out = run_script(
        "(declare-const a Bool)(declare-const b Bool)\n"
        "(assert (=> a b))(assert a)(check-sat)(get-value (a b))")
    assert out[0] == "sat"
    assert model_values(out[1]) == {"a": True, "b": True}


def test_theory_propagation_through_booleans():
    # choosing p forces an infeasible timing; the solver must flip to q
    out = run_script(
        "(declare-const p Bool)(declare-const q Bool)\n"
        "(declare-const x Real)\n"
        "(assert (or p q))\n"
        "(assert (=> p (and (<= x 1.0) (>= x 2.0))))\n"
        "(assert (=> q (= x 7.0)))\n"
        "(assert (or (not p) (not q)))\n"
        "(check-sat)(get-value (p q x))")
    assert out[0] == "sat"
    vals = model_values(out[1])
    assert vals == {"p": False, "q": True, "x": 7}


def test_error_reply_keeps_pipe_alive():
    out = run_script(
        "(frobnicate)\n(declare-const x Bool)(assert x)(check-sat)")
    assert out[0].startswith("(error")
    assert out[-1] == "sat"


def test_get_value_before_check_is_error():
    out = run_script("(declare-const x Bool)(get-value (x))")
    assert out[0].startswith("(error")


# ---- sexpr helpers ----------------------------------------------------------


def test_parse_value_rational_forms():
    for text, expected in [
        ("5", Fraction(5)), ("5.0", Fraction(5)), ("0.25", Fraction(1, 4)),
        ("(/ 7.0 2.0)", Fraction(7, 2)), ("(- 3.0)", Fraction(-3)),
        ("(- (/ 1.0 3.0))", Fraction(-1, 3)), ("true", True), ("false", False),
    ]:
        assert parse_value(parse_one(text)) == expected


def test_render_parse_value_round_trip():
    grid = [Fraction(n, d) for n in range(-8, 9) for d in range(1, 7)]
    for q in grid:
        assert parse_value(parse_one(render_value(q))) == q
    assert parse_value(parse_one(render_value(True))) is True


def test_read_sexpr_stream():
    stream = io.StringIO("sat\n((x 1.0) (y (/ 1.0 2.0)))\n")
    assert read_sexpr(stream) == "sat"
    assert parse_one(read_sexpr(stream)) == [["x", "1.0"], ["y", ["/", "1.0", "2.0"]]]


def test_parse_all_comments_and_strings():
    exprs = parse_all('(echo "hi there") ; comment (ignored)\n(check-sat)')
    assert exprs == [["echo", '"hi there"'], ["check-sat"]]
