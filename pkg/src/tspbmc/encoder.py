"""Bounded-reachability encoding to SMT-LIB2 (QF_LRA).

One global transition fires per position j in 1..n. Boolean state tracks
which session steps have fired (``done``) and what every agent can derive
(``k`` knowledge bits, stratified into 2D parallel derivation rounds per
position). Real variables carry per-step fire times
bound to a non-decreasing position clock, with minimum-delay and lifetime
difference constraints. The goal EF(psi) is a disjunction over positions
of "required sessions complete and the intruder knows a secret instance".

Symbol scheme (a stable contract consumed by the decoder)::

    fire_<j>_<sid>_<i>   Bool   step (sid,i) fires at position j
    done_<j>_<sid>_<i>   Bool   step (sid,i) has fired at or before j
    t_<sid>_<i>          Real   fire time of step (sid,i)
    tau_<j>              Real   time at position j
    k_<agent>_<tid>_<j>_<d>  Bool  agent knows universe term tid at
                                    position j, derivation stratum d
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .frontend import INTRUDER
from .model import TiisModel
from .terms import Cipher, Pair, Term


@dataclass(frozen=True)
class BmcProblem:
    model: TiisModel
    bound: int  # number of global transitions, >= 1

    def __post_init__(self):
        if self.bound < 1:
            raise ValueError("bound must be >= 1")


@dataclass(frozen=True)
class SmtScript:
    text: str
    var_index: dict  # symbol name -> sort ("Bool" | "Real")
    goal_positions: tuple
    bound: int


def fire_name(j: int, sid: int, i: int) -> str:
    return f"fire_{j}_{sid}_{i}"


def done_name(j: int, sid: int, i: int) -> str:
    return f"done_{j}_{sid}_{i}"


def t_name(sid: int, i: int) -> str:
    return f"t_{sid}_{i}"


def tau_name(j: int) -> str:
    return f"tau_{j}"


def k_name(agent: str, tid: int, j: int, d: int) -> str:
    return f"k_{agent}_{tid}_{j}_{d}"


def smt_num(q: Fraction) -> str:
    if q < 0:
        return f"(- {smt_num(-q)})"
    if q.denominator == 1:
        return f"{q.numerator}.0"
    return f"(/ {q.numerator}.0 {q.denominator}.0)"


def _and(parts):
    parts = list(parts)
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"


def _or(parts):
    parts = list(parts)
    if not parts:
        return "false"
    if len(parts) == 1:
        return parts[0]
    return "(or " + " ".join(parts) + ")"


def constructible_formula(model: TiisModel, t: Term, knows) -> str:
    """Unfold the constructibility recursion into a formula over knowledge
    literals; ``knows(tid)`` names the literal for a universe term id."""
    whole = knows(model.universe.id_of(t))
    if isinstance(t, Pair):
        return _or([whole, _and([
            constructible_formula(model, t.left, knows),
            constructible_formula(model, t.right, knows),
        ])])
    if isinstance(t, Cipher):
        return _or([whole, _and([
            constructible_formula(model, t.key, knows),
            constructible_formula(model, t.body, knows),
        ])])
    return whole


def goal_formula(model: TiisModel, j: int) -> str:
    """psi_j: required sessions complete at j and a secret known at j."""
    last = model.steps_per_session()
    parts = [done_name(j, sid, last) for sid in sorted(model.require_complete)]
    strata = 2 * model.depth
    parts.append(_or([k_name(INTRUDER, tid, j, strata) for tid in model.goal_secret_ids]))
    return _and(parts)


def encode(problem: BmcProblem) -> SmtScript:
    model = problem.model
    n = problem.bound
    universe = model.universe
    strata = 2 * model.depth
    steps = sorted(model.exec_steps, key=lambda s: (s.sid, s.index))
    agents = model.agents

    var_index: dict = {}
    for j in range(n + 1):
        var_index[tau_name(j)] = "Real"
        for st in steps:
            var_index[done_name(j, st.sid, st.index)] = "Bool"
            if j >= 1:
                var_index[fire_name(j, st.sid, st.index)] = "Bool"
        for a in agents:
            for tid in range(len(universe)):
                for d in range(strata + 1):
                    var_index[k_name(a, tid, j, d)] = "Bool"
    for st in steps:
        var_index[t_name(st.sid, st.index)] = "Real"

    lines = ["(set-logic QF_LRA)"]
    lines.append("; declarations")
    for name in sorted(var_index):
        lines.append(f"(declare-const {name} {var_index[name]})")

    def assert_(f: str):
        lines.append(f"(assert {f})")

    # interleaving: exactly one step fires per position; session-local order
    lines.append("; interleaving")
    for st in steps:
        assert_(f"(not {done_name(0, st.sid, st.index)})")
    for j in range(1, n + 1):
        fires = [fire_name(j, st.sid, st.index) for st in steps]
        assert_(_or(fires))
        for x in range(len(fires)):
            for y in range(x + 1, len(fires)):
                assert_(f"(or (not {fires[x]}) (not {fires[y]}))")
        for st in steps:
            f = fire_name(j, st.sid, st.index)
            d = done_name(j, st.sid, st.index)
            dprev = done_name(j - 1, st.sid, st.index)
            assert_(f"(= {d} (or {dprev} {f}))")
            guards = [f"(not {dprev})"]
            if st.index > 1:
                guards.insert(0, done_name(j - 1, st.sid, st.index - 1))
            assert_(f"(=> {f} {_and(guards)})")

    # time: non-decreasing position clock, fire-time binding, minimum delays
    lines.append("; time")
    assert_(f"(= {tau_name(0)} 0.0)")
    for j in range(1, n + 1):
        assert_(f"(>= {tau_name(j)} {tau_name(j - 1)})")
        for st in steps:
            assert_(
                f"(=> {fire_name(j, st.sid, st.index)} "
                f"(= {t_name(st.sid, st.index)} {tau_name(j)}))"
            )
    for st in steps:
        if st.index > 1:
            assert_(
                f"(>= {t_name(st.sid, st.index)} "
                f"(+ {t_name(st.sid, st.index - 1)} {smt_num(st.min_delay)}))"
            )
        else:
            assert_(f"(>= {t_name(st.sid, st.index)} {smt_num(st.min_delay)})")

    # lifetimes: a fired step that uses a bounded fresh term must fall
    # within the bound after the term's generation step
    lines.append("; lifetimes")
    for st in steps:
        for check in st.lifetime_checks:
            gen = model.generation[check.term]
            assert_(
                f"(=> {done_name(n, st.sid, st.index)} "
                f"(<= {t_name(st.sid, st.index)} "
                f"(+ {t_name(gen.sid, gen.index)} {smt_num(check.bound)})))"
            )

    # knowledge: stratum 0 carries over and absorbs received message roots;
    # strata 1..2D each apply one parallel round of all derivation rules
    # (depth is chosen by build_model so 2D rounds reach the fixpoint)
    lines.append("; knowledge")
    rules_for = {}
    for r in model.rules:
        rules_for.setdefault(r.conclusion, []).append(r)

    for a in agents:
        for tid in range(len(universe)):
            init = "true" if tid in model.initial_knowledge[a] else "false"
            assert_(f"(= {k_name(a, tid, 0, 0)} {init})")

    for j in range(n + 1):
        for a in agents:
            for tid in range(len(universe)):
                if j >= 1:
                    gains = [
                        fire_name(j, st.sid, st.index)
                        for st in steps
                        if universe.id_of(st.message) == tid
                        and (a == st.receiver or (a == INTRUDER and model.eavesdrop))
                    ]
                    carry = k_name(a, tid, j - 1, strata)
                    assert_(f"(= {k_name(a, tid, j, 0)} {_or([carry] + gains)})")
                for d in range(1, strata + 1):
                    derive = [
                        _and([k_name(a, p, j, d - 1) for p in r.premises])
                        for r in rules_for.get(tid, [])
                    ]
                    assert_(
                        f"(= {k_name(a, tid, j, d)} "
                        f"{_or([k_name(a, tid, j, d - 1)] + derive)})"
                    )

    # gating: intruder-sent steps require constructibility at the prior position
    lines.append("; gating")
    for st in steps:
        if not st.gated:
            continue
        for j in range(1, n + 1):
            cond = constructible_formula(
                model, st.message, lambda tid, j=j: k_name(INTRUDER, tid, j - 1, strata)
            )
            assert_(f"(=> {fire_name(j, st.sid, st.index)} {cond})")

    # goal: EF(psi) as a disjunction over positions
    lines.append("; goal")
    goal_positions = tuple(range(1, n + 1))
    assert_(_or([goal_formula(model, j) for j in goal_positions]))

    lines.append("(check-sat)")
    return SmtScript("\n".join(lines) + "\n", var_index, goal_positions, n)
