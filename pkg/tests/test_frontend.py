import json
from fractions import Fraction

import pytest

from tspbmc import apply_overrides, parse_protocol, parse_scenario, parse_term
from tspbmc.errors import ProtocolError, ScenarioError
from tspbmc.frontend import compute_generation, effective_require_complete

NSPK = """
name: NSPK_T
roles: A B
fresh: Ta by A class nonce lifetime 10
fresh: Tb by B class nonce lifetime 10
goal: secrecy Tb sid any
complete: 1
step 1: A -> B : <KB, Ta | A> delay 1
step 2: B -> A : <KA, Ta | Tb> delay 1
step 3: A -> B : <KB, Tb> delay 1
"""


def scenario(**kw):
    kw.setdefault("name", "s")
    kw.setdefault("overrides", [])
    return parse_scenario(json.dumps(kw))


def test_parse_protocol_basics():
    spec = parse_protocol(NSPK)
    assert spec.name == "NSPK_T"
    assert spec.roles == ("A", "B")
    assert [d.name for d in spec.fresh_decls] == ["Ta", "Tb"]
    assert spec.fresh_decls[0].lifetime == Fraction(10)
    assert spec.goal.secret == "Tb" and spec.goal.target_sid == "any"
    assert spec.goal.require_complete == frozenset({1})
    assert len(spec.steps) == 3
    assert spec.steps[0].message == parse_term("<KB,Ta|A>")
    assert spec.steps[0].min_delay == Fraction(1)


@pytest.mark.parametrize("mutation,needle", [
    (lambda t: t.replace("roles: A B", "roles: A I"), "reserved"),
    (lambda t: t.replace("step 2", "step 5"), "gap"),
    (lambda t: t.replace("goal: secrecy Tb sid any", "goal: secrecy Tx sid any"),
     "not a declared"),
    (lambda t: t.replace("fresh: Tb by B", "fresh: Tb by A"), "owner"),
    (lambda t: t.replace("class nonce", "class magic"), "class"),
    (lambda t: t.replace("name: NSPK_T\n", ""), "name"),
    (lambda t: t.replace("delay 1", "delay -1", 1), "delay"),
    (lambda t: t.replace("A -> B : <KB, Ta | A>", "A -> A : <KB, Ta | A>"),
     "differ"),
])
def test_parse_protocol_rejects(mutation, needle):
    with pytest.raises(ProtocolError) as e:
        parse_protocol(mutation(NSPK))
    assert needle in str(e.value)


def test_lifetime_none_means_unbounded():
    spec = parse_protocol(NSPK.replace("Ta by A class nonce lifetime 10",
                                       "Ta by A class nonce lifetime none"))
    assert spec.decl_map()["Ta"].lifetime is None


def test_sesskey_required_for_fresh_cipher_keys():
    text = NSPK.replace("<KB, Tb>", "<Ta, Tb>")
    with pytest.raises(ProtocolError) as e:
        parse_protocol(text)
    assert "session key" in str(e.value)


def test_parse_scenario_listing_shape():
    scen = parse_scenario(json.dumps({
        "name": "mitm1_lowe",
        "sessions": 2,
        "overrides": [
            {"sid": 1, "step": 1, "kind": "replace", "edge": "A->I",
             "L": "<KB,Ta#1|A>"},
            {"sid": 1, "step": 2, "kind": "intruder", "edge": "I->A",
             "L": "<KA,Ta#1|Tb#1>"},
            {"sid": 1, "step": 3, "kind": "replace", "edge": "A->I",
             "L": "<KB,Tb#1>"},
            {"sid": 2, "step": 1, "kind": "intruder", "edge": "I->B",
             "L": "<KB,Ta#1|A>"},
        ],
    }))
    assert scen.name == "mitm1_lowe"
    assert scen.sessions == 2
    assert len(scen.overrides) == 4
    ov = scen.overrides[0]
    assert (ov.kind, ov.edge) == ("replace", ("A", "I"))
    assert ov.message == parse_term("<KB,Ta#1|A>")


@pytest.mark.parametrize("bad", [
    {"overrides": []},  # missing name
    {"name": "x", "overrides": [], "bogus": 1},
    {"name": "x", "overrides": [{"sid": 1, "step": 1, "kind": "mystery"}]},
    {"name": "x", "overrides": [
        {"sid": 1, "step": 1, "kind": "replace", "edge": "I->A", "L": "A"}]},
    {"name": "x", "overrides": [
        {"sid": 1, "step": 1, "kind": "intruder", "edge": "A->B", "L": "A"}]},
    {"name": "x", "overrides": [
        {"sid": 1, "step": 1, "kind": "retime", "delay": 1},
        {"sid": 1, "step": 1, "kind": "retime", "delay": 2}]},
    {"name": "x", "overrides": [{"sid": 1, "step": 1, "kind": "retime"}]},
    {"name": "x", "overrides": [
        {"sid": 0, "step": 1, "kind": "retime", "delay": 1}]},
    {"name": "x", "overrides": [], "sessions": 0},
])
def test_parse_scenario_rejects(bad):
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps(bad))


def test_apply_overrides_replicates_and_instantiates():
    spec = parse_protocol(NSPK)
    steps = apply_overrides(spec, scenario(sessions=2), 2)
    assert [(s.sid, s.index) for s in steps] == [
        (1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]
    assert steps[3].message == parse_term("<KB,Ta#2|A>")
    assert not any(s.gated for s in steps)


def test_apply_overrides_substitution_and_gating():
    spec = parse_protocol(NSPK)
    scen = scenario(overrides=[
        {"sid": 1, "step": 2, "kind": "intruder", "edge": "I->A",
         "L": "<KA,Ta#1|Tb#1>"},
        {"sid": 1, "step": 3, "kind": "retime", "delay": "7/2"},
    ])
    steps = apply_overrides(spec, scen, 1)
    assert steps[1].sender == "I" and steps[1].gated
    assert steps[2].min_delay == Fraction(7, 2)


def test_apply_overrides_out_of_range():
    spec = parse_protocol(NSPK)
    scen = scenario(overrides=[
        {"sid": 2, "step": 1, "kind": "retime", "delay": 1}])
    with pytest.raises(ScenarioError):
        apply_overrides(spec, scen, 1)


def test_generation_and_lifetime_checks():
    spec = parse_protocol(NSPK)
    steps = apply_overrides(spec, scenario(), 1)
    gen = compute_generation(steps, spec.decl_map())
    assert gen[parse_term("Ta#1")].ref == (1, 1)
    assert gen[parse_term("Tb#1")].ref == (1, 2)
    # Ta#1 is used (not generated) at step 2; Tb#1 at step 3
    assert [(c.term, c.bound) for c in steps[1].lifetime_checks] == [
        (parse_term("Ta#1"), Fraction(10))]
    assert [(c.term, c.bound) for c in steps[2].lifetime_checks] == [
        (parse_term("Tb#1"), Fraction(10))]
    assert steps[0].lifetime_checks == ()


def test_lifetime_override_rebinds_single_step():
    spec = parse_protocol(NSPK)
    scen = scenario(overrides=[
        {"sid": 1, "step": 2, "kind": "retime", "lifetime": {"Ta": 99}}])
    steps = apply_overrides(spec, scen, 1)
    assert steps[1].lifetime_checks[0].bound == Fraction(99)
    assert steps[2].lifetime_checks[0].bound == Fraction(10)


def test_generation_falls_back_when_owner_send_overridden():
    spec = parse_protocol(NSPK)
    scen = scenario(overrides=[
        {"sid": 1, "step": 1, "kind": "intruder", "edge": "I->B",
         "L": "<KB,Ta#1|A>"}])
    steps = apply_overrides(spec, scen, 1)
    gen = compute_generation(steps, spec.decl_map())
    assert gen[parse_term("Ta#1")].ref == (1, 1)  # first-containing fallback


def test_effective_require_complete_default_and_explicit():
    spec = parse_protocol(NSPK)
    steps = apply_overrides(spec, scenario(sessions=2), 2)
    assert effective_require_complete(spec, steps, 2) == frozenset({1})
    no_complete = parse_protocol(NSPK.replace("complete: 1\n", ""))
    assert effective_require_complete(no_complete, steps, 2) == frozenset({1, 2})
