"""Verification-model construction.

Combines the instantiated execution steps with a finite term universe,
per-agent initial knowledge, compiled Dolev-Yao derivation rules and the
timing structure. The resulting TiisModel is immutable and shared by the
SMT encoder, the witness replayer and the explicit-state oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Optional

from .errors import ModelError, ScenarioError
from .frontend import (
    INTRUDER,
    ProtocolSpec,
    Scenario,
    apply_overrides,
    compute_generation,
    effective_require_complete,
)
from .terms import (
    Cipher,
    Fresh,
    Ident,
    Pair,
    PrivKey,
    PubKey,
    SymKey,
    Term,
    TermUniverse,
    inverse_key,
    is_key_form,
    parse_term,
    render_term,
    subterms,
)


@dataclass(frozen=True)
class DerivationRule:
    kind: str  # split-left | split-right | decrypt | pair | encrypt
    premises: tuple  # term ids
    conclusion: int  # term id


@dataclass(frozen=True)
class TiisModel:
    protocol: str
    scenario: str
    sessions: int
    agents: tuple  # roles + intruder
    exec_steps: tuple
    universe: TermUniverse
    rules: tuple
    depth: int  # saturation depth D = universe nesting depth
    initial_knowledge: dict  # agent -> frozenset of term ids
    generation: dict  # Fresh term -> ExecStep
    require_complete: frozenset
    goal_secret_ids: tuple  # term ids the intruder must learn (disjunction)
    eavesdrop: bool
    warnings: tuple = ()

    def steps_per_session(self) -> int:
        return max(st.index for st in self.exec_steps)

    def step_at(self, sid: int, index: int):
        for st in self.exec_steps:
            if st.sid == sid and st.index == index:
                return st
        raise KeyError((sid, index))


def build_universe(steps, roles, compromised=()) -> TermUniverse:
    """Deterministic subterm-closed universe for the given exec steps.

    Contains all step messages with their subterms, every agent identity,
    the intruder's key pair, the long-term keys implied by the messages,
    and the inverse of every key member.
    """
    members = set()
    for st in steps:
        members |= subterms(st.message)

    agents = list(roles) + [INTRUDER]
    for a in agents:
        members.add(Ident(a))
    members.add(PubKey(INTRUDER))

    if any(isinstance(t, (PubKey, PrivKey)) for t in members):
        for a in agents:
            members.add(PubKey(a))

    for text in compromised:
        key = parse_term(text)
        if not is_key_form(key):
            raise ScenarioError(f"compromised entry {text!r} is not a key")
        members.add(key)

    for t in list(members):
        if is_key_form(t):
            members.add(inverse_key(t))

    return TermUniverse(members)


def initial_knowledge(agent: str, spec: ProtocolSpec, universe: TermUniverse,
                      compromised=()) -> FrozenSet[int]:
    """Initial Dolev-Yao knowledge: identities, public keys, own secrets.

    Fresh protocol atoms are never initially known; they enter the model at
    their generation step. The intruder additionally holds any compromised
    long-term keys.
    """
    known = set()
    for t in universe:
        if isinstance(t, Ident) or isinstance(t, PubKey):
            known.add(t)
        elif isinstance(t, PrivKey) and t.agent == agent:
            known.add(t)
        elif isinstance(t, SymKey) and agent in (t.a, t.b):
            known.add(t)
    if agent == INTRUDER:
        for text in compromised:
            key = parse_term(text)
            if key in universe:
                known.add(key)
    return frozenset(universe.id_of(t) for t in known)


def compile_rules(universe: TermUniverse):
    """Instantiate the Dolev-Yao rule schemas over the universe members.

    Pairs yield split-left, split-right and pair rules; ciphers yield an
    encrypt rule and, when the inverse key is a universe member, a decrypt
    rule. Composition targets universe members only.
    """
    rules = []
    for t in universe:
        tid = universe.id_of(t)
        if isinstance(t, Pair):
            left, right = universe.id_of(t.left), universe.id_of(t.right)
            rules.append(DerivationRule("split-left", (tid,), left))
            rules.append(DerivationRule("split-right", (tid,), right))
            rules.append(DerivationRule("pair", (left, right), tid))
        elif isinstance(t, Cipher):
            key, body = universe.id_of(t.key), universe.id_of(t.body)
            inv = inverse_key(t.key)
            if inv in universe:
                rules.append(DerivationRule("decrypt", (tid, universe.id_of(inv)), body))
            rules.append(DerivationRule("encrypt", (key, body), tid))
    return tuple(rules)


DECOMPOSITION_KINDS = ("split-left", "split-right", "decrypt")
COMPOSITION_KINDS = ("pair", "encrypt")


def closure(known, rules) -> FrozenSet[int]:
    """Least fixpoint of rule application starting from ``known``."""
    out = set(known)
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.conclusion not in out and all(p in out for p in r.premises):
                out.add(r.conclusion)
                changed = True
    return frozenset(out)


def stratified_closure(known, rules, depth: int) -> FrozenSet[int]:
    """2*depth parallel rounds of rule application (all rule kinds).

    Mirrors exactly what the SMT knowledge strata compute; each round uses
    only the previous round's set, so 2*depth bounds the derivation-chain
    length the encoding can express. build_model verifies this reaches the
    unbounded fixpoint on every knowledge set reachable in the encoding
    and raises ``depth`` when it does not.
    """
    out = set(known)
    for _ in range(2 * depth):
        prev = frozenset(out)
        for r in rules:
            if all(p in prev for p in r.premises):
                out.add(r.conclusion)
    return frozenset(out)


def constructible(known, t: Term, universe: TermUniverse, rules) -> bool:
    """Can the intruder produce ``t`` from the (closed) knowledge ``known``?

    Atoms must be known; pairs need both components; a cipher is available
    either as a whole (replay, no key needed) or by encrypting a
    constructible body with a constructible key.
    """
    closed = closure(known, rules)

    def go(u: Term) -> bool:
        if universe.id_of(u) in closed:
            return True
        if isinstance(u, Pair):
            return go(u.left) and go(u.right)
        if isinstance(u, Cipher):
            return go(u.key) and go(u.body)
        return False

    return go(t)


def build_model(spec: ProtocolSpec, scenario: Scenario, k: Optional[int] = None,
                eavesdrop: Optional[bool] = None) -> TiisModel:
    """Compose the frontend and knowledge machinery into a TiisModel."""
    k = scenario.sessions if k is None else k
    eav = scenario.eavesdrop if eavesdrop is None else eavesdrop

    steps = apply_overrides(spec, scenario, k)
    universe = build_universe(steps, spec.roles, scenario.compromised)
    agents = tuple(spec.roles) + (INTRUDER,)
    init = {
        a: initial_knowledge(a, spec, universe, scenario.compromised if a == INTRUDER else ())
        for a in agents
    }
    rules = compile_rules(universe)
    generation = compute_generation(steps, spec.decl_map())

    secret_ids = []
    goal = spec.goal
    sids = [goal.target_sid] if goal.target_sid != "any" else list(range(1, k + 1))
    for sid in sids:
        t = Fresh(goal.secret, sid)
        if t in universe:
            secret_ids.append(universe.id_of(t))
    if not secret_ids:
        raise ModelError(
            f"goal secret {goal.secret!r} (sid {goal.target_sid}) appears in no step"
        )

    require = effective_require_complete(spec, steps, k)
    depth = _adequate_depth(universe, rules, init, steps)

    model = TiisModel(
        protocol=spec.name,
        scenario=scenario.name,
        sessions=k,
        agents=agents,
        exec_steps=tuple(steps),
        universe=universe,
        rules=rules,
        depth=depth,
        initial_knowledge=init,
        generation=generation,
        require_complete=require,
        goal_secret_ids=tuple(secret_ids),
        eavesdrop=eav,
    )
    return TiisModel(**{**model.__dict__, "warnings": tuple(adequacy_warnings(model))})


def _adequate_depth(universe, rules, init, steps) -> int:
    """Smallest depth parameter whose 2*depth strata reach the unbounded
    closure on every knowledge set the encoding can produce.

    Stratum 0 at any position is always closure(initial ∪ some subset of
    message roots) plus at most one newly received root, so enumerating
    those sets per agent covers every reachable case exactly. Starts at the
    universe nesting depth and bumps until adequate.
    """
    roots = sorted({universe.id_of(st.message) for st in steps})
    depth = max(universe.depth, 1)
    if len(roots) > 12:
        return depth  # enumeration would explode; desk-scale models stay small
    probes = []
    for base in init.values():
        for mask in range(1 << len(roots)):
            subset = {roots[b] for b in range(len(roots)) if mask >> b & 1}
            carried = closure(set(base) | subset, rules)
            for m in roots:
                probes.append(frozenset(carried | {m}))
    probes = sorted(set(probes), key=sorted)
    while any(stratified_closure(p, rules, depth) != closure(p, rules)
              for p in probes):
        depth += 1
    return depth


def adequacy_warnings(model: TiisModel):
    """Protocol well-formedness: honest receivers should be able to read
    the ciphers addressed to them when steps run in declaration order."""
    warnings = []
    knowledge = {a: set(model.initial_knowledge[a]) for a in model.agents}
    for st in sorted(model.exec_steps, key=lambda s: (s.sid, s.index)):
        rid = model.universe.id_of(st.message)
        receivers = {st.receiver}
        if model.eavesdrop:
            receivers.add(INTRUDER)
        for a in receivers:
            knowledge[a].add(rid)
            knowledge[a] = set(closure(knowledge[a], model.rules))
        if st.receiver != INTRUDER and isinstance(st.message, Cipher):
            body_id = model.universe.id_of(st.message.body)
            if body_id not in knowledge[st.receiver]:
                warnings.append(
                    f"step ({st.sid},{st.index}): receiver {st.receiver} cannot decrypt "
                    f"{render_term(st.message)}"
                )
    return warnings


def model_to_json(model: TiisModel) -> dict:
    """Debug serialization (CLI dump-model); deterministic."""
    return {
        "protocol": model.protocol,
        "scenario": model.scenario,
        "sessions": model.sessions,
        "agents": list(model.agents),
        "eavesdrop": model.eavesdrop,
        "depth": model.depth,
        "universe": [render_term(t) for t in model.universe],
        "rules": [
            {"kind": r.kind, "premises": list(r.premises), "conclusion": r.conclusion}
            for r in model.rules
        ],
        "exec_steps": [
            {
                "sid": st.sid,
                "step": st.index,
                "sender": st.sender,
                "receiver": st.receiver,
                "message": render_term(st.message),
                "min_delay": str(st.min_delay),
                "gated": st.gated,
                "lifetime_checks": [
                    {"term": render_term(c.term), "bound": str(c.bound)}
                    for c in st.lifetime_checks
                ],
            }
            for st in model.exec_steps
        ],
        "initial_knowledge": {
            a: sorted(model.initial_knowledge[a]) for a in model.agents
        },
        "generation": {
            render_term(t): [st.sid, st.index] for t, st in sorted(
                model.generation.items(), key=lambda kv: render_term(kv[0])
            )
        },
        "require_complete": sorted(model.require_complete),
        "goal_secrets": [render_term(model.universe.term_of(i)) for i in model.goal_secret_ids],
        "warnings": list(model.warnings),
    }
