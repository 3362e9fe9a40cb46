"""Explicit-state bounded reachability over the concrete TIIS semantics.

Independent ground truth for the SMT verdicts at desk scale: a
breadth-first search over step interleavings (so the first hit is at
minimal depth), with gating checked against the intruder's concretely
closed knowledge and timing checked exactly.

Timing is decided per explored prefix by difference-constraint
feasibility (Bellman-Ford) over the same constraint set the encoder
emits: per-session minimum-delay chains, global time non-decreasing
along the interleaving, and lifetime upper bounds for every fired step
that uses a bounded fresh term. An infeasible prefix can never become
feasible by extension (extensions only add constraints), so pruning is
sound and BFS depth minimality is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .frontend import INTRUDER
from .model import TiisModel, closure, constructible
from .witness import Trace, TraceEvent


@dataclass(frozen=True)
class OracleResult:
    outcome: str  # attack-found | no-attack-up-to
    depth: int
    trace: Optional[Trace] = None


def _timing(model: TiisModel, sequence) -> Optional[dict]:
    """Feasible fire times for the interleaving ``sequence`` (list of
    ExecSteps in firing order), or None if the constraints are infeasible.

    Every exec step owns a time variable; unfired steps keep only their
    delay-chain lower bounds, mirroring the SMT encoding.
    """
    edges = []  # (u, v, w): t_v - t_u <= w

    def var(st):
        return (st.sid, st.index)

    for st in model.exec_steps:
        if st.index > 1:
            prev = (st.sid, st.index - 1)
            edges.append((var(st), prev, -st.min_delay))  # t >= t_prev + delay
        else:
            edges.append((var(st), "<zero>", -st.min_delay))  # t >= delay
    for a, b in zip(sequence, sequence[1:]):
        edges.append((var(b), var(a), Fraction(0)))  # non-decreasing global time
    fired = {var(st) for st in sequence}
    for st in sequence:
        for check in st.lifetime_checks:
            gen = model.generation[check.term]
            edges.append((var(gen), var(st), check.bound))  # use <= gen + bound

    nodes = {"<zero>"} | {var(st) for st in model.exec_steps}
    dist = {v: Fraction(0) for v in nodes}
    for it in range(len(nodes) + 1):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return {v: dist[v] - dist["<zero>"] for v in fired}
    return None


def explicit_reach(model: TiisModel, goal=None, depth: int = 1) -> OracleResult:
    """BFS over interleavings up to ``depth`` transitions.

    ``goal`` is accepted for interface symmetry; the model carries the
    goal already. Returns the minimal-depth attack trace or exhaustion.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    last = model.steps_per_session()
    init_intruder = frozenset(closure(model.initial_knowledge[INTRUDER], model.rules))
    start_pc = tuple(1 for _ in range(model.sessions))

    frontier = [(start_pc, init_intruder, ())]
    for d in range(1, depth + 1):
        nxt = []
        for pc, iknow, seq in frontier:
            for sid in range(1, model.sessions + 1):
                i = pc[sid - 1]
                if i > last:
                    continue
                st = model.step_at(sid, i)
                if st.gated and not constructible(iknow, st.message,
                                                  model.universe, model.rules):
                    continue
                new_seq = seq + (st,)
                times = _timing(model, new_seq)
                if times is None:
                    continue
                new_pc = pc[:sid - 1] + (i + 1,) + pc[sid:]
                new_iknow = iknow
                if st.receiver == INTRUDER or model.eavesdrop:
                    new_iknow = frozenset(closure(
                        iknow | {model.universe.id_of(st.message)}, model.rules))
                done = all(new_pc[s - 1] == last + 1 for s in model.require_complete)
                secret = next((t for t in model.goal_secret_ids if t in new_iknow), None)
                if done and secret is not None:
                    return OracleResult(
                        "attack-found", d,
                        _make_trace(model, new_seq, times, secret, d))
                nxt.append((new_pc, new_iknow, new_seq))
        frontier = nxt
        if not frontier:
            break
    return OracleResult("no-attack-up-to", depth)


def _make_trace(model: TiisModel, sequence, times, secret_id, depth) -> Trace:
    """Witness-schema trace for a successful oracle run, with knowledge
    deltas recomputed by unbounded closure (as replay expects)."""
    knowledge = {a: set(closure(model.initial_knowledge[a], model.rules))
                 for a in model.agents}
    events = []
    for pos, st in enumerate(sequence, start=1):
        rid = model.universe.id_of(st.message)
        receivers = {st.receiver}
        if model.eavesdrop:
            receivers.add(INTRUDER)
        deltas = {}
        for a in receivers:
            before = frozenset(knowledge[a])
            knowledge[a].add(rid)
            knowledge[a] = set(closure(knowledge[a], model.rules))
            gained = tuple(model.universe.term_of(t)
                           for t in sorted(knowledge[a] - before))
            if gained:
                deltas[a] = gained
        events.append(TraceEvent(pos, st.sid, st.index, st.sender, st.receiver,
                                 st.message, times[(st.sid, st.index)], deltas))
    return Trace(model.protocol, model.scenario, model.sessions, depth,
                 tuple(events), model.universe.term_of(secret_id),
                 tuple(sorted(model.require_complete)))
