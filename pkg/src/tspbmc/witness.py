"""Witness decoding, replay validation and reporting.

A sat model is decoded position by position into a Trace (one fired step
per position, fire time, per-agent knowledge deltas at the final
derivation stratum), truncated at the first position where the goal
holds. ``replay`` then re-executes that trace under the concrete
semantics — session order, gating, delays, lifetimes, knowledge closure —
as an independent soundness check of the encoding.
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .encoder import SmtScript, done_name, fire_name, k_name, tau_name
from .errors import ModelError
from .frontend import INTRUDER
from .model import TiisModel, closure, constructible
from .solver import RawResult
from .terms import Term, parse_term, render_term


@dataclass(frozen=True)
class TraceEvent:
    position: int  # j >= 1
    sid: int
    index: int
    sender: str
    receiver: str
    message: Term
    time: Fraction
    # agent -> tuple of terms newly derivable at this position (stratum 2D)
    deltas: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.position, self.sid, self.index, self.time))


@dataclass(frozen=True)
class Trace:
    protocol: str
    scenario: str
    sessions: int
    bound: int
    events: tuple  # TraceEvent, positions strictly increasing
    secret: Term  # the goal secret the intruder learned
    completed_sessions: tuple  # sorted sids required and completed


@dataclass(frozen=True)
class ReplayViolation:
    kind: str  # session order | gating | delay | lifetime | knowledge delta | goal
    position: int
    detail: str


def _bool(values: dict, name: str) -> bool:
    v = values.get(name)
    if not isinstance(v, bool):
        raise ModelError(f"missing or non-Bool model value for {name}")
    return v


def decode(result: RawResult, script: SmtScript, model: TiisModel) -> Trace:
    """Decode a sat model into a goal-truncated Trace."""
    if result.status != "sat":
        raise ModelError(f"cannot decode a {result.status} result")
    values = result.values
    strata = 2 * model.depth
    last = model.steps_per_session()
    agents = model.agents
    universe = model.universe

    def known(agent, tid, j):
        return _bool(values, k_name(agent, tid, j, strata))

    events = []
    secret = None
    completed = ()
    for j in range(1, script.bound + 1):
        fired = [
            st for st in model.exec_steps
            if _bool(values, fire_name(j, st.sid, st.index))
        ]
        if len(fired) != 1:
            raise ModelError(
                f"position {j}: expected exactly one firing step, got "
                f"{[(s.sid, s.index) for s in fired]}"
            )
        st = fired[0]
        time = values.get(tau_name(j))
        if not isinstance(time, Fraction):
            raise ModelError(f"missing time value {tau_name(j)}")
        deltas = {}
        for a in agents:
            gained = tuple(
                universe.term_of(tid)
                for tid in range(len(universe))
                if known(a, tid, j) and not known(a, tid, j - 1)
            )
            if gained:
                deltas[a] = gained
        events.append(TraceEvent(j, st.sid, st.index, st.sender, st.receiver,
                                 st.message, time, deltas))

        done_all = all(_bool(values, done_name(j, sid, last))
                       for sid in model.require_complete)
        secrets_known = [tid for tid in model.goal_secret_ids if known(INTRUDER, tid, j)]
        if done_all and secrets_known:
            secret = universe.term_of(secrets_known[0])
            completed = tuple(sorted(model.require_complete))
            break
    if secret is None:
        raise ModelError("sat model satisfies the goal at no position")

    return Trace(model.protocol, model.scenario, model.sessions, script.bound,
                 tuple(events), secret, completed)


def replay(trace: Trace, model: TiisModel) -> Optional[ReplayViolation]:
    """Concrete re-execution; returns None if valid, else the first violation."""
    universe = model.universe
    pc = {sid: 1 for sid in range(1, model.sessions + 1)}
    knowledge = {a: set(closure(model.initial_knowledge[a], model.rules))
                 for a in model.agents}
    times = {}  # (sid, index) -> Fraction
    prev_time = Fraction(0)
    last = model.steps_per_session()

    for ev in trace.events:
        try:
            st = model.step_at(ev.sid, ev.index)
        except KeyError:
            return ReplayViolation("session order", ev.position,
                                   f"unknown step ({ev.sid},{ev.index})")
        if pc.get(ev.sid) != ev.index:
            return ReplayViolation(
                "session order", ev.position,
                f"session {ev.sid} expects step {pc.get(ev.sid)}, got {ev.index}")
        if st.gated and not constructible(knowledge[INTRUDER], st.message,
                                          universe, model.rules):
            return ReplayViolation(
                "gating", ev.position,
                f"intruder cannot construct {render_term(st.message)}")
        if ev.time < prev_time:
            return ReplayViolation(
                "delay", ev.position,
                f"time {ev.time} decreases below {prev_time}")
        floor = times.get((ev.sid, ev.index - 1), Fraction(0)) + st.min_delay
        if ev.time < floor:
            return ReplayViolation(
                "delay", ev.position,
                f"step ({ev.sid},{ev.index}) at {ev.time} violates minimum delay "
                f"(needs >= {floor})")
        for check in st.lifetime_checks:
            gen = model.generation[check.term]
            gen_time = times.get((gen.sid, gen.index))
            if gen_time is None and (gen.sid, gen.index) == (ev.sid, ev.index):
                gen_time = ev.time
            if gen_time is not None and ev.time > gen_time + check.bound:
                return ReplayViolation(
                    "lifetime", ev.position,
                    f"{render_term(check.term)} used at {ev.time}, expired at "
                    f"{gen_time + check.bound}")

        times[(ev.sid, ev.index)] = ev.time
        prev_time = ev.time
        pc[ev.sid] = ev.index + 1
        rid = universe.id_of(st.message)
        receivers = {st.receiver}
        if model.eavesdrop:
            receivers.add(INTRUDER)
        before = {a: frozenset(knowledge[a]) for a in model.agents}
        for a in receivers:
            knowledge[a].add(rid)
            knowledge[a] = set(closure(knowledge[a], model.rules))
        for a in model.agents:
            actual = {universe.term_of(t) for t in knowledge[a] - before[a]}
            declared = set(ev.deltas.get(a, ()))
            if actual != declared:
                missing = sorted(render_term(t) for t in actual ^ declared)
                return ReplayViolation(
                    "knowledge delta", ev.position,
                    f"agent {a} delta mismatch on {missing}")

    final = trace.events[-1] if trace.events else None
    secret_id = universe.id_of(trace.secret) if trace.secret in universe else None
    goal_ok = (
        final is not None
        and secret_id in model.goal_secret_ids
        and secret_id in knowledge[INTRUDER]
        and all(pc[sid] == last + 1 for sid in model.require_complete)
        and set(trace.completed_sessions) == set(model.require_complete)
    )
    if not goal_ok:
        return ReplayViolation(
            "goal", final.position if final else 0,
            "final state does not satisfy the goal predicate")
    return None


# ---- reports ---------------------------------------------------------------


def render_text(trace: Trace) -> str:
    lines = [
        f"protocol {trace.protocol}, scenario {trace.scenario}, "
        f"sessions {trace.sessions}, bound {trace.bound}",
    ]
    for ev in trace.events:
        lines.append(
            f"[{ev.position}] t={ev.time} ({ev.sid}.{ev.index}) "
            f"{ev.sender} -> {ev.receiver} : {render_term(ev.message)}")
        for a in sorted(ev.deltas):
            for t in ev.deltas[a]:
                lines.append(f"    +K({a}): {render_term(t)}")
    lines.append(
        f"goal: I knows {render_term(trace.secret)}; sessions "
        f"{list(trace.completed_sessions)} complete")
    return "\n".join(lines) + "\n"


def trace_to_dict(trace: Trace) -> dict:
    return {
        "protocol": trace.protocol,
        "scenario": trace.scenario,
        "sessions": trace.sessions,
        "bound": trace.bound,
        "events": [
            {
                "position": ev.position,
                "sid": ev.sid,
                "step": ev.index,
                "sender": ev.sender,
                "receiver": ev.receiver,
                "message": render_term(ev.message),
                "time": str(ev.time),
                "deltas": {
                    a: [render_term(t) for t in ev.deltas[a]]
                    for a in sorted(ev.deltas)
                },
            }
            for ev in trace.events
        ],
        "goal": {
            "secret": render_term(trace.secret),
            "known_by_intruder": True,
            "completed_sessions": list(trace.completed_sessions),
        },
    }


def render_json(trace: Trace) -> str:
    return json.dumps(trace_to_dict(trace), indent=2) + "\n"


def parse_json(text: str) -> Trace:
    """Inverse of render_json; parse_json(render_json(t)) == t."""
    data = json.loads(text)
    events = tuple(
        TraceEvent(
            position=e["position"],
            sid=e["sid"],
            index=e["step"],
            sender=e["sender"],
            receiver=e["receiver"],
            message=parse_term(e["message"]),
            time=Fraction(e["time"]),
            deltas={a: tuple(parse_term(t) for t in ts)
                    for a, ts in e["deltas"].items()},
        )
        for e in data["events"]
    )
    return Trace(
        protocol=data["protocol"],
        scenario=data["scenario"],
        sessions=data["sessions"],
        bound=data["bound"],
        events=events,
        secret=parse_term(data["goal"]["secret"]),
        completed_sessions=tuple(data["goal"]["completed_sessions"]),
    )


_HTML_STYLE = """
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; }
th, td { border: 1px solid #999; padding: 0.4em 0.8em; vertical-align: top; }
th { background: #eee; }
td.term, td.delta { font-family: monospace; }
tr.goal td { background: #fde8e8; }
""".strip()


def render_html(trace: Trace) -> str:
    """Self-contained static report: one table row per event, one
    knowledge-delta column per agent."""
    agents = sorted({a for ev in trace.events for a in ev.deltas} | {INTRUDER})
    head = "".join(f"<th>+K({html.escape(a)})</th>" for a in agents)
    rows = []
    for i, ev in enumerate(trace.events):
        cells = [
            f"<td>{ev.position}</td>",
            f"<td>{html.escape(str(ev.time))}</td>",
            f"<td>({ev.sid}.{ev.index}) {html.escape(ev.sender)} &rarr; "
            f"{html.escape(ev.receiver)}</td>",
            f"<td class=\"term\">{html.escape(render_term(ev.message))}</td>",
        ]
        for a in agents:
            items = "<br>".join(html.escape(render_term(t))
                                for t in ev.deltas.get(a, ()))
            cells.append(f"<td class=\"delta\">{items}</td>")
        cls = " class=\"goal\"" if i == len(trace.events) - 1 else ""
        rows.append(f"<tr{cls}>" + "".join(cells) + "</tr>")
    title = (f"{trace.protocol} / {trace.scenario} — attack witness "
             f"(k={trace.sessions}, bound {trace.bound})")
    goal = (f"Intruder learns <code>{html.escape(render_term(trace.secret))}</code>; "
            f"completed sessions: {list(trace.completed_sessions)}")
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(title)}</title>"
        f"<style>{_HTML_STYLE}</style></head>\n<body>\n"
        f"<h1>{html.escape(title)}</h1>\n<p>{goal}</p>\n"
        "<table>\n<tr><th>#</th><th>time</th><th>step</th><th>message</th>"
        f"{head}</tr>\n" + "\n".join(rows) + "\n</table>\n</body></html>\n"
    )
