"""Audit-log ingestion and synthetic scenario generation.

Two ways to obtain a labeled dataset: parse a plain-text audit log
(one whitespace-separated record per line), or generate a seeded
synthetic timeline containing benign background activity plus an
injected multi-stage attack chain.

Log line format::

    <src_kind> <src_label> <relation> <dst_kind> <dst_label> <timestamp_ns>

Dataset file: a single JSON document {version, nodes, events, labels,
attack_interval}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .graph import (
    Event,
    NodeDescriptor,
    NodeKind,
    Relation,
    TemporalGraph,
    TruthLabel,
)

DATASET_VERSION = 1

NS_PER_S = 1_000_000_000


class ParseError(ValueError):
    """Malformed audit-log line; message carries line number and field."""


class DatasetFormatError(ValueError):
    """Dataset file is corrupt or has an unsupported version."""


@dataclass
class LabeledDataset:
    graph: TemporalGraph
    labels: list[TruthLabel]
    attack_interval: tuple[int, int]  # (t_start, t_end) ns; (0, 0) if none

    @property
    def node_map(self) -> dict[int, NodeDescriptor]:
        return self.graph.nodes

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.graph.nodes == other.graph.nodes
            and self.graph.events == other.graph.events
            and self.labels == other.labels
            and self.attack_interval == other.attack_interval
        )


# ---------------------------------------------------------------------------
# plain-text log parsing
# ---------------------------------------------------------------------------

_FIELDS = ("src_kind", "src_label", "relation", "dst_kind", "dst_label", "timestamp_ns")


def parse_log(lines) -> LabeledDataset:
    """Parse an iterable of log lines into a dataset.

    Node ids are dense integers assigned in first-appearance order of
    (kind, label). Truth labels default to UNKNOWN. Events are sorted by
    timestamp (stable).
    """
    records = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(
                f"line {lineno}: expected 6 fields {_FIELDS}, got {len(parts)}"
            )
        src_kind = _parse_kind(parts[0], lineno, "src_kind")
        rel = _parse_relation(parts[2], lineno)
        dst_kind = _parse_kind(parts[3], lineno, "dst_kind")
        try:
            ts = int(parts[5])
        except ValueError:
            raise ParseError(
                f"line {lineno}: field timestamp_ns is not an integer: {parts[5]!r}"
            ) from None
        records.append(((src_kind, parts[1]), rel, (dst_kind, parts[4]), ts))

    records.sort(key=lambda r: r[3])

    graph = TemporalGraph()
    ids: dict[tuple[NodeKind, str], int] = {}

    def node_id(key: tuple[NodeKind, str]) -> int:
        if key not in ids:
            nid = len(ids)
            ids[key] = nid
            graph.add_node(NodeDescriptor(nid, key[0], key[1]))
        return ids[key]

    for src_key, rel, dst_key, ts in records:
        graph.append_event(Event(node_id(src_key), node_id(dst_key), rel, ts))

    labels = [TruthLabel.UNKNOWN] * len(graph)
    return LabeledDataset(graph=graph, labels=labels, attack_interval=(0, 0))


def render_log(ds: LabeledDataset) -> str:
    """Inverse of parse_log for the event stream (labels are not carried)."""
    out = []
    for e in ds.graph.events:
        s = ds.graph.nodes[e.src]
        d = ds.graph.nodes[e.dst]
        out.append(
            f"{s.kind.value} {s.label} {e.relation.value} "
            f"{d.kind.value} {d.label} {e.timestamp}"
        )
    return "\n".join(out) + ("\n" if out else "")


def _parse_kind(token: str, lineno: int, fieldname: str) -> NodeKind:
    try:
        return NodeKind(token)
    except ValueError:
        valid = ", ".join(k.value for k in NodeKind)
        raise ParseError(
            f"line {lineno}: field {fieldname} has unknown kind {token!r} "
            f"(valid: {valid})"
        ) from None


def _parse_relation(token: str, lineno: int) -> Relation:
    try:
        return Relation(token)
    except ValueError:
        valid = ", ".join(r.value for r in Relation)
        raise ParseError(
            f"line {lineno}: unknown relation {token!r} (valid alphabet: {valid})"
        ) from None


# ---------------------------------------------------------------------------
# scenario specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionStep:
    """One scripted action by a session's actor process.

    ``coin`` may name an alternative relation; the emitter then alternates
    between ``relation`` and ``coin`` on successive sessions. Sessions are
    otherwise indistinguishable (fresh actor, fresh partners, fixed
    timing), so no feature reveals the parity and the best achievable
    per-event cross-entropy on coin steps is exactly ln 2 — an
    irreducible entropy floor for the background distribution.
    """

    relation: Relation
    dst_kind: NodeKind
    dst: str            # partner label; "fresh" = new node per session,
                        # "same" = the previous step's partner
    gap_s: float = 1.0  # delay after the previous event in the session
    coin: Relation | None = None
    coin_dst_kind: NodeKind | None = None


@dataclass(frozen=True)
class SessionSpec:
    """A short scripted interaction, optionally spawned by a parent process.

    With a parent, every session opens with `parent EXECUTE <fresh child>`
    and the child then performs the steps. Without a parent, a fresh
    process appears and performs the steps directly. Parents read their
    config file before their first session and again every
    ``reboot_period_s`` seconds (daemons re-read config on reload).
    """

    name: str
    steps: tuple[SessionStep, ...]
    parent: str | None = None
    start_gap_s: float = 1.0   # delay between EXECUTE and the first step
    period_s: float = 60.0     # one session per period
    offset_s: float = 0.0      # first session start
    conf: str | None = None    # parent's config file label
    reboot_period_s: float | None = None


@dataclass(frozen=True)
class CycleStep:
    """One position of a long-lived process's fixed duty cycle."""

    relation: Relation
    dst_kind: NodeKind
    dst: str                   # partner label; "fresh" for a new node per lap
    gap_s: float               # delay after the previous cycle position
    spawn: SessionSpec | None = None  # EXECUTE positions spawn this session


@dataclass(frozen=True)
class BenignTemplate:
    """One background behavior: a duty cycle, sessions, or a flat mix.

    ``mix`` gives the stationary relation mix. In mix mode the template
    process emits relations round-robin proportional to the mix weights,
    so the empirical mix matches the weights without per-event sampling
    noise. When ``cycle`` or ``sessions`` is set, those drive the
    behavior and the mix is derived documentation.
    """

    label: str
    mix: dict[Relation, float]
    rate_per_min: float
    sessions: tuple[SessionSpec, ...] = ()
    cycle: tuple[CycleStep, ...] = ()
    cycle_offset_s: float = 0.0
    conf: str | None = None  # config file OPENed once, just before the cycle

    def __post_init__(self):
        if self.rate_per_min <= 0:
            raise ValueError("template rate must be > 0")


@dataclass(frozen=True)
class AttackStep:
    src_label: str
    src_kind: NodeKind
    dst_label: str
    dst_kind: NodeKind
    relation: Relation
    offset_s: float  # offset into the scenario timeline


@dataclass(frozen=True)
class ScenarioSpec:
    duration_s: float
    benign_templates: tuple[BenignTemplate, ...]
    attack_chain: tuple[AttackStep, ...]
    seed: int = 0

    def __post_init__(self):
        offsets = [s.offset_s for s in self.attack_chain]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("attack step offsets must be strictly increasing")


#: webserver duty-cycle geometry, shared with the attack-offset arithmetic
_WEB_CYCLE_OFFSET_S = 5.0
_WEB_CYCLE_PERIOD_S = 72.0
_WEB_SPAWN_PHASE_S = 30.0  # EXECUTE position within the cycle


def default_scenario(seed: int = 7) -> ScenarioSpec:
    """The desk-scale default: 60 minutes, 3 benign templates (~4400
    events total), and the 4-step attack chain (webserver spawns a shell
    that reads a sensitive file, writes a payload, and phones out).

    The background mixes deterministic scripted behavior (whose losses
    shrink with training) with alternating-coin relation choices (whose
    losses sit at ln 2), so the benign loss distribution is bimodal and
    the mu + 1.5 sigma threshold separates it from genuinely novel
    events.
    """
    cgi = SessionSpec(
        name="cgi",
        parent="nginx",
        start_gap_s=1.0,
        steps=(
            SessionStep(Relation.READ, NodeKind.FILE, "fresh", gap_s=1.0),
            SessionStep(Relation.WRITE, NodeKind.FILE, "fresh", gap_s=1.0),
            SessionStep(Relation.SEND, NodeKind.SOCKET, "fresh", gap_s=1.0),
        ),
    )
    web = BenignTemplate(
        label="nginx",
        mix={Relation.READ: 2, Relation.SEND: 2, Relation.RECV: 1,
             Relation.EXECUTE: 1, Relation.WRITE: 1},
        rate_per_min=6.0,
        cycle=(
            CycleStep(Relation.READ, NodeKind.FILE, "/srv/www/index.html",
                      gap_s=42.0),
            CycleStep(Relation.SEND, NodeKind.SOCKET, "conn", gap_s=18.0),
            CycleStep(Relation.RECV, NodeKind.SOCKET, "conn", gap_s=8.0),
            CycleStep(Relation.EXECUTE, NodeKind.PROCESS, "fresh", gap_s=4.0,
                      spawn=cgi),
        ),
        cycle_offset_s=_WEB_CYCLE_OFFSET_S,
        conf="/etc/nginx.conf",
    )
    services = BenignTemplate(
        label="services",
        mix={
            Relation.OPEN: 8,
            Relation.CLOSE: 3,
            Relation.CONNECT: 1,
            Relation.RECV: 1,
            Relation.EXECUTE: 1,
            Relation.READ: 1,
            Relation.WRITE: 1,
            Relation.SEND: 1,
        },
        rate_per_min=70.0,
        sessions=(
            # three busy worker pools: each worker opens its task spec and
            # then either acquires or releases its handle (alternating, so
            # the choice carries exactly one bit the features cannot
            # predict); distinct open-to-action delays identify the pool
            SessionSpec(
                name="pool_a", parent=None,
                period_s=6.0, offset_s=2.0,
                steps=(
                    SessionStep(Relation.OPEN, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.OPEN, NodeKind.FILE, "same",
                                gap_s=4.0, coin=Relation.CLOSE),
                ),
            ),
            SessionSpec(
                name="pool_b", parent=None,
                period_s=6.0, offset_s=4.0,
                steps=(
                    SessionStep(Relation.OPEN, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.CONNECT, NodeKind.SOCKET, "fresh",
                                gap_s=8.0, coin=Relation.RECV),
                ),
            ),
            SessionSpec(
                name="pool_c", parent=None,
                period_s=6.0, offset_s=5.0,
                steps=(
                    SessionStep(Relation.OPEN, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.OPEN, NodeKind.FILE, "same",
                                gap_s=16.0, coin=Relation.CLOSE),
                ),
            ),
            # a scanner pool that reads what it opened before acting on it,
            # so recently-opened files are legitimately read
            SessionSpec(
                name="pool_d", parent=None,
                period_s=9.0, offset_s=1.0,
                steps=(
                    SessionStep(Relation.OPEN, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.READ, NodeKind.FILE, "same",
                                gap_s=1.0),
                    SessionStep(Relation.OPEN, NodeKind.FILE, "same",
                                gap_s=4.0, coin=Relation.CLOSE),
                ),
            ),
            # a slow batch worker: long spawn-to-action delay, scripted
            SessionSpec(
                name="batch", parent="svc_batch", start_gap_s=24.0,
                period_s=120.0, offset_s=23.0, conf="svc_batch.conf",
                steps=(
                    SessionStep(Relation.WRITE, NodeKind.FILE, "fresh",
                                gap_s=24.0),
                    SessionStep(Relation.SEND, NodeKind.SOCKET, "fresh",
                                gap_s=1.0),
                    SessionStep(Relation.CLOSE, NodeKind.FILE, "fresh",
                                gap_s=1.0),
                ),
            ),
            # short-lived login helpers consult the account database on a
            # slow cadence phase-locked with the cache refreshes; the phase
            # keeps one more read just outside the context horizon, so the
            # recent mix is insensitive to any single reader dropping out
            SessionSpec(
                name="logincheck", parent=None,
                period_s=450.0, offset_s=190.0,
                steps=(
                    SessionStep(Relation.READ, NodeKind.FILE, "/etc/passwd"),
                ),
            ),
            # a slower auditor on an incommensurate period: its reads
            # drift across the login-check phase, so training sees the
            # account file's recent history with varied read spacings
            SessionSpec(
                name="audit", parent=None,
                period_s=1350.0, offset_s=660.0,
                steps=(
                    SessionStep(Relation.READ, NodeKind.FILE, "/etc/passwd"),
                ),
            ),
            # the auth daemon re-reads the account database on reload
            SessionSpec(
                name="authcheck", parent="authd", start_gap_s=2.0,
                period_s=120.0, offset_s=11.0, conf="auth.conf",
                steps=(
                    SessionStep(Relation.READ, NodeKind.FILE, "auth/db",
                                gap_s=2.0),
                ),
            ),
        ),
    )
    # the name-service cache refreshes its handle on the account database
    # on a steady cadence; the phase puts the final refresh shortly before
    # the attack's READ of the same file, so the file's recent history is
    # realistic, and none follows it inside the capture
    nscd = BenignTemplate(
        label="nscd",
        mix={Relation.OPEN: 1},
        rate_per_min=0.4,
        cycle=(
            CycleStep(Relation.OPEN, NodeKind.FILE, "/etc/passwd",
                      gap_s=150.0),
        ),
        cycle_offset_s=115.0,
    )
    adhoc = BenignTemplate(
        label="clients",
        mix={Relation.OPEN: 1, Relation.READ: 1, Relation.WRITE: 1,
             Relation.SEND: 1},
        rate_per_min=5.0,
        sessions=(
            SessionSpec(
                name="client",
                parent=None,
                period_s=36.0,
                offset_s=3.5,
                steps=(
                    SessionStep(Relation.OPEN, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.READ, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.WRITE, NodeKind.FILE, "fresh"),
                    SessionStep(Relation.SEND, NodeKind.SOCKET, "fresh"),
                ),
            ),
        ),
    )

    # land the spawn just before a scheduled EXECUTE slot: the hijacked
    # request looks timing-plausible, and the shell chain that follows
    # does not
    slot = _WEB_CYCLE_OFFSET_S + _WEB_SPAWN_PHASE_S + 49 * _WEB_CYCLE_PERIOD_S
    t0 = slot - 0.4
    attack = (
        AttackStep("nginx", NodeKind.PROCESS, "bash", NodeKind.PROCESS,
                   Relation.EXECUTE, t0),
        AttackStep("bash", NodeKind.PROCESS, "/etc/passwd", NodeKind.FILE,
                   Relation.READ, t0 + 15.0),
        AttackStep("bash", NodeKind.PROCESS, "/tmp/payload.so", NodeKind.FILE,
                   Relation.WRITE, t0 + 16.0),
        AttackStep("bash", NodeKind.PROCESS, "78.205.235.65:80", NodeKind.SOCKET,
                   Relation.SEND, t0 + 17.0),
    )
    return ScenarioSpec(
        duration_s=3600.0,
        benign_templates=(web, services, nscd, adhoc),
        attack_chain=attack,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

@dataclass
class _PendingEvent:
    ts_ns: int
    order: tuple  # deterministic tie-break
    src_key: tuple[NodeKind, str]
    dst_key: tuple[NodeKind, str]
    relation: Relation
    malicious: bool


def generate_scenario(spec: ScenarioSpec) -> LabeledDataset:
    """Deterministic pure function of the spec (including its seed)."""
    import random

    for step in spec.attack_chain:
        if step.offset_s > spec.duration_s:
            raise ValueError(
                f"attack offset {step.offset_s}s exceeds duration {spec.duration_s}s"
            )

    rng = random.Random(spec.seed)
    pending: list[_PendingEvent] = []

    for tmpl_idx, tmpl in enumerate(spec.benign_templates):
        if tmpl.cycle:
            pending.extend(_emit_duty_cycle(tmpl, tmpl_idx, spec.duration_s))
        elif tmpl.sessions:
            for spec_idx, sess in enumerate(tmpl.sessions):
                pending.extend(
                    _emit_session_stream(sess, tmpl_idx, spec_idx,
                                         spec.duration_s)
                )
        else:
            pending.extend(_emit_cycle(tmpl, tmpl_idx, spec.duration_s, rng))

    for step_idx, step in enumerate(spec.attack_chain):
        pending.append(
            _PendingEvent(
                ts_ns=int(step.offset_s * NS_PER_S),
                order=(2, step_idx),
                src_key=(step.src_kind, step.src_label),
                dst_key=(step.dst_kind, step.dst_label),
                relation=step.relation,
                malicious=True,
            )
        )

    pending.sort(key=lambda p: (p.ts_ns, p.order))

    graph = TemporalGraph()
    ids: dict[tuple[NodeKind, str], int] = {}

    def node_id(key: tuple[NodeKind, str]) -> int:
        if key not in ids:
            nid = len(ids)
            ids[key] = nid
            graph.add_node(NodeDescriptor(nid, key[0], key[1]))
        return ids[key]

    labels: list[TruthLabel] = []
    attack_ts: list[int] = []
    for p in pending:
        graph.append_event(Event(node_id(p.src_key), node_id(p.dst_key),
                                 p.relation, p.ts_ns))
        labels.append(TruthLabel.MALICIOUS if p.malicious else TruthLabel.BENIGN)
        if p.malicious:
            attack_ts.append(p.ts_ns)

    interval = (min(attack_ts), max(attack_ts)) if attack_ts else (0, 0)
    return LabeledDataset(graph=graph, labels=labels, attack_interval=interval)


def _emit_cycle(tmpl: BenignTemplate, tmpl_idx: int, duration_s: float, rng):
    """Flat template: one long-lived process cycling through its mix."""
    cycle: list[Relation] = []
    for rel, weight in tmpl.mix.items():
        cycle.extend([rel] * int(round(weight)))
    if not cycle:
        raise ValueError(f"template {tmpl.label!r} has an empty mix")

    proc = (NodeKind.PROCESS, tmpl.label)
    # small per-relation partner pools so partner memories are stationary
    pools = {
        "file": [(NodeKind.FILE, f"{tmpl.label}/file{i}") for i in range(3)],
        "sock": [(NodeKind.SOCKET, f"{tmpl.label}:peer{i}") for i in range(4)],
        "proc": [(NodeKind.PROCESS, f"{tmpl.label}.helper{i}") for i in range(2)],
    }
    counters = {"file": 0, "sock": 0, "proc": 0}

    def partner(rel: Relation):
        kind = {
            Relation.READ: "file", Relation.WRITE: "file", Relation.OPEN: "file",
            Relation.CLOSE: "file", Relation.SEND: "sock", Relation.RECV: "sock",
            Relation.CONNECT: "sock", Relation.EXECUTE: "proc", Relation.CLONE: "proc",
        }[rel]
        pool = pools[kind]
        key = pool[counters[kind] % len(pool)]
        counters[kind] += 1
        return key

    period = 60.0 / tmpl.rate_per_min
    t = period * (0.3 + 0.1 * tmpl_idx)
    i = 0
    out = []
    while t < duration_s:
        rel = cycle[i % len(cycle)]
        jitter = rng.uniform(-0.05, 0.05) * period
        out.append(
            _PendingEvent(
                ts_ns=int((t + jitter) * NS_PER_S),
                order=(0, tmpl_idx, i),
                src_key=proc,
                dst_key=partner(rel),
                relation=rel,
                malicious=False,
            )
        )
        t += period
        i += 1
    return out


def _realize_step(step: SessionStep, session_no: int,
                  coin_idx: int) -> tuple[Relation, NodeKind]:
    """Resolve a step's relation; coin steps alternate by session parity.

    The k-th coin of a session follows bit k of the session counter, so
    within every class of sessions that share a realized prefix the two
    outcomes stay exactly balanced.
    """
    if step.coin is not None and (session_no >> coin_idx) & 1:
        return step.coin, step.coin_dst_kind or step.dst_kind
    return step.relation, step.dst_kind


def _session_events(sess: SessionSpec, session_no: int, start_s: float,
                    order_key: tuple) -> list[_PendingEvent]:
    """One session instance: optional parent EXECUTE plus the actor steps."""
    batch: list[_PendingEvent] = []
    seq = 0
    cursor = start_s
    if sess.parent:
        child = (NodeKind.PROCESS, f"{sess.name}.{session_no}")
        batch.append(
            _PendingEvent(
                ts_ns=int(cursor * NS_PER_S),
                order=(*order_key, session_no, seq),
                src_key=(NodeKind.PROCESS, sess.parent),
                dst_key=child,
                relation=Relation.EXECUTE,
                malicious=False,
            )
        )
        seq += 1
        cursor += sess.start_gap_s
        actor = child
    else:
        actor = (NodeKind.PROCESS, f"{sess.name}.{session_no}")

    coin_idx = 0
    prev_dst: tuple[NodeKind, str] | None = None
    for step_idx, step in enumerate(sess.steps):
        relation, dst_kind = _realize_step(step, session_no, coin_idx)
        if step.coin is not None:
            coin_idx += 1
        if step.dst == "fresh":
            dst = (dst_kind, f"{sess.name}.{session_no}.obj{step_idx}")
        elif step.dst == "same":
            if prev_dst is None:
                raise ValueError(f"session {sess.name!r}: 'same' needs a prior step")
            dst = prev_dst
        else:
            dst = (dst_kind, step.dst)
        prev_dst = dst
        if step_idx > 0:
            cursor += step.gap_s
        batch.append(
            _PendingEvent(
                ts_ns=int(cursor * NS_PER_S),
                order=(*order_key, session_no, seq),
                src_key=actor,
                dst_key=dst,
                relation=relation,
                malicious=False,
            )
        )
        seq += 1
    return batch


def _emit_session_stream(sess: SessionSpec, tmpl_idx: int, spec_idx: int,
                         duration_s: float) -> list[_PendingEvent]:
    """All sessions of one spec, plus the parent's config (re-)reads."""
    out: list[_PendingEvent] = []
    if sess.parent and sess.conf:
        # daemons open their config before serving and again on reload;
        # this keeps a parent's first-ever event in line with other
        # fresh-process behavior
        boot = max(sess.offset_s - 2.0, 0.0)
        boots = [boot]
        if sess.reboot_period_s:
            t = boot + sess.reboot_period_s
            while t < duration_s:
                boots.append(t)
                t += sess.reboot_period_s
        for boot_no, boot_t in enumerate(boots):
            out.append(
                _PendingEvent(
                    ts_ns=int(boot_t * NS_PER_S),
                    order=(1, tmpl_idx, spec_idx, boot_no, -1),
                    src_key=(NodeKind.PROCESS, sess.parent),
                    dst_key=(NodeKind.FILE, sess.conf),
                    relation=Relation.OPEN,
                    malicious=False,
                )
            )

    session_no = 0
    while True:
        start = sess.offset_s + session_no * sess.period_s
        batch = _session_events(sess, session_no, start,
                                (1, tmpl_idx, spec_idx))
        if batch[-1].ts_ns >= duration_s * NS_PER_S:
            break
        out.extend(batch)
        session_no += 1
    return out


def _emit_duty_cycle(tmpl: BenignTemplate, tmpl_idx: int,
                     duration_s: float) -> list[_PendingEvent]:
    """A long-lived process repeating a fixed duty cycle; EXECUTE
    positions spawn scripted child sessions."""
    proc = (NodeKind.PROCESS, tmpl.label)
    period = sum(step.gap_s for step in tmpl.cycle)
    out: list[_PendingEvent] = []
    if tmpl.conf:
        out.append(
            _PendingEvent(
                ts_ns=int(max(tmpl.cycle_offset_s - 2.0, 0.0) * NS_PER_S),
                order=(0, tmpl_idx, -1),
                src_key=proc,
                dst_key=(NodeKind.FILE, tmpl.conf),
                relation=Relation.OPEN,
                malicious=False,
            )
        )
    lap = 0
    while True:
        t = tmpl.cycle_offset_s + lap * period
        lap_done = False
        for step_idx, step in enumerate(tmpl.cycle):
            if step_idx > 0:
                t += step.gap_s
            if t >= duration_s:
                lap_done = True
                break
            if step.spawn is not None:
                child_batch = _session_events(
                    step.spawn, lap, t, (0, tmpl_idx, lap)
                )
                if child_batch[-1].ts_ns < duration_s * NS_PER_S:
                    out.extend(child_batch)
                continue
            if step.dst == "fresh":
                dst = (step.dst_kind, f"{tmpl.label}/lap{lap}.s{step_idx}")
            elif step.dst == "conn":
                # a small pool of peer sockets; one peer per lap
                dst = (step.dst_kind, f"{tmpl.label}:conn{lap % 6}")
            else:
                dst = (step.dst_kind, step.dst)
            out.append(
                _PendingEvent(
                    ts_ns=int(t * NS_PER_S),
                    order=(0, tmpl_idx, lap, step_idx),
                    src_key=proc,
                    dst_key=dst,
                    relation=step.relation,
                    malicious=False,
                )
            )
        if lap_done:
            break
        lap += 1
    return out


# ---------------------------------------------------------------------------
# dataset (de)serialization
# ---------------------------------------------------------------------------

def save_dataset(ds: LabeledDataset, path) -> None:
    doc = {
        "version": DATASET_VERSION,
        "nodes": [
            {"id": n.node_id, "kind": n.kind.value, "label": n.label}
            for n in (ds.graph.nodes[i] for i in sorted(ds.graph.nodes))
        ],
        "events": [
            [e.src, e.dst, e.relation.value, e.timestamp] for e in ds.graph.events
        ],
        "labels": [lab.value for lab in ds.labels],
        "attack_interval": list(ds.attack_interval),
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def load_dataset(path) -> LabeledDataset:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"dataset file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"corrupt dataset file {p}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != DATASET_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset version {doc.get('version')!r} "
            f"(expected {DATASET_VERSION})"
        )
    graph = TemporalGraph()
    for n in doc["nodes"]:
        graph.add_node(NodeDescriptor(n["id"], NodeKind(n["kind"]), n["label"]))
    for src, dst, rel, ts in doc["events"]:
        graph.append_event(Event(src, dst, Relation(rel), ts))
    labels = [TruthLabel(v) for v in doc["labels"]]
    return LabeledDataset(
        graph=graph,
        labels=labels,
        attack_interval=tuple(doc["attack_interval"]),
    )
