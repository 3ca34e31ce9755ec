"""Windowed anomaly aggregation, alert-queue linking, and attack-subgraph
reconstruction.

An event is flagged when its loss strictly exceeds mu + 1.5*sigma of the
held-out benign losses. Windows become anomalous via suspicious nodes
(or a total flagged-loss budget), maximal runs of anomalous windows
sharing entities merge into alerts, and a raised alert yields the attack
subgraph handed to the explainers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .graph import Event, EventContext, TemporalGraph

THRESHOLD_SIGMA_FACTOR = 1.5


@dataclass(frozen=True)
class WindowStats:
    mu: float
    sigma: float
    threshold: float


@dataclass
class WindowVerdict:
    window: tuple[int, int]                  # (t0, t1) half-open, ns
    event_count: int
    event_indexes: list[int]
    high_loss_events: list[int]              # event indexes with loss > threshold
    node_scores: dict[int, float]            # cumulative loss per incident node
    suspicious_nodes: set[int]               # node_score > threshold
    flagged_loss: float
    anomalous: bool


@dataclass
class Alert:
    windows: list[WindowVerdict]
    t_start: int
    t_end: int
    queue_score: float
    entities: set[int]
    raised: bool

    def to_json(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "windows": [list(w.window) for w in self.windows],
            "entities": sorted(self.entities),
            "queue_score": self.queue_score,
        }


@dataclass
class AttackSubgraph:
    nodes: set[int]
    event_indexes: list[int]
    events: list[Event]


@dataclass(frozen=True)
class DetectorConfig:
    window_minutes: float = 15.0
    min_suspicious_nodes: int = 1
    window_loss_budget: float | None = None       # OR-predicate; None disables
    alert_threshold_factor: float = 2.0           # alert iff queue >= factor*threshold


def compute_threshold(benign_losses) -> WindowStats:
    """mu + 1.5*sigma over the benign losses (population std)."""
    losses = list(benign_losses)
    if len(losses) < 2:
        raise ValueError("need at least 2 benign losses to compute a threshold")
    n = len(losses)
    mu = sum(losses) / n
    var = sum((x - mu) ** 2 for x in losses) / n
    sigma = var**0.5
    return WindowStats(mu=mu, sigma=sigma, threshold=mu + THRESHOLD_SIGMA_FACTOR * sigma)


def score_window(
    graph: TemporalGraph,
    contexts: list[EventContext],
    window: tuple[int, int],
    stats: WindowStats,
    config: DetectorConfig = DetectorConfig(),
) -> WindowVerdict:
    """Aggregate per-event losses over one half-open window.

    ``contexts`` is the scored full-stream context list; losses are read
    from it. Flagging uses strict inequality at the threshold.
    """
    t0, t1 = window
    idxs = graph.window_slice(t0, t1)
    flagged = [i for i in idxs if contexts[i].loss > stats.threshold]
    node_scores: dict[int, float] = {}
    for i in idxs:
        e = graph.events[i]
        loss = contexts[i].loss
        node_scores[e.src] = node_scores.get(e.src, 0.0) + loss
        if e.dst != e.src:
            node_scores[e.dst] = node_scores.get(e.dst, 0.0) + loss
    suspicious = {n for n, s in node_scores.items() if s > stats.threshold}
    flagged_loss = sum(contexts[i].loss for i in flagged)

    anomalous = bool(flagged) and len(suspicious) >= config.min_suspicious_nodes
    if config.window_loss_budget is not None:
        anomalous = anomalous or flagged_loss > config.window_loss_budget

    return WindowVerdict(
        window=window,
        event_count=len(idxs),
        event_indexes=idxs,
        high_loss_events=flagged,
        node_scores=node_scores,
        suspicious_nodes=suspicious,
        flagged_loss=flagged_loss,
        anomalous=anomalous,
    )


def iter_windows(span: tuple[int, int], window_ns: int):
    """Half-open windows covering the span; every event falls in exactly one."""
    t0, t_last = span
    start = t0
    while start <= t_last:
        yield (start, start + window_ns)
        start += window_ns


def score_all_windows(
    graph: TemporalGraph,
    contexts: list[EventContext],
    stats: WindowStats,
    config: DetectorConfig = DetectorConfig(),
) -> list[WindowVerdict]:
    window_ns = int(config.window_minutes * 60 * 1_000_000_000)
    return [
        score_window(graph, contexts, w, stats, config)
        for w in iter_windows(graph.span(), window_ns)
    ]


def link_queues(
    verdicts: list[WindowVerdict],
    stats: WindowStats,
    config: DetectorConfig = DetectorConfig(),
) -> list[Alert]:
    """Merge maximal runs of anomalous windows into alerts.

    Adjacent anomalous windows join the same queue when they share at
    least one node with positive node score. The queue score is the sum
    of member flagged-event losses; the alert is raised when it reaches
    ``alert_threshold_factor * stats.threshold``.
    """
    alerts: list[Alert] = []
    run: list[WindowVerdict] = []

    def close_run():
        if not run:
            return
        queue_score = sum(w.flagged_loss for w in run)
        entities: set[int] = set()
        for w in run:
            entities |= w.suspicious_nodes
        alerts.append(
            Alert(
                windows=list(run),
                t_start=run[0].window[0],
                t_end=run[-1].window[1],
                queue_score=queue_score,
                entities=entities,
                raised=queue_score >= config.alert_threshold_factor * stats.threshold,
            )
        )
        run.clear()

    prev: WindowVerdict | None = None
    for v in verdicts:
        if not v.anomalous:
            close_run()
            prev = None
            continue
        if run and prev is not None:
            shared = {
                n for n, s in v.node_scores.items() if s > 0
            } & {n for n, s in prev.node_scores.items() if s > 0}
            if not shared:
                close_run()
        run.append(v)
        prev = v
    close_run()
    return alerts


def reconstruct_subgraph(alert: Alert, graph: TemporalGraph) -> AttackSubgraph:
    """Events in the alert span with at least one suspicious endpoint;
    nodes are the entities plus their event partners."""
    idxs = [
        i
        for i in graph.window_slice(alert.t_start, alert.t_end)
        if graph.events[i].src in alert.entities
        or graph.events[i].dst in alert.entities
    ]
    nodes = set(alert.entities)
    for i in idxs:
        nodes.add(graph.events[i].src)
        nodes.add(graph.events[i].dst)
    return AttackSubgraph(
        nodes=nodes,
        event_indexes=idxs,
        events=[graph.events[i] for i in idxs],
    )


def save_alerts(alerts: list[Alert], path) -> None:
    doc = {"alerts": [a.to_json() | {"raised": a.raised} for a in alerts]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
