"""Analyst-facing outputs: JSON documents, a Markdown summary, and DOT
graph descriptions with importance-band edge styling.

Importance bands over [0, 1]: critical above 0.7, moderate in
[0.3, 0.7] (inclusive bounds), irrelevant below 0.3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .detect import AttackSubgraph
from .graph import NodeDescriptor, Relation

CRITICAL_BOUND = 0.7
MODERATE_BOUND = 0.3


class ImportanceBand(Enum):
    CRITICAL = "critical"
    MODERATE = "moderate"
    IRRELEVANT = "irrelevant"


def band_of(importance: float) -> ImportanceBand:
    """Every value in [0, 1] maps to exactly one band."""
    if importance > CRITICAL_BOUND:
        return ImportanceBand.CRITICAL
    if importance >= MODERATE_BOUND:
        return ImportanceBand.MODERATE
    return ImportanceBand.IRRELEVANT


_BAND_RATIONALE = {
    ImportanceBand.CRITICAL: "critical to alert",
    ImportanceBand.MODERATE: "moderate contributor to alert",
    ImportanceBand.IRRELEVANT: "likely not relevant",
}

_BAND_STYLE = {
    ImportanceBand.CRITICAL: ("bold", "red", 3),
    ImportanceBand.MODERATE: ("solid", "orange", 2),
    ImportanceBand.IRRELEVANT: ("solid", "gray", 1),
}


@dataclass
class WindowReport:
    """One window's explanation results, mirroring the JSON layout."""

    window: tuple[int, int]
    num_events: int
    threshold: float
    graphmask_aggregate: list[dict]   # {src, dst, relation, weight, count}
    nodes: list[dict]                 # {node_id, score, gnn, va_tg}, score desc
    skipped: list[dict] = field(default_factory=list)  # per-event skip records


@dataclass
class ExplanationReport:
    windows: list[WindowReport]
    warnings: list[str] = field(default_factory=list)


def load_schema() -> dict:
    path = resources.files("provlens.schemas") / "explanation_report.schema.json"
    return json.loads(path.read_text())


def validate_document(doc: dict) -> None:
    import jsonschema

    jsonschema.validate(doc, load_schema())


def _fmt_window(window: tuple[int, int]) -> str:
    return f"{window[0]}-{window[1]}"


def emit_json(report: WindowReport, node_map: dict[int, NodeDescriptor]) -> dict:
    """The per-window JSON document; validates against the shipped schema."""
    referenced: set[int] = set()
    for row in report.graphmask_aggregate:
        referenced.update((row["src"], row["dst"]))
    for node in report.nodes:
        referenced.add(node["node_id"])
        for g in node["gnn"]:
            for e in g["top_edges"]:
                referenced.update((e["src"], e["dst"]))
        for e in node["va_tg"]["aggregate"]:
            referenced.update((e["src"], e["dst"]))

    doc = {
        "window": _fmt_window(report.window),
        "num_events": report.num_events,
        "threshold": report.threshold,
        "graphmask": {"aggregate": report.graphmask_aggregate},
        "nodes": report.nodes,
        "labels": {
            str(nid): node_map[nid].label
            for nid in sorted(referenced)
            if nid in node_map
        },
    }
    validate_document(doc)
    return doc


def parse_report_json(doc: dict) -> WindowReport:
    """Inverse of emit_json (labels section is derived, not round-tripped)."""
    validate_document(doc)
    t0, t1 = doc["window"].split("-")
    return WindowReport(
        window=(int(t0), int(t1)),
        num_events=doc["num_events"],
        threshold=doc["threshold"],
        graphmask_aggregate=doc["graphmask"]["aggregate"],
        nodes=doc["nodes"],
    )


def _edge_label(src: int, dst: int, rel: str, node_map, warnings: list[str]) -> str:
    def label(nid: int) -> str:
        node = node_map.get(nid)
        if node is None:
            warnings.append(f"warning: no label for node {nid}; using numeric id")
            return str(nid)
        return node.label

    return f"{label(src)} → {label(dst)}, {rel}"


def emit_markdown(report: WindowReport, node_map: dict[int, NodeDescriptor]) -> str:
    """Human-readable per-window summary with banded edge bullets."""
    warnings: list[str] = []
    lines = [
        f"## Window {_fmt_window(report.window)}",
        "",
        f"- events in window: {report.num_events}",
        f"- anomaly threshold: {report.threshold:.4f}",
        f"- explained nodes: {len(report.nodes)}",
        "",
        "### Globally important edges",
        "",
    ]
    if report.graphmask_aggregate:
        for row in report.graphmask_aggregate:
            band = band_of(row["weight"])
            desc = _edge_label(row["src"], row["dst"], row["relation"],
                               node_map, warnings)
            lines.append(
                f"- Edge ({desc}) — {band.value} "
                f"(weight {row['weight']:.2f}, seen {row['count']}x); "
                f"{_BAND_RATIONALE[band]}"
            )
    else:
        lines.append("- no edges were explained in this window")

    lines += ["", "### Suspicious nodes", ""]
    if not report.nodes:
        lines.append("- no explainable nodes in this window")
    for node in report.nodes:
        nid = node["node_id"]
        name = node_map[nid].label if nid in node_map else str(nid)
        lines.append(f"- **{name}** (node {nid}, score {node['score']:.2f})")
        for g in node["gnn"]:
            for e in g["top_edges"]:
                band = band_of(e["imp"])
                desc = _edge_label(e["src"], e["dst"], e["rel"], node_map, warnings)
                lines.append(
                    f"  - Edge ({desc}) — {band.value} "
                    f"(importance {e['imp']:.2f}); {_BAND_RATIONALE[band]}"
                )
    if warnings:
        lines += [""] + sorted(set(warnings))
    return "\n".join(lines) + "\n"


def emit_graph_description(
    report: WindowReport,
    subgraph: AttackSubgraph,
    node_map: dict[int, NodeDescriptor],
) -> str:
    """DOT document for the subgraph, edges styled by importance band.

    Importance per canonical edge comes from the report's GraphMask
    aggregate; edges absent from every explanation are styled irrelevant.
    """
    weights = {
        (row["src"], row["dst"], row["relation"]): row["weight"]
        for row in report.graphmask_aggregate
    }
    lines = ["digraph attack_subgraph {", "  rankdir=LR;"]
    for nid in sorted(subgraph.nodes):
        label = node_map[nid].label if nid in node_map else str(nid)
        shape = {
            "PROCESS": "box", "FILE": "ellipse", "SOCKET": "diamond"
        }.get(node_map[nid].kind.value if nid in node_map else "", "ellipse")
        lines.append(f'  n{nid} [label="{label}", shape={shape}];')
    seen: set[tuple[int, int, str]] = set()
    for ev in subgraph.events:
        key = (ev.src, ev.dst, ev.relation.value)
        if key in seen:
            continue
        seen.add(key)
        weight = weights.get(key, 0.0)
        style, color, penwidth = _BAND_STYLE[band_of(weight)]
        lines.append(
            f'  n{ev.src} -> n{ev.dst} [label="{ev.relation.value}", '
            f"style={style}, color={color}, penwidth={penwidth}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
