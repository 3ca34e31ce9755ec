"""Reporting: importance bands, JSON schema, Markdown, DOT output."""

import json

import pytest

from provlens.detect import AttackSubgraph
from provlens.graph import Event, NodeDescriptor, NodeKind, Relation
from provlens.report import (
    ImportanceBand,
    WindowReport,
    band_of,
    emit_graph_description,
    emit_json,
    emit_markdown,
    load_schema,
    parse_report_json,
    validate_document,
)


@pytest.mark.parametrize(
    "value,band",
    [
        (0.0, ImportanceBand.IRRELEVANT),
        (0.29999, ImportanceBand.IRRELEVANT),
        (0.3, ImportanceBand.MODERATE),
        (0.5, ImportanceBand.MODERATE),
        (0.7, ImportanceBand.MODERATE),
        (0.70001, ImportanceBand.CRITICAL),
        (1.0, ImportanceBand.CRITICAL),
    ],
)
def test_band_boundaries(value, band):
    assert band_of(value) is band


def test_bands_partition_unit_interval():
    """Every value in [0, 1] lands in exactly one band."""
    for i in range(0, 1001):
        assert band_of(i / 1000) in ImportanceBand


NODE_MAP = {
    1: NodeDescriptor(1, NodeKind.PROCESS, "sh"),
    2: NodeDescriptor(2, NodeKind.FILE, "/etc/passwd"),
    3: NodeDescriptor(3, NodeKind.SOCKET, "10.0.0.1:80"),
}


def _report():
    return WindowReport(
        window=(0, 900_000_000_000),
        num_events=12,
        threshold=0.77,
        graphmask_aggregate=[
            {"src": 1, "dst": 2, "relation": "READ", "weight": 0.9, "count": 3},
            {"src": 1, "dst": 3, "relation": "SEND", "weight": 0.2, "count": 1},
        ],
        nodes=[
            {
                "node_id": 2,
                "score": 2.4,
                "gnn": [
                    {
                        "event_index": 7,
                        "comprehensiveness": 0.6,
                        "sufficiency": 0.05,
                        "top_edges": [
                            {"src": 1, "dst": 2, "rel": "READ", "imp": 0.9}
                        ],
                    }
                ],
                "va_tg": {
                    "events": [
                        {
                            "event_index": 7,
                            "top_edges": [
                                {"src": 1, "dst": 2, "rel": "READ",
                                 "imp": 0.8}
                            ],
                        }
                    ],
                    "aggregate": [
                        {"src": 1, "dst": 2, "rel": "READ",
                         "mean": 0.8, "var": 0.01}
                    ],
                },
            }
        ],
    )


def test_schema_loads():
    schema = load_schema()
    assert schema["type"] == "object"


def test_emit_json_validates_and_labels():
    doc = emit_json(_report(), NODE_MAP)
    validate_document(doc)  # already validated inside emit; explicit re-check
    assert doc["window"] == "0-900000000000"
    assert doc["labels"]["2"] == "/etc/passwd"
    assert set(doc["labels"]) == {"1", "2", "3"}
    json.dumps(doc)


def test_json_round_trip():
    doc = emit_json(_report(), NODE_MAP)
    back = parse_report_json(doc)
    orig = _report()
    assert back.window == orig.window
    assert back.num_events == orig.num_events
    assert back.threshold == orig.threshold
    assert back.graphmask_aggregate == orig.graphmask_aggregate
    assert back.nodes == orig.nodes


def test_validate_rejects_malformed():
    import jsonschema

    doc = emit_json(_report(), NODE_MAP)
    del doc["threshold"]
    with pytest.raises(jsonschema.ValidationError):
        validate_document(doc)


def test_markdown_contains_bands_and_rationale():
    text = emit_markdown(_report(), NODE_MAP)
    assert "## Window 0-900000000000" in text
    assert "critical" in text
    assert "irrelevant" in text
    assert "critical to alert" in text
    assert "/etc/passwd" in text


def test_markdown_warns_on_missing_label():
    report = _report()
    report.graphmask_aggregate[0]["src"] = 42  # not in the node map
    text = emit_markdown(report, NODE_MAP)
    assert "warning: no label for node 42" in text


def test_graph_description_styles_by_band():
    sub = AttackSubgraph(
        nodes={1, 2, 3},
        event_indexes=[7, 8],
        events=[
            Event(1, 2, Relation.READ, 5),
            Event(1, 3, Relation.SEND, 6),
            Event(1, 3, Relation.SEND, 7),  # duplicate canonical edge
        ],
    )
    dot = emit_graph_description(_report(), sub, NODE_MAP)
    assert dot.startswith("digraph attack_subgraph {")
    assert dot.rstrip().endswith("}")
    assert 'n1 [label="sh", shape=box];' in dot
    assert 'n2 [label="/etc/passwd", shape=ellipse];' in dot
    assert 'n3 [label="10.0.0.1:80", shape=diamond];' in dot
    # READ weight 0.9 -> critical styling; SEND 0.2 -> irrelevant
    assert 'n1 -> n2 [label="READ", style=bold, color=red, penwidth=3];' in dot
    assert 'n1 -> n3 [label="SEND", style=solid, color=gray, penwidth=1];' in dot
    # duplicate canonical edges are drawn once
    assert dot.count('n1 -> n3') == 1
