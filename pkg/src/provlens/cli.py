"""Command-line front end.

Subcommands mirror the pipeline stages: generate, train, detect,
explain, ablate, report. A JSON config file can override any model,
detector, pipeline, or explainer field. Exit codes: 0 success,
2 argument/input error, 3 resource error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import (
    DatasetFormatError,
    ParseError,
    default_scenario,
    generate_scenario,
    load_dataset,
    render_log,
    save_dataset,
)
from .detect import (
    THRESHOLD_SIGMA_FACTOR,
    AttackSubgraph,
    DetectorConfig,
    WindowStats,
    link_queues,
    save_alerts,
    score_all_windows,
)
from .gnnexplainer import GnnExplainerConfig
from .graphmask import CanonicalEdge, GraphMaskConfig
from .harness import ablate_edge, ablation_csv, baseline_row
from .model import (
    CheckpointError,
    DivergenceError,
    ModelConfig,
    TgnModel,
    score_stream,
    train,
)
from .pipeline import PipelineConfig, ResourceError, run_pipeline
from .report import emit_graph_description, emit_json, emit_markdown, parse_report_json
from .vatg import VatgConfig

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_RESOURCE = 3

_ARGUMENT_ERRORS = (
    ValueError,
    TypeError,
    KeyError,
    FileNotFoundError,
    ParseError,
    DatasetFormatError,
    CheckpointError,
    json.JSONDecodeError,
)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return doc


def _section(cfg: dict, name: str, cls):
    return cls(**cfg.get(name, {}))


def _pipeline_config(cfg: dict) -> PipelineConfig:
    fields = dict(cfg.get("pipeline", {}))
    return PipelineConfig(
        graphmask=_section(cfg, "graphmask", GraphMaskConfig),
        gnn=_section(cfg, "gnn", GnnExplainerConfig),
        vatg=_section(cfg, "vatg", VatgConfig),
        **fields,
    )


def _window_stats(model: TgnModel) -> WindowStats:
    s = model.stats
    return WindowStats(
        mu=s.mu,
        sigma=s.sigma,
        threshold=s.mu + THRESHOLD_SIGMA_FACTOR * s.sigma,
    )


def _detect(model, dataset, det_cfg):
    contexts = score_stream(model, dataset)
    stats = _window_stats(model)
    verdicts = score_all_windows(dataset.graph, contexts, stats, det_cfg)
    alerts = link_queues(verdicts, stats, det_cfg)
    return contexts, stats, alerts


def _window_subgraph(graph, report, entities) -> AttackSubgraph:
    t0, t1 = report.window
    idxs = [
        i
        for i in graph.window_slice(t0, t1)
        if graph.events[i].src in entities or graph.events[i].dst in entities
    ]
    nodes = set(entities)
    for i in idxs:
        nodes.update((graph.events[i].src, graph.events[i].dst))
    return AttackSubgraph(
        nodes=nodes, event_indexes=idxs, events=[graph.events[i] for i in idxs]
    )


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def _cmd_generate(args) -> int:
    spec = default_scenario(seed=args.seed)
    dataset = generate_scenario(spec)
    save_dataset(dataset, args.out)
    if args.log:
        Path(args.log).write_text(render_log(dataset))
    print(f"wrote {len(dataset.graph)} events to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset(args.dataset)
    model = train(dataset, _section(cfg, "model", ModelConfig))
    model.save(args.out)
    print(
        f"trained head; benign mu={model.stats.mu:.4f} "
        f"sigma={model.stats.sigma:.4f}; checkpoint at {args.out}"
    )
    return EXIT_OK


def _cmd_detect(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset(args.dataset)
    model = TgnModel.load(args.model)
    det_cfg = _section(cfg, "detector", DetectorConfig)
    _, _, alerts = _detect(model, dataset, det_cfg)
    save_alerts(alerts, args.out)
    raised = sum(1 for a in alerts if a.raised)
    print(f"{len(alerts)} alert(s), {raised} raised; wrote {args.out}")
    return EXIT_OK


def _cmd_explain(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset(args.dataset)
    model = TgnModel.load(args.model)
    det_cfg = _section(cfg, "detector", DetectorConfig)
    pipe_cfg = _pipeline_config(cfg)
    contexts, stats, alerts = _detect(model, dataset, det_cfg)
    raised = [a for a in alerts if a.raised]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    node_map = dataset.graph.nodes
    md_parts: list[str] = []
    n = 0
    for alert in raised:
        result = run_pipeline(model, dataset, alert, stats, pipe_cfg,
                              contexts=contexts)
        for wr in result.windows:
            doc = emit_json(wr, node_map)
            (out_dir / f"explanations_{doc['window']}.json").write_text(
                json.dumps(doc, indent=2) + "\n"
            )
            md_parts.append(emit_markdown(wr, node_map))
            sub = _window_subgraph(dataset.graph, wr, alert.entities)
            (out_dir / f"window_{n}.gv").write_text(
                emit_graph_description(wr, sub, node_map)
            )
            n += 1
        md_parts.extend(w + "\n" for w in result.warnings)
    if not raised:
        md_parts.append("No raised alerts; nothing to explain.\n")
    (out_dir / "summary.md").write_text("\n".join(md_parts))
    print(f"explained {n} window(s); outputs in {out_dir}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset(args.dataset)
    model = TgnModel.load(args.model)
    det_cfg = _section(cfg, "detector", DetectorConfig)
    report = parse_report_json(json.loads(Path(args.report).read_text()))

    _, stats, alerts = _detect(model, dataset, det_cfg)
    t0, t1 = report.window
    raised = [
        a
        for a in alerts
        if a.raised and not (a.t_end < t0 or a.t_start > t1)
    ]
    if not raised:
        raise ValueError(
            "no raised alert overlaps the report window; nothing to ablate"
        )
    alert = raised[0]

    from .graph import Relation

    rows = [baseline_row()]
    for row in report.graphmask_aggregate[: args.top]:
        edge = CanonicalEdge(row["src"], row["dst"], Relation(row["relation"]))
        rows.append(
            ablate_edge(model, dataset, stats, alert, edge, det_cfg,
                        graphmask_score=row["weight"])
        )
    Path(args.out).write_text(ablation_csv(rows))
    print(f"wrote {len(rows)} ablation row(s) to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = None
    node_map: dict = {}
    if args.dataset:
        dataset = load_dataset(args.dataset)
        graph = dataset.graph
        node_map = dataset.graph.nodes
    md_parts = []
    for n, path in enumerate(args.json):
        wr = parse_report_json(json.loads(Path(path).read_text()))
        md_parts.append(emit_markdown(wr, node_map))
        if graph is not None:
            entities = {node["node_id"] for node in wr.nodes}
            sub = _window_subgraph(graph, wr, entities)
            (out_dir / f"window_{n}.gv").write_text(
                emit_graph_description(wr, sub, node_map)
            )
    (out_dir / "summary.md").write_text("\n".join(md_parts))
    print(f"re-rendered {len(args.json)} report(s) into {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="provlens",
        description="explainable provenance-based intrusion detection",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a labeled scenario")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--log", help="also write the raw text log here")
    g.set_defaults(fn=_cmd_generate)

    t = sub.add_parser("train", help="fit the model on a dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.set_defaults(fn=_cmd_train)

    d = sub.add_parser("detect", help="score a dataset and emit alerts")
    d.add_argument("--dataset", required=True)
    d.add_argument("--model", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--config")
    d.set_defaults(fn=_cmd_detect)

    e = sub.add_parser("explain", help="explain raised alerts")
    e.add_argument("--dataset", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--config")
    e.set_defaults(fn=_cmd_explain)

    a = sub.add_parser("ablate", help="edge-ablation table from a report")
    a.add_argument("--dataset", required=True)
    a.add_argument("--model", required=True)
    a.add_argument("--report", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--top", type=int, default=3)
    a.add_argument("--config")
    a.set_defaults(fn=_cmd_ablate)

    r = sub.add_parser("report", help="re-render report JSON")
    r.add_argument("--out-dir", required=True)
    r.add_argument("--dataset")
    r.add_argument("json", nargs="+")
    r.set_defaults(fn=_cmd_report)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ResourceError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except _ARGUMENT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT


if __name__ == "__main__":
    sys.exit(main())
