"""Fidelity-scored explainer: hard-mask metrics and mask optimization."""

import numpy as np
import pytest

from provlens.gnnexplainer import (
    GnnExplainerConfig,
    fidelity,
    gnn_explain_event,
)

from test_model import _tiny_model


def test_config_validation():
    with pytest.raises(ValueError):
        GnnExplainerConfig(top_k=0)
    with pytest.raises(ValueError):
        GnnExplainerConfig(learning_rate=-1.0)


def test_fidelity_exact_anchors(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    for ctx in ctxs:
        n = len(ctx.neighborhood_events)
        full = fidelity(model, ctx, range(n))
        empty = fidelity(model, ctx, [])
        assert full.sufficiency == 0.0
        assert empty.comprehensiveness == 0.0


def test_fidelity_matches_direct_probabilities(tiny_graph):
    """Oracle: recompute P_original, P_removed, P_kept by hand."""
    from provlens.model import RELATION_INDEX

    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    n = len(ctx.neighborhood_events)
    assert n >= 2
    subset = [0]
    y = RELATION_INDEX[ctx.target.relation]

    def p(mask):
        probs, _ = model.masked_forward(ctx, mask)
        return probs[y]

    removed = np.ones(n)
    removed[0] = 0.0
    kept = np.zeros(n)
    kept[0] = 1.0
    metrics = fidelity(model, ctx, subset)
    assert metrics.comprehensiveness == pytest.approx(p(np.ones(n)) - p(removed))
    assert metrics.sufficiency == pytest.approx(p(np.ones(n)) - p(kept))


def test_fidelity_subset_deduplicated(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    a = fidelity(model, ctx, [0, 0, 1])
    b = fidelity(model, ctx, [0, 1])
    assert a == b


def test_fidelity_rejects_out_of_range(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    with pytest.raises(IndexError):
        fidelity(model, ctx, [len(ctx.neighborhood_events)])
    with pytest.raises(IndexError):
        fidelity(model, ctx, [-1])


def test_explain_empty_neighborhood_is_none(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    assert gnn_explain_event(model, ctxs[0]) is None


def test_explanation_shape_and_determinism(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    cfg = GnnExplainerConfig(epochs=40)
    a = gnn_explain_event(model, ctx, cfg)
    b = gnn_explain_event(model, ctx, cfg)
    assert a.event_index == ctx.target_index
    assert len(a.top_edges) == min(cfg.top_k, len(ctx.neighborhood_events))
    np.testing.assert_array_equal(a.mask, b.mask)
    assert a.fidelity == b.fidelity
    # top edges sorted by descending importance
    weights = [w for *_, w in a.top_edges]
    assert weights == sorted(weights, reverse=True)


def test_top_edges_match_mask_ranking(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    cfg = GnnExplainerConfig(epochs=40, top_k=2)
    out = gnn_explain_event(model, ctx, cfg)
    order = sorted(range(len(out.mask)), key=lambda i: (-out.mask[i], i))
    expected = [
        (ctx.neighborhood_events[i].src,
         ctx.neighborhood_events[i].dst,
         ctx.neighborhood_events[i].relation,
         pytest.approx(out.mask[i]))
        for i in order[:2]
    ]
    assert out.top_edges == expected
