"""Model behavior: masked forward pass, gradients, training, checkpoints."""

import numpy as np
import pytest

from provlens.graph import Event, OrderingError, Relation, extract_context
from provlens.model import (
    CheckpointError,
    ModelConfig,
    TgnModel,
    score_stream,
    train,
)

from conftest import NS, random_contexts


def _tiny_model(tiny_graph, seed=0):
    model = TgnModel(ModelConfig(seed=seed))
    ctxs = []
    for i in range(len(tiny_graph)):
        ctx = extract_context(tiny_graph, i)
        involved = {ctx.target.src, ctx.target.dst}
        for ev in ctx.neighborhood_events:
            involved.update((ev.src, ev.dst))
        ctx.node_states = model.snapshot_states(involved)
        ctxs.append(ctx)
        model.replay_update(tiny_graph.events[i])
    return model, ctxs


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(time_dim=7)
    with pytest.raises(ValueError):
        ModelConfig(embed_dim=0)
    with pytest.raises(ValueError):
        ModelConfig(learning_rate=0.0)


def test_all_ones_mask_matches_unmasked(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    for ctx in ctxs:
        _, loss = model.masked_forward(ctx, np.ones(len(ctx.neighborhood_events)))
        assert loss == model.score_event(ctx)


def test_mask_validation(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    n = len(ctx.neighborhood_events)
    assert n > 0
    with pytest.raises(ValueError):
        model.masked_forward(ctx, np.ones(n + 1))
    with pytest.raises(ValueError):
        model.masked_forward(ctx, np.full(n, 1.5))
    with pytest.raises(ValueError):
        model.masked_forward(ctx, np.full(n, -0.1))


def test_zero_mask_drops_neighborhood(tiny_graph):
    """With the mask at zero the prediction must ignore the messages: it
    must match a forward pass on a context with no neighborhood at all."""
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[-1]
    probs_zero, _ = model.masked_forward(ctx, np.zeros(len(ctx.neighborhood_events)))
    bare = extract_context(tiny_graph, ctx.target_index)
    bare.node_states = ctx.node_states
    bare.neighborhood = []
    bare.neighborhood_events = []
    probs_bare, _ = model.masked_forward(bare, np.zeros(0))
    np.testing.assert_allclose(probs_zero, probs_bare, atol=1e-12)


def test_mask_gradient_matches_finite_differences(tiny_graph):
    """Oracle: central finite differences of the masked loss."""
    model, ctxs = _tiny_model(tiny_graph)
    rng = np.random.default_rng(3)
    checked = 0
    for ctx in ctxs:
        n = len(ctx.neighborhood_events)
        if n == 0:
            continue
        mask = rng.uniform(0.2, 0.8, n)
        grad = model.mask_gradient(ctx, mask)
        h = 1e-6
        for j in range(n):
            up, dn = mask.copy(), mask.copy()
            up[j] += h
            dn[j] -= h
            _, lu = model.masked_forward(ctx, up)
            _, ld = model.masked_forward(ctx, dn)
            fd = (lu - ld) / (2 * h)
            assert grad[j] == pytest.approx(fd, abs=1e-6, rel=1e-5)
            checked += 1
    assert checked >= 5


def test_empty_neighborhood_gradient(tiny_graph):
    model, ctxs = _tiny_model(tiny_graph)
    ctx = ctxs[0]
    assert ctx.neighborhood_events == []
    assert model.mask_gradient(ctx, np.zeros(0)).shape == (0,)


def test_replay_rejects_out_of_order(tiny_graph):
    model, _ = _tiny_model(tiny_graph)
    with pytest.raises(OrderingError):
        model.replay_update(Event(0, 3, Relation.READ, 0))


def test_snapshot_states_are_copies(tiny_graph):
    model, _ = _tiny_model(tiny_graph)
    snap = model.snapshot_states([0])
    snap[0][0][:] = 99.0
    assert not np.allclose(model.memory_of(0), 99.0)


def test_training_is_deterministic(dataset):
    cfg = ModelConfig(epochs=20)
    a = train(dataset, cfg)
    b = train(dataset, cfg)
    np.testing.assert_array_equal(a.We, b.We)
    np.testing.assert_array_equal(a.Wo, b.Wo)
    assert a.stats == b.stats


def test_training_uses_only_pre_attack_events(dataset, model):
    """Held-out statistics come from benign events before the attack."""
    assert model.stats.sigma > 0
    assert model.stats.mu > 0
    assert np.isfinite(model.stats.final_train_loss)


def test_score_stream_is_pure(model, dataset, contexts):
    again = score_stream(model, dataset)
    assert [c.loss for c in again] == [c.loss for c in contexts]
    assert [c.truth_label for c in again] == [c.truth_label for c in contexts]


def test_score_stream_carries_labels(contexts, dataset):
    assert len(contexts) == len(dataset.graph)
    assert [c.truth_label for c in contexts] == dataset.labels
    assert all(c.loss >= 0 for c in contexts)


def test_checkpoint_round_trip(model, contexts, tmp_path):
    p = tmp_path / "ckpt.json"
    model.save(p)
    loaded = TgnModel.load(p)
    sample = random_contexts(contexts, np.random.default_rng(0), 10)
    for ctx in sample:
        assert loaded.score_event(ctx) == model.score_event(ctx)
    assert loaded.stats == model.stats


def test_checkpoint_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        TgnModel.load(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("not json")
    with pytest.raises(CheckpointError):
        TgnModel.load(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text('{"version": 999}')
    with pytest.raises(CheckpointError):
        TgnModel.load(wrong)


def test_train_rejects_empty_dataset():
    from provlens.data import LabeledDataset
    from provlens.graph import TemporalGraph

    empty = LabeledDataset(TemporalGraph(), [], (0, 0))
    with pytest.raises(ValueError):
        train(empty, ModelConfig())
