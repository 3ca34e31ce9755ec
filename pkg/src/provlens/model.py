"""Compact temporal graph model with per-node memory.

Encoder-decoder over the event stream: each node carries a recurrent
memory vector driven by a fixed, seeded gated update (the recurrent
weights are part of the architecture, not trained), and a trained
two-layer head predicts every event's relation type from the endpoint
memories, a time-delta encoding, and an aggregate of neighborhood edge
messages. The cross-entropy of that prediction against the observed
relation is the anomaly score.

The neighborhood aggregate is a mask-weighted sum, which makes the
forward pass differentiable in every mask entry with a closed-form
gradient; all three explainers are built on that.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .graph import (
    Event,
    EventContext,
    OrderingError,
    RELATION_INDEX,
    RELATIONS,
    TemporalGraph,
    TruthLabel,
    extract_context,
)

CHECKPOINT_VERSION = 1

N_RELATIONS = len(RELATIONS)
NS_PER_S = 1_000_000_000

#: fixed scale applied to the mask-weighted message sum; a constant (rather
#: than a mask-dependent normalizer) keeps the forward pass linear in the
#: mask, so the all-ones identity and the closed-form gradient hold exactly
_AGG_SCALE = 0.5


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class CheckpointError(ValueError):
    """Checkpoint file corrupt or version mismatch."""


@dataclass(frozen=True)
class ModelConfig:
    memory_dim: int = 32
    time_dim: int = 8
    embed_dim: int = 32
    learning_rate: float = 0.01
    epochs: int = 300
    seed: int = 0
    hops: int = 1
    horizon: int = 10

    def __post_init__(self):
        if min(self.memory_dim, self.time_dim, self.embed_dim) <= 0:
            raise ValueError("all dimensions must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.time_dim % 2:
            raise ValueError("time_dim must be even (sin/cos pairs)")


@dataclass
class TrainStats:
    mu: float = 0.0           # mean held-out benign loss
    sigma: float = 0.0        # population std of held-out benign loss
    final_train_loss: float = 0.0


class TgnModel:
    """Stateful model: fixed recurrent memory machinery plus a trained head.

    Memory advances only through :meth:`replay_update`; scoring is pure
    with respect to the node-state snapshots carried by each context.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        mem, tdim, emb = config.memory_dim, config.time_dim, config.embed_dim
        msg_dim = 2 * mem + N_RELATIONS + tdim
        feat_dim = 2 * mem + N_RELATIONS + tdim
        self.input_dim = 2 * mem + tdim + emb

        rng = np.random.default_rng(config.seed)
        # fixed (untrained) recurrent and message weights
        self.Wc = rng.normal(0.0, 1.0 / np.sqrt(msg_dim), (mem, msg_dim))
        self.bc = np.zeros(mem)
        self.Wg = rng.normal(0.0, 1.0 / np.sqrt(msg_dim), (mem, msg_dim))
        self.bg = np.full(mem, -1.0)  # mild updates; memory moves slowly
        self.Wn = rng.normal(0.0, 1.5 / np.sqrt(feat_dim), (emb, feat_dim))
        # trained head
        self.We = rng.normal(0.0, 0.1, (emb, self.input_dim))
        self.be = np.zeros(emb)
        self.Wo = rng.normal(0.0, 0.1, (N_RELATIONS, emb))
        self.bo = np.zeros(N_RELATIONS)

        self.stats = TrainStats()
        self.reset_memory()

    # ------------------------------------------------------------------
    # memory
    # ------------------------------------------------------------------

    def reset_memory(self) -> None:
        self._memory: dict[int, np.ndarray] = {}
        self._last_update: dict[int, int] = {}
        self._last_replay_ts: int | None = None

    def memory_of(self, node_id: int) -> np.ndarray:
        h = self._memory.get(node_id)
        if h is None:
            return np.zeros(self.config.memory_dim)
        return h

    def last_update_of(self, node_id: int) -> int | None:
        return self._last_update.get(node_id)

    def replay_update(self, e: Event) -> None:
        """Advance both endpoint memories with the event's message."""
        if self._last_replay_ts is not None and e.timestamp < self._last_replay_ts:
            raise OrderingError(
                f"replay out of order: {e.timestamp} < {self._last_replay_ts}"
            )
        h_src = self.memory_of(e.src)
        h_dst = self.memory_of(e.dst)
        rel = np.zeros(N_RELATIONS)
        rel[RELATION_INDEX[e.relation]] = 1.0

        new = {}
        for nid, h_self, h_other in ((e.src, h_src, h_dst), (e.dst, h_dst, h_src)):
            dt = e.timestamp - self._last_update.get(nid, e.timestamp)
            msg = np.concatenate([h_self, h_other, rel, self._time_enc(dt)])
            cand = np.tanh(self.Wc @ msg + self.bc)
            gate = _sigmoid(self.Wg @ msg + self.bg)
            new[nid] = (1.0 - gate) * h_self + gate * cand
        for nid, h in new.items():
            self._memory[nid] = h
            self._last_update[nid] = e.timestamp
        self._last_replay_ts = e.timestamp

    def snapshot_states(self, node_ids) -> dict[int, tuple[np.ndarray, int | None]]:
        return {
            nid: (self.memory_of(nid).copy(), self._last_update.get(nid))
            for nid in node_ids
        }

    # ------------------------------------------------------------------
    # forward pass
    # ------------------------------------------------------------------

    def _time_enc(self, dt_ns: int) -> np.ndarray:
        u = np.log1p(max(dt_ns, 0) / NS_PER_S)
        k = self.config.time_dim // 2
        freqs = 2.0 ** (-np.arange(k))
        return np.concatenate([np.sin(u * freqs), np.cos(u * freqs)])

    def _state_of(self, ctx: EventContext, nid: int) -> tuple[np.ndarray, int | None]:
        entry = ctx.node_states.get(nid)
        if entry is None:
            return np.zeros(self.config.memory_dim), None
        return entry

    def _edge_messages(self, ctx: EventContext) -> np.ndarray:
        """(n_edges, embed_dim) fixed messages for the neighborhood."""
        if not ctx.neighborhood_events:
            return np.zeros((0, self.config.embed_dim))
        feats = []
        t = ctx.target.timestamp
        for ev in ctx.neighborhood_events:
            rel = np.zeros(N_RELATIONS)
            rel[RELATION_INDEX[ev.relation]] = 1.0
            h_u, _ = self._state_of(ctx, ev.src)
            h_v, _ = self._state_of(ctx, ev.dst)
            feats.append(
                np.concatenate([h_u, h_v, rel, self._time_enc(t - ev.timestamp)])
            )
        return np.tanh(np.asarray(feats) @ self.Wn.T)

    def _input_vector(self, ctx: EventContext, agg: np.ndarray) -> np.ndarray:
        h_s, lu_s = self._state_of(ctx, ctx.target.src)
        h_d, _ = self._state_of(ctx, ctx.target.dst)
        dt = ctx.target.timestamp - lu_s if lu_s is not None else 0
        return np.concatenate([h_s, h_d, self._time_enc(dt), agg])

    def masked_forward(
        self, ctx: EventContext, mask: np.ndarray
    ) -> tuple[np.ndarray, float]:
        """Prediction and cross-entropy loss with each neighborhood edge's
        message scaled by its mask entry. An all-ones mask reproduces
        :meth:`score_event` exactly.
        """
        mask = np.asarray(mask, dtype=float)
        n = len(ctx.neighborhood_events)
        if mask.shape != (n,):
            raise ValueError(f"mask length {mask.shape} != neighborhood size {n}")
        if n and (mask.min() < 0.0 or mask.max() > 1.0):
            raise ValueError("mask entries must lie in [0, 1]")
        probs, loss, _ = self._forward_parts(ctx, mask)
        return probs, loss

    def _forward_parts(self, ctx: EventContext, mask: np.ndarray):
        msgs = self._edge_messages(ctx)
        scale = _AGG_SCALE
        agg = (mask @ msgs) * scale if len(msgs) else np.zeros(self.config.embed_dim)
        x = self._input_vector(ctx, agg)
        z = np.tanh(self.We @ x + self.be)
        logits = self.Wo @ z + self.bo
        probs = _softmax(logits)
        y = RELATION_INDEX[ctx.target.relation]
        loss = -np.log(max(probs[y], 1e-300))
        return probs, float(loss), (msgs, scale, x, z, probs, y)

    def score_event(self, ctx: EventContext) -> float:
        """Anomaly loss of the event under its full (unmasked) context."""
        _, loss = self.masked_forward(ctx, np.ones(len(ctx.neighborhood_events)))
        return loss

    def predict(self, ctx: EventContext, mask: np.ndarray | None = None) -> np.ndarray:
        if mask is None:
            mask = np.ones(len(ctx.neighborhood_events))
        probs, _ = self.masked_forward(ctx, mask)
        return probs

    def mask_gradient(self, ctx: EventContext, mask: np.ndarray) -> np.ndarray:
        """Closed-form d(loss)/d(mask); matches finite differences."""
        mask = np.asarray(mask, dtype=float)
        _, _, (msgs, scale, x, z, probs, y) = self._forward_parts(ctx, mask)
        if len(msgs) == 0:
            return np.zeros(0)
        dlogits = probs.copy()
        dlogits[y] -= 1.0
        dz = self.Wo.T @ dlogits
        da = (1.0 - z * z) * dz
        dx = self.We.T @ da
        dagg = dx[-self.config.embed_dim:]
        return (msgs @ dagg) * scale

    # ------------------------------------------------------------------
    # checkpoints
    # ------------------------------------------------------------------

    def save(self, path) -> None:
        doc = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "parameters": {
                "We": self.We.tolist(), "be": self.be.tolist(),
                "Wo": self.Wo.tolist(), "bo": self.bo.tolist(),
            },
            "memory": {str(k): v.tolist() for k, v in self._memory.items()},
            "last_update": {str(k): v for k, v in self._last_update.items()},
            "last_replay_ts": self._last_replay_ts,
            "stats": asdict(self.stats),
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path) -> "TgnModel":
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"checkpoint not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"corrupt checkpoint {p}: {exc}") from exc
        if doc.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {doc.get('version')!r}"
            )
        model = cls(ModelConfig(**doc["config"]))
        params = doc["parameters"]
        model.We = np.asarray(params["We"])
        model.be = np.asarray(params["be"])
        model.Wo = np.asarray(params["Wo"])
        model.bo = np.asarray(params["bo"])
        model._memory = {int(k): np.asarray(v) for k, v in doc["memory"].items()}
        model._last_update = {int(k): v for k, v in doc["last_update"].items()}
        model._last_replay_ts = doc["last_replay_ts"]
        model.stats = TrainStats(**doc["stats"])
        return model


# ---------------------------------------------------------------------------
# training and stream scoring
# ---------------------------------------------------------------------------

def training_prefix_end(dataset) -> int | None:
    """Timestamp bound of the benign training prefix (exclusive), or None
    when the dataset carries no attack interval."""
    t0, t1 = dataset.attack_interval
    if (t0, t1) == (0, 0):
        return None
    return t0


def train(dataset, config: ModelConfig) -> TgnModel:
    """Fit the prediction head on the benign prefix of the dataset.

    The prefix (everything before the attack interval, or the whole
    stream when there is none) is split 80/20 by position: the first part
    fits the head, the held-out tail provides the benign loss statistics
    (mu, sigma) the detector thresholds on. Deterministic given the seed.
    """
    if len(dataset.graph) == 0:
        raise ValueError("cannot train on an empty dataset")

    bound = training_prefix_end(dataset)
    events = dataset.graph.events
    if bound is None:
        n_prefix = len(events)
    else:
        n_prefix = sum(1 for e in events if e.timestamp < bound)
    if n_prefix == 0:
        raise ValueError("no benign training prefix before the attack interval")

    model = TgnModel(config)
    contexts = _replay_contexts(model, dataset.graph, n_events=n_prefix)

    X = np.zeros((n_prefix, model.input_dim))
    y = np.zeros(n_prefix, dtype=int)
    scale = _AGG_SCALE
    for i, ctx in enumerate(contexts):
        msgs = model._edge_messages(ctx)
        agg = msgs.sum(axis=0) * scale if len(msgs) else np.zeros(config.embed_dim)
        X[i] = model._input_vector(ctx, agg)
        y[i] = RELATION_INDEX[ctx.target.relation]

    n_fit = max(1, int(round(n_prefix * 0.8)))
    X_fit, y_fit = X[:n_fit], y[:n_fit]

    _fit_head(model, X_fit, y_fit, config)

    # held-out benign statistics (population std), per the detector contract
    X_val, y_val = X[n_fit:], y[n_fit:]
    if len(X_val) == 0:
        X_val, y_val = X_fit, y_fit
    val_losses = _batch_losses(model, X_val, y_val)
    model.stats = TrainStats(
        mu=float(val_losses.mean()),
        sigma=float(val_losses.std()),
        final_train_loss=float(_batch_losses(model, X_fit, y_fit).mean()),
    )
    return model


def _fit_head(model: TgnModel, X: np.ndarray, y: np.ndarray, config: ModelConfig):
    """Full-batch Adam on the two-layer head."""
    n = len(X)
    Y = np.zeros((n, N_RELATIONS))
    Y[np.arange(n), y] = 1.0

    params = [model.We, model.be, model.Wo, model.bo]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = 0.9, 0.999, 1e-8

    for epoch in range(1, config.epochs + 1):
        A = X @ model.We.T + model.be
        Z = np.tanh(A)
        logits = Z @ model.Wo.T + model.bo
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        P = expl / expl.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(np.maximum(P[np.arange(n), y], 1e-300)))
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")

        dlogits = (P - Y) / n
        dWo = dlogits.T @ Z
        dbo = dlogits.sum(axis=0)
        dZ = dlogits @ model.Wo
        dA = (1.0 - Z * Z) * dZ
        dWe = dA.T @ X
        dbe = dA.sum(axis=0)

        grads = [dWe, dbe, dWo, dbo]
        for i, (p, g) in enumerate(zip(params, grads)):
            m[i] = b1 * m[i] + (1 - b1) * g
            v[i] = b2 * v[i] + (1 - b2) * g * g
            mhat = m[i] / (1 - b1**epoch)
            vhat = v[i] / (1 - b2**epoch)
            p -= config.learning_rate * mhat / (np.sqrt(vhat) + eps)


def _batch_losses(model: TgnModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    Z = np.tanh(X @ model.We.T + model.be)
    logits = Z @ model.Wo.T + model.bo
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    P = expl / expl.sum(axis=1, keepdims=True)
    return -np.log(np.maximum(P[np.arange(len(X)), y], 1e-300))


def _replay_contexts(
    model: TgnModel,
    graph: TemporalGraph,
    n_events: int | None = None,
    labels=None,
    score: bool = False,
) -> list[EventContext]:
    """Replay the stream from reset memory, extracting each event's context
    (with node-state snapshots taken before the event's own update)."""
    model.reset_memory()
    n = len(graph) if n_events is None else n_events
    out = []
    for i in range(n):
        ctx = extract_context(graph, i, hops=model.config.hops,
                              horizon=model.config.horizon)
        involved = {ctx.target.src, ctx.target.dst}
        for ev in ctx.neighborhood_events:
            involved.add(ev.src)
            involved.add(ev.dst)
        ctx.node_states = model.snapshot_states(involved)
        if labels is not None:
            ctx.truth_label = labels[i]
        if score:
            ctx.loss = model.score_event(ctx)
        out.append(ctx)
        model.replay_update(graph.events[i])
    return out


def score_stream(model: TgnModel, dataset) -> list[EventContext]:
    """Test-phase pass: replay the full stream, returning one scored
    EventContext per event. Replays from reset memory so results are a
    pure function of (model parameters, stream)."""
    return _replay_contexts(
        model, dataset.graph, labels=dataset.labels, score=True
    )


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()
