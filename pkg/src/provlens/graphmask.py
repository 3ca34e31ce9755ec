"""Window-level deterministic edge importance.

A soft mask over a context's neighborhood edges is gradient-descended to
keep the model's loss on the masked graph close to the original loss
while paying for mask mass and mask entropy. Per-event masks are then
averaged per canonical edge into a window aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import EventContext, Relation
from .model import TgnModel


@dataclass(frozen=True)
class GraphMaskConfig:
    epochs: int = 200
    learning_rate: float = 0.01
    sparsity_weight: float = 1e-3
    entropy_weight: float = 1e-3

    def __post_init__(self):
        if min(self.epochs, self.learning_rate,
               self.sparsity_weight, self.entropy_weight) <= 0:
            raise ValueError("all GraphMask hyperparameters must be positive")


@dataclass
class EdgeMask:
    values: np.ndarray        # strictly inside (0, 1)
    objective: float          # best objective reached
    initial_objective: float


@dataclass(frozen=True)
class CanonicalEdge:
    src: int
    dst: int
    relation: Relation


@dataclass
class AggregateRow:
    edge: CanonicalEdge
    weight: float
    count: int


def _binary_entropy(m: np.ndarray) -> np.ndarray:
    return -(m * np.log(m) + (1.0 - m) * np.log(1.0 - m))


def graphmask_explain_event(
    model: TgnModel, ctx: EventContext, config: GraphMaskConfig = GraphMaskConfig()
) -> EdgeMask | None:
    """Optimize the mask for one event; None signals an empty neighborhood.

    Objective: |loss(masked) - loss(original)| + sparsity_weight*sum(m)
    + entropy_weight*sum(H(m)), minimized by plain gradient descent on
    the mask logits (initialized at 0, i.e. m = 0.5). The best iterate
    seen is returned, so the result never exceeds the initial objective.
    """
    n = len(ctx.neighborhood_events)
    if n == 0:
        return None

    loss_orig = model.score_event(ctx)
    theta = np.zeros(n)

    def objective(m: np.ndarray) -> tuple[float, float]:
        _, loss = model.masked_forward(ctx, m)
        j = (
            abs(loss - loss_orig)
            + config.sparsity_weight * m.sum()
            + config.entropy_weight * _binary_entropy(m).sum()
        )
        return j, loss

    m = _sigmoid(theta)
    best_j, loss = objective(m)
    initial_j = best_j
    best_m = m.copy()

    for _ in range(config.epochs):
        dl_dm = model.mask_gradient(ctx, m)
        sign = np.sign(loss - loss_orig)
        dj_dm = (
            sign * dl_dm
            + config.sparsity_weight
            + config.entropy_weight * np.log((1.0 - m) / m)
        )
        theta -= config.learning_rate * dj_dm * m * (1.0 - m)
        m = _sigmoid(theta)
        j, loss = objective(m)
        if j < best_j:
            best_j = j
            best_m = m.copy()

    return EdgeMask(values=best_m, objective=best_j, initial_objective=initial_j)


def graphmask_aggregate(
    masks: list[tuple[EventContext, EdgeMask]]
) -> list[AggregateRow]:
    """Mean mask value and appearance count per canonical (src, dst,
    relation) edge, sorted by descending weight."""
    if not masks:
        raise ValueError("cannot aggregate an empty mask list")
    sums: dict[CanonicalEdge, float] = {}
    counts: dict[CanonicalEdge, int] = {}
    for ctx, mask in masks:
        for ev, value in zip(ctx.neighborhood_events, mask.values):
            key = CanonicalEdge(ev.src, ev.dst, ev.relation)
            sums[key] = sums.get(key, 0.0) + float(value)
            counts[key] = counts.get(key, 0) + 1
    rows = [
        AggregateRow(edge=k, weight=sums[k] / counts[k], count=counts[k])
        for k in sums
    ]
    rows.sort(key=lambda r: (-r.weight, r.edge.src, r.edge.dst, r.edge.relation.value))
    return rows


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))
