"""Variational temporal edge-mask explainer.

Each neighborhood edge gets logistic-normal mask parameters (mu,
log_var). Masks are sampled via the reparameterization trick

    m = sigmoid(mu + eps * exp(0.5 * log_var)),   eps ~ N(0, 1)

and (mu, log_var) are optimized on a Monte Carlo estimate of the masked
cross-entropy plus a closed-form KL penalty toward the unit Gaussian
prior and a sparsity penalty on the largest mask means. The mask means
sigmoid(mu) serve as edge importances; the loss trace is kept as an
optimization diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import EventContext, Relation
from .model import TgnModel

_INIT_LOG_VAR = -2.0


@dataclass(frozen=True)
class VatgConfig:
    lambda_kl: float = 1e-3
    lambda_sp: float = 1e-3
    mc_samples: int = 8
    epochs: int = 150
    learning_rate: float = 0.01
    sparsity_top_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lambda_kl <= 0 or self.lambda_sp <= 0:
            raise ValueError("penalty weights must be positive")
        if self.mc_samples < 1 or self.epochs < 1 or self.sparsity_top_k < 1:
            raise ValueError("mc_samples, epochs, sparsity_top_k must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class VariationalMaskParams:
    mu: np.ndarray
    log_var: np.ndarray

    def __len__(self) -> int:
        return len(self.mu)


@dataclass
class VatgExplanation:
    event_index: int
    params: VariationalMaskParams
    importance: np.ndarray          # sigmoid(mu)
    trace: list[float]              # per-epoch loss values
    top_edges: list[tuple[int, int, Relation, float]]


def sample_mask(params: VariationalMaskParams, epsilon: np.ndarray) -> np.ndarray:
    """m = sigmoid(mu + eps * exp(0.5 * log_var)); eps = 0 gives sigmoid(mu)."""
    epsilon = np.asarray(epsilon, dtype=float)
    if epsilon.shape != params.mu.shape:
        raise ValueError(
            f"epsilon shape {epsilon.shape} != params shape {params.mu.shape}"
        )
    return _sigmoid(params.mu + epsilon * np.exp(0.5 * params.log_var))


def kl_term(params: VariationalMaskParams) -> float:
    """Closed-form KL(N(mu, sigma^2) || N(0, 1)), summed over edges."""
    mu, lv = params.mu, params.log_var
    return float(0.5 * np.sum(mu * mu + np.exp(lv) - 1.0 - lv))


def _sparsity_penalty(params: VariationalMaskParams, k: int) -> tuple[float, np.ndarray]:
    """Sum of the k largest mask means, plus its subgradient w.r.t. mu."""
    means = _sigmoid(params.mu)
    n = len(means)
    top = np.argsort(-means, kind="stable")[: min(k, n)]
    grad = np.zeros(n)
    grad[top] = means[top] * (1.0 - means[top])
    return float(means[top].sum()), grad


def vatg_loss(
    model: TgnModel,
    ctx: EventContext,
    params: VariationalMaskParams,
    config: VatgConfig,
    epsilons: np.ndarray,
) -> float:
    """Monte Carlo objective at fixed noise draws (one row per sample)."""
    if len(ctx.neighborhood_events) == 0:
        raise ValueError("empty neighborhood")
    ce = 0.0
    for eps in epsilons:
        _, loss = model.masked_forward(ctx, sample_mask(params, eps))
        ce += loss
    ce /= len(epsilons)
    omega, _ = _sparsity_penalty(params, config.sparsity_top_k)
    return ce + config.lambda_kl * kl_term(params) + config.lambda_sp * omega


def vatg_gradients(
    model: TgnModel,
    ctx: EventContext,
    params: VariationalMaskParams,
    config: VatgConfig,
    epsilons: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form gradients of the objective w.r.t. (mu, log_var)."""
    n = len(params)
    d_mu = np.zeros(n)
    d_lv = np.zeros(n)
    for eps in epsilons:
        m = sample_mask(params, eps)
        dl_dm = model.mask_gradient(ctx, m)
        jac = m * (1.0 - m)
        d_mu += dl_dm * jac
        d_lv += dl_dm * jac * eps * 0.5 * np.exp(0.5 * params.log_var)
    d_mu /= len(epsilons)
    d_lv /= len(epsilons)

    d_mu += config.lambda_kl * params.mu
    d_lv += config.lambda_kl * 0.5 * (np.exp(params.log_var) - 1.0)

    _, omega_grad = _sparsity_penalty(params, config.sparsity_top_k)
    d_mu += config.lambda_sp * omega_grad
    return d_mu, d_lv


def vatg_explain_event(
    model: TgnModel,
    ctx: EventContext,
    config: VatgConfig = VatgConfig(),
) -> VatgExplanation | None:
    """Optimize the variational mask parameters for one event.

    Fresh noise is drawn from the seeded stream at every step; the
    best-loss iterate is returned (the objective is noisy, so the last
    iterate is not necessarily the best). None on empty neighborhood.
    """
    n = len(ctx.neighborhood_events)
    if n == 0:
        return None

    rng = np.random.default_rng(config.seed)
    params = VariationalMaskParams(
        mu=np.zeros(n), log_var=np.full(n, _INIT_LOG_VAR)
    )
    trace: list[float] = []
    best_loss = np.inf
    best = (params.mu.copy(), params.log_var.copy())

    for _ in range(config.epochs):
        eps = rng.standard_normal((config.mc_samples, n))
        loss = vatg_loss(model, ctx, params, config, eps)
        if not np.isfinite(loss):
            raise RuntimeError("variational explainer diverged to non-finite loss")
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best = (params.mu.copy(), params.log_var.copy())
        d_mu, d_lv = vatg_gradients(model, ctx, params, config, eps)
        params.mu -= config.learning_rate * d_mu
        params.log_var -= config.learning_rate * d_lv

    final = VariationalMaskParams(mu=best[0], log_var=best[1])
    importance = _sigmoid(final.mu)
    order = sorted(range(n), key=lambda i: (-importance[i], i))
    top_edges = [
        (ctx.neighborhood_events[i].src,
         ctx.neighborhood_events[i].dst,
         ctx.neighborhood_events[i].relation,
         float(importance[i]))
        for i in order[:3]
    ]
    return VatgExplanation(
        event_index=ctx.target_index,
        params=final,
        importance=importance,
        trace=trace,
        top_edges=top_edges,
    )


@dataclass
class NodeAggregateRow:
    src: int
    dst: int
    relation: Relation
    mean: float
    var: float


def vatg_aggregate_node(
    explanations: list[tuple[EventContext, VatgExplanation]]
) -> list[NodeAggregateRow]:
    """Mean and population variance of sigmoid(mu) per canonical edge
    across a node's events. This is cross-event dispersion; the per-edge
    posterior variance stays internal."""
    if not explanations:
        raise ValueError("cannot aggregate an empty explanation list")
    values: dict[tuple[int, int, Relation], list[float]] = {}
    for ctx, expl in explanations:
        for ev, imp in zip(ctx.neighborhood_events, expl.importance):
            values.setdefault((ev.src, ev.dst, ev.relation), []).append(float(imp))
    rows = []
    for (src, dst, rel), vals in values.items():
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        rows.append(NodeAggregateRow(src=src, dst=dst, relation=rel,
                                     mean=mean, var=var))
    rows.sort(key=lambda r: (-r.mean, r.src, r.dst, r.relation.value))
    return rows


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))
