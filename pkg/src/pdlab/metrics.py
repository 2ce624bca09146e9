"""Excess label loss, relative prediction difference, and weight diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import rng as rngmod
from .datagen import Truth, sample_features
from .nnet import Network, forward

P_CLAMP = 1e-15


@dataclass(frozen=True, eq=False)
class EvalSet:
    X: np.ndarray  # (N, 32) uint8
    p_true: np.ndarray  # (N,) true P(y=+1 | x)

    def __post_init__(self):
        if self.X.shape[0] != self.p_true.shape[0] or self.X.shape[0] == 0:
            raise ValueError("eval set must be nonempty with one probability per example")

    def __len__(self):
        return self.X.shape[0]


def make_eval_set(truth: Truth, data_seed: int, size: int) -> EvalSet:
    """Fresh draws from a stream keyed by the pair's data seed, disjoint from training."""
    X = sample_features(truth, rngmod.make_stream(data_seed, rngmod.EVAL), size)
    return EvalSet(X, expit(truth.log_odds(X)))


def predict_positive(model, X) -> np.ndarray:
    """P(y=+1 | x) from a Network, anything with ``predict_proba``, or a callable."""
    if isinstance(model, Network):
        return forward(model, np.atleast_2d(X))[1]
    if hasattr(model, "predict_proba"):
        proba = model.predict_proba(X)
        return proba[:, -1] if np.ndim(proba) == 2 else proba
    return np.asarray(model(X), dtype=np.float64)


def excess_label_loss(p_true, p_model) -> float:
    """Mean KL(p_true || p_model) over examples, in nats, for binary labels."""
    p = np.asarray(p_true, dtype=np.float64)
    q = np.clip(np.asarray(p_model, dtype=np.float64), P_CLAMP, 1 - P_CLAMP)
    if p.size == 0:
        raise ValueError("empty evaluation set")
    if p.shape != q.shape:
        raise ValueError("truth and model predictions differ in shape")
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
        neg = np.where(p < 1, (1 - p) * (np.log1p(-p) - np.log1p(-q)), 0.0)
    return float(np.mean(pos + neg))


def model_excess_loss(model, eval_set: EvalSet) -> float:
    return excess_label_loss(eval_set.p_true, predict_positive(model, eval_set.X))


def relative_pd(p_true, pair_predictions) -> float:
    """Mean over examples and pairs of |p_a - p_b| / p_true on the positive label.

    ``pair_predictions`` is a sequence of ``(p_a, p_b)``; a single pair may be
    passed as two positional arrays via :func:`pair_relative_pd`.
    """
    p = np.asarray(p_true, dtype=np.float64)
    pairs = list(pair_predictions)
    if not pairs:
        raise ValueError("need at least one pair")
    total = np.zeros_like(p)
    for pa, pb in pairs:
        total += np.abs(np.asarray(pa, dtype=np.float64) - np.asarray(pb, dtype=np.float64))
    return float(np.mean(total / len(pairs) / p))


def pair_relative_pd(p_true, p_a, p_b) -> float:
    return relative_pd(p_true, [(p_a, p_b)])


def diff_cosine(w_a, w_b, theta) -> float:
    """Cosine between ``w_a - theta`` and ``w_b - theta``; NaN when undefined."""
    da = np.asarray(w_a, dtype=np.float64) - theta
    db = np.asarray(w_b, dtype=np.float64) - theta
    if da.shape != db.shape:
        raise ValueError("weight vectors differ in length")
    na, nb = np.linalg.norm(da), np.linalg.norm(db)
    if na == 0 or nb == 0:
        return float("nan")
    return float(np.clip(da @ db / (na * nb), -1.0, 1.0))


def weight_pairs_export(net_a: Network, net_b: Network) -> list[tuple[str, int, float, float]]:
    """One row ``(layer_id, param_index, value_a, value_b)`` per parameter."""
    if net_a.spec != net_b.spec:
        raise ValueError("networks have different architectures")
    rows = []
    for name, pa, pb in zip(net_a.names, net_a.params, net_b.params):
        for i, (va, vb) in enumerate(zip(pa.ravel(), pb.ravel())):
            rows.append((name, i, float(va), float(vb)))
    return rows


@dataclass
class PairReport:
    pair_index: int
    log2_z: int
    init_mode: str
    activation: str
    arch: str
    optimizer: str
    excess_loss_a: float = float("nan")
    excess_loss_b: float = float("nan")
    relative_pd: float = float("nan")
    diff_cosine: float = float("nan")
    init_seed_a: int = 0
    init_seed_b: int = 0
    stuck_a: bool = False
    stuck_b: bool = False
    status: str = "ok"
    error: str = ""
    variant: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def mean_excess_loss(self) -> float:
        return 0.5 * (self.excess_loss_a + self.excess_loss_b)
