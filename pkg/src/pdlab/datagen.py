"""Ground-truth models and labelled example sampling.

Two generating models are supported:

* ``linear``: 32 binary features in two groups of 16, log-odds ``x @ theta``.
* ``quadratic``: 8 blocks of 4 binary features, log-odds ``sum_b x_b' L_b x_b``
  with each ``L_b`` lower triangular.

Weights of both are drawn from an equal-weight mixture of N(-2, 1), N(0, 1)
and N(2, 1).  Labels are in {-1, +1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import expit

N_FEATURES = 32
LINEAR_GROUP = 16
QUAD_BLOCKS = 8
QUAD_BLOCK_SIZE = 4

MIXTURE_MEANS = (-2.0, 0.0, 2.0)
MIXTURE_SD = 1.0


@dataclass(frozen=True)
class MixtureSpec:
    means: tuple[float, ...] = MIXTURE_MEANS
    component_sd: float = MIXTURE_SD

    @property
    def component_prior(self) -> float:
        return 1.0 / len(self.means)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        component = rng.integers(len(self.means), size=size)
        mu = np.asarray(self.means)[component]
        return rng.normal(mu, self.component_sd)


MIXTURE = MixtureSpec()


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def feature_probability(kind: str, j: int) -> float:
    """Prior activation probability of the ``j``-th feature (1-based) in a group."""
    if kind == "linear":
        if not 1 <= j <= LINEAR_GROUP:
            raise ValueError(f"linear feature index must be in 1..{LINEAR_GROUP}, got {j}")
        return 6.0 / (j * math.pi) ** 2
    if kind == "quadratic":
        if not 1 <= j <= QUAD_BLOCK_SIZE:
            raise ValueError(f"quadratic feature index must be in 1..{QUAD_BLOCK_SIZE}, got {j}")
        return 90.0 / (j * math.pi) ** 4
    raise ValueError(f"unknown truth kind {kind!r}")


def _linear_priors() -> np.ndarray:
    group = [feature_probability("linear", j) for j in range(1, LINEAR_GROUP + 1)]
    return np.array(group * (N_FEATURES // LINEAR_GROUP))


def _quadratic_block_priors() -> np.ndarray:
    return np.array([feature_probability("quadratic", j) for j in range(1, QUAD_BLOCK_SIZE + 1)])


@dataclass(frozen=True, eq=False)
class LinearTruth:
    theta: np.ndarray
    feature_priors: np.ndarray

    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta))
        object.__setattr__(self, "feature_priors", _frozen(self.feature_priors))
        if self.theta.shape != (N_FEATURES,) or self.feature_priors.shape != (N_FEATURES,):
            raise ValueError("linear truth needs 32 weights and 32 priors")

    def log_odds(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.theta

    def __eq__(self, other):
        return (
            isinstance(other, LinearTruth)
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.feature_priors, other.feature_priors)
        )


@dataclass(frozen=True, eq=False)
class QuadraticTruth:
    blocks: np.ndarray  # (8, 4, 4), strictly-upper entries zero
    block_priors: np.ndarray  # (4,)

    kind = "quadratic"

    def __post_init__(self):
        blocks = np.tril(np.asarray(self.blocks, dtype=np.float64))
        if blocks.shape != (QUAD_BLOCKS, QUAD_BLOCK_SIZE, QUAD_BLOCK_SIZE):
            raise ValueError("quadratic truth needs 8 blocks of 4x4")
        object.__setattr__(self, "blocks", _frozen(blocks))
        object.__setattr__(self, "block_priors", _frozen(self.block_priors))

    @property
    def feature_priors(self) -> np.ndarray:
        return np.tile(self.block_priors, QUAD_BLOCKS)

    def dense(self) -> np.ndarray:
        """The block-diagonal 32x32 matrix."""
        out = np.zeros((N_FEATURES, N_FEATURES))
        for b in range(QUAD_BLOCKS):
            sl = slice(b * QUAD_BLOCK_SIZE, (b + 1) * QUAD_BLOCK_SIZE)
            out[sl, sl] = self.blocks[b]
        return out

    def log_odds(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        Xb = X.reshape(X.shape[:-1] + (QUAD_BLOCKS, QUAD_BLOCK_SIZE))
        return np.einsum("...bi,bij,...bj->...", Xb, self.blocks, Xb)

    def __eq__(self, other):
        return (
            isinstance(other, QuadraticTruth)
            and np.array_equal(self.blocks, other.blocks)
            and np.array_equal(self.block_priors, other.block_priors)
        )


Truth = Union[LinearTruth, QuadraticTruth]


def sample_linear_truth(rng: np.random.Generator) -> LinearTruth:
    return LinearTruth(MIXTURE.sample(rng, N_FEATURES), _linear_priors())


def sample_quadratic_truth(rng: np.random.Generator) -> QuadraticTruth:
    rows, cols = np.tril_indices(QUAD_BLOCK_SIZE)
    blocks = np.zeros((QUAD_BLOCKS, QUAD_BLOCK_SIZE, QUAD_BLOCK_SIZE))
    values = MIXTURE.sample(rng, (QUAD_BLOCKS, rows.size))
    blocks[:, rows, cols] = values
    return QuadraticTruth(blocks, _quadratic_block_priors())


def sample_truth(kind: str, rng: np.random.Generator) -> Truth:
    if kind == "linear":
        return sample_linear_truth(rng)
    if kind == "quadratic":
        return sample_quadratic_truth(rng)
    raise ValueError(f"unknown truth kind {kind!r}")


def true_log_odds(truth: Truth, x) -> np.ndarray | float:
    out = truth.log_odds(x)
    return float(out) if np.ndim(out) == 0 else out


def label_probability(truth: Truth, x, y) -> np.ndarray | float:
    """P(y | x) under the truth, ``y`` in {-1, +1}."""
    y = np.asarray(y)
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be -1 or +1")
    out = expit(y * truth.log_odds(x))
    return float(out) if np.ndim(out) == 0 else out


def sample_features(truth: Truth, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` binary feature vectors as a ``(n, 32)`` uint8 array.

    Uniforms are single precision; a prior is resolved to within 2**-24.
    """
    u = rng.random((n, N_FEATURES), dtype=np.float32)
    return (u < truth.feature_priors.astype(np.float32)).view(np.uint8)


def sample_examples(truth: Truth, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` labelled examples; returns ``(X uint8 (n, 32), y int8 (n,))``."""
    X = sample_features(truth, rng, n)
    p_pos = expit(truth.log_odds(X))
    y = np.where(rng.random(n) < p_pos, 1, -1).astype(np.int8)
    return X, y


def sample_example(truth: Truth, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    X, y = sample_examples(truth, rng, 1)
    return X[0], int(y[0])


# -- text serialization -------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def dump_truth(truth: Truth) -> str:
    lines = [f"kind = {truth.kind}"]
    if isinstance(truth, LinearTruth):
        lines += [f"theta.{j} = {_fmt(v)}" for j, v in enumerate(truth.theta)]
        lines += [f"prior.{j} = {_fmt(v)}" for j, v in enumerate(truth.feature_priors)]
    else:
        rows, cols = np.tril_indices(QUAD_BLOCK_SIZE)
        for b in range(QUAD_BLOCKS):
            lines += [f"block.{b}.{i}.{j} = {_fmt(truth.blocks[b, i, j])}" for i, j in zip(rows, cols)]
        lines += [f"prior.{j} = {_fmt(v)}" for j, v in enumerate(truth.block_priors)]
    return "\n".join(lines) + "\n"


def parse_truth(text: str) -> Truth:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    kind = values.pop("kind", None)
    try:
        if kind == "linear":
            theta = [float(values[f"theta.{j}"]) for j in range(N_FEATURES)]
            priors = [float(values[f"prior.{j}"]) for j in range(N_FEATURES)]
            return LinearTruth(np.array(theta), np.array(priors))
        if kind == "quadratic":
            blocks = np.zeros((QUAD_BLOCKS, QUAD_BLOCK_SIZE, QUAD_BLOCK_SIZE))
            for b in range(QUAD_BLOCKS):
                for i, j in zip(*np.tril_indices(QUAD_BLOCK_SIZE)):
                    blocks[b, i, j] = float(values[f"block.{b}.{i}.{j}"])
            priors = [float(values[f"prior.{j}"]) for j in range(QUAD_BLOCK_SIZE)]
            return QuadraticTruth(blocks, np.array(priors))
    except KeyError as exc:
        raise ValueError(f"truth file missing key {exc.args[0]}") from None
    raise ValueError(f"unknown truth kind {kind!r}")


def save_truth(truth: Truth, path) -> None:
    Path(path).write_text(dump_truth(truth))


def load_truth(path) -> Truth:
    return parse_truth(Path(path).read_text())
