"""scikit-learn style wrapper around a single network and its optimizer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted
from threadpoolctl import threadpool_limits

from . import rng as rngmod
from .datagen import N_FEATURES
from .nnet import Activation, ArchitectureSpec, GradientSet, backward, build_network, forward
from .optim import OptimizerConfig, make_state, step


def check_binary_features(X) -> np.ndarray:
    """Validate a 2-D 0/1 feature matrix with 32 columns; returns it as uint8."""
    X = check_array(X, dtype=None, ensure_2d=True)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"X has {X.shape[1]} features, expected {N_FEATURES}")
    if not np.all((X == 0) | (X == 1)):
        raise ValueError("features must be binary (0 or 1)")
    return X.astype(np.uint8)


def check_labels(y, n: int) -> np.ndarray:
    """Map labels in {-1, 1} or {0, 1} to int8 {-1, +1}."""
    y = np.asarray(y).ravel()
    if y.shape[0] != n:
        raise ValueError(f"y has {y.shape[0]} entries, X has {n} rows")
    values = set(np.unique(y).tolist())
    if not values <= {-1, 1} and not values <= {0, 1}:
        raise ValueError(f"labels must be in {{-1, 1}} or {{0, 1}}, got {sorted(values)}")
    return np.where(y == 1, 1, -1).astype(np.int8)


class NetworkClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier trained by one ordered pass of mini-batch steps.

    ``fit`` starts from a fresh initialization drawn from ``init_seed``;
    ``partial_fit`` continues from the current parameters and optimizer state.
    Rows are consumed in the given order, so two estimators with equal
    parameters fed equal data end bit-identical.  ``emulation_seed`` permutes
    rows within each batch before the gradient sum.
    """

    def __init__(
        self,
        architecture="double",
        widths=None,
        activation="identity",
        beta=None,
        optimizer="adagrad",
        learning_rate=0.1,
        accumulator_init=0.1,
        momentum=0.9,
        decay=0.001,
        batch_size=32,
        init_seed=0,
        emulation_seed=None,
        dtype="float64",
        warm_start=False,
    ):
        self.architecture = architecture
        self.widths = widths
        self.activation = activation
        self.beta = beta
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.accumulator_init = accumulator_init
        self.momentum = momentum
        self.decay = decay
        self.batch_size = batch_size
        self.init_seed = init_seed
        self.emulation_seed = emulation_seed
        self.dtype = dtype
        self.warm_start = warm_start

    def _specs(self):
        widths = tuple(self.widths) if self.widths is not None else None
        spec = ArchitectureSpec(self.architecture, widths, Activation(self.activation, self.beta))
        opt = OptimizerConfig(self.optimizer, self.learning_rate, self.accumulator_init, self.momentum, self.decay)
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        return spec, opt

    def _init(self):
        spec, opt = self._specs()
        self.network_ = build_network(spec, rngmod.make_stream(self.init_seed), self.dtype)
        self.optimizer_config_ = opt
        self.state_ = make_state(self.network_, opt)
        self._emul = (
            rngmod.make_stream(self.emulation_seed, rngmod.EMULATION) if self.emulation_seed is not None else None
        )
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = N_FEATURES

    def _train(self, X, y):
        net = self.network_
        grads = GradientSet(net.spec, net.dtype)
        with threadpool_limits(1):
            for start in range(0, X.shape[0], self.batch_size):
                Xb = X[start:start + self.batch_size].astype(net.dtype)
                yb = y[start:start + self.batch_size]
                if self._emul is not None:
                    perm = self._emul.permutation(Xb.shape[0])
                    Xb, yb = Xb[perm], yb[perm]
                step(self.state_, net, backward(net, Xb, yb, out=grads), self.optimizer_config_)
        if not net.is_finite():
            raise FloatingPointError("training produced non-finite parameters")
        return self

    def fit(self, X, y):
        X = check_binary_features(X)
        y = check_labels(y, X.shape[0])
        if not (self.warm_start and hasattr(self, "network_")):
            self._init()
        return self._train(X, y)

    def partial_fit(self, X, y):
        X = check_binary_features(X)
        y = check_labels(y, X.shape[0])
        if not hasattr(self, "network_"):
            self._init()
        return self._train(X, y)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_binary_features(X)
        with threadpool_limits(1):
            return np.asarray(forward(self.network_, X)[0], dtype=np.float64)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_binary_features(X)
        with threadpool_limits(1):
            p = np.asarray(forward(self.network_, X)[1], dtype=np.float64)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)
