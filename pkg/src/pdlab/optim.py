"""AdaGrad and SGD with momentum and inverse-time learning-rate decay.

Updates are applied in place to the network parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import GradientSet, Network, _views

OPTIMIZER_KINDS = ("adagrad", "sgd")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adagrad"
    lr: float = 0.1
    acc_init: float = 0.1
    momentum: float = 0.9
    decay: float = 0.001

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZER_KINDS}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.acc_init < 0:
            raise ValueError(f"acc_init must be nonnegative, got {self.acc_init}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.decay < 0:
            raise ValueError(f"decay must be nonnegative, got {self.decay}")

    def scaled(self, ratio: float) -> "OptimizerConfig":
        return OptimizerConfig(self.kind, self.lr * ratio, self.acc_init, self.momentum, self.decay)

    def label(self) -> str:
        return f"{self.kind}{self.lr:g}"


class OptimizerState:
    """Per-parameter accumulators (AdaGrad) or velocities (SGD) plus a global step counter.

    ``buffer`` is flat and aligned with ``Network.buffer``; ``slots`` are per-layer views.
    """

    def __init__(self, buffer: np.ndarray, shapes, step_counter: int = 0):
        self.buffer = buffer
        self.shapes = list(shapes)
        self.slots = _views(buffer, self.shapes)
        self.step_counter = step_counter

    def copy(self) -> "OptimizerState":
        return OptimizerState(self.buffer.copy(), self.shapes, self.step_counter)


def make_state(net: Network, cfg: OptimizerConfig) -> OptimizerState:
    fill = cfg.acc_init if cfg.kind == "adagrad" else 0.0
    return OptimizerState(np.full_like(net.buffer, fill), net.spec.shapes())


def _flat_grads(state: OptimizerState, net: Network, grads: GradientSet) -> np.ndarray:
    if state.buffer.shape != net.buffer.shape:
        raise ValueError(f"optimizer state holds {state.buffer.size} values, network {net.buffer.size}")
    buf = getattr(grads, "buffer", None)
    if buf is None:
        if len(grads) != len(net.params) or any(g.shape != p.shape for g, p in zip(grads, net.params)):
            raise ValueError("gradient shapes do not match the network")
        buf = np.concatenate([np.ravel(g) for g in grads]).astype(net.dtype, copy=False)
    elif buf.shape != net.buffer.shape:
        raise ValueError(f"gradient holds {buf.size} values, network {net.buffer.size}")
    return buf


def adagrad_step(state: OptimizerState, net: Network, grads: GradientSet, cfg: OptimizerConfig):
    """acc += g**2; w -= lr * g / sqrt(acc).  No epsilon: acc >= acc_init > 0."""
    g = _flat_grads(state, net, grads)
    acc = state.buffer
    acc += g * g
    net.buffer -= cfg.lr * g / np.sqrt(acc)
    state.step_counter += 1
    return net, state


def sgd_momentum_step(state: OptimizerState, net: Network, grads: GradientSet, cfg: OptimizerConfig):
    """v = m*v - lr_t*g; w += v, with lr_t = lr / (1 + decay * step)."""
    g = _flat_grads(state, net, grads)
    lr_t = cfg.lr / (1.0 + cfg.decay * state.step_counter)
    v = state.buffer
    v *= cfg.momentum
    v -= lr_t * g
    net.buffer += v
    state.step_counter += 1
    return net, state


def step(state: OptimizerState, net: Network, grads: GradientSet, cfg: OptimizerConfig):
    if cfg.kind == "adagrad":
        return adagrad_step(state, net, grads, cfg)
    return sgd_momentum_step(state, net, grads, cfg)
