"""Small feed-forward networks with exact backpropagation.

Architectures (all end in a single logit fed to a sigmoid):

``linear``          logit = b0 + x.w0
``single``          one hidden unit
``double``          two hidden units
``tower``           hidden widths (16, 8, 4, 2) by default
``quad_tower``      hidden widths (1024, 512) by default
``wide_embedding``  each 16-feature group summed into a 2-d embedding, the two
                    sums concatenated (4 inputs) and fed to 1000 hidden units

Weights use the row-vector convention ``a_next = act(a @ W + b)``.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import expit

N_INPUTS = 32
GROUP = 16
EMBED_DIM = 2

ACTIVATION_KINDS = ("identity", "relu", "smelu", "swish")
ARCH_KINDS = ("linear", "single", "double", "tower", "wide_embedding", "quad_tower")

DEFAULT_WIDTHS = {
    "linear": (),
    "single": (1,),
    "double": (2,),
    "tower": (16, 8, 4, 2),
    "quad_tower": (1024, 512),
    "wide_embedding": (1000,),
}

DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class Activation:
    kind: str = "identity"
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}; expected one of {ACTIVATION_KINDS}")
        if self.kind in ("smelu", "swish"):
            if self.beta is None:
                raise ValueError(f"{self.kind} requires beta")
            if not self.beta > 0:
                raise ValueError(f"beta must be positive, got {self.beta}")
            object.__setattr__(self, "beta", float(self.beta))
        elif self.beta is not None:
            object.__setattr__(self, "beta", None)

    @property
    def kinks(self) -> tuple[float, ...]:
        """Points where the second derivative (or the first, for ReLU) jumps."""
        if self.kind == "relu":
            return (0.0,)
        if self.kind == "smelu":
            return (-self.beta, self.beta)
        return ()

    def __call__(self, u):
        u = np.asarray(u)
        if self.kind == "identity":
            return u
        if self.kind == "relu":
            return np.maximum(u, 0)
        b = self.beta
        if self.kind == "smelu":
            # quadratic blend on [-b, b] plus the linear excess beyond +b
            c = np.clip(u, -b, b) + b
            return c * c / (4 * b) + np.maximum(u - b, 0)
        return u * expit(b * u)

    def grad(self, u):
        u = np.asarray(u)
        if self.kind == "identity":
            return np.ones_like(u)
        if self.kind == "relu":
            return (u > 0).astype(u.dtype)
        b = self.beta
        if self.kind == "smelu":
            return (np.clip(u, -b, b) + b) / (2 * b)
        s = expit(b * u)
        return s + b * u * s * (1 - s)

    def label(self) -> str:
        return self.kind if self.beta is None else f"{self.kind}{self.beta:g}"


def activate(a: Activation, u):
    out = a(u)
    return float(out) if np.ndim(out) == 0 else out


def activate_grad(a: Activation, u):
    out = a.grad(u)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str = "linear"
    widths: tuple[int, ...] = field(default=None)
    activation: Activation = Activation()

    def __post_init__(self):
        if self.kind not in ARCH_KINDS:
            raise ValueError(f"unknown architecture {self.kind!r}; expected one of {ARCH_KINDS}")
        widths = DEFAULT_WIDTHS[self.kind] if self.widths is None else tuple(int(w) for w in self.widths)
        if any(w <= 0 for w in widths):
            raise ValueError(f"widths must be strictly positive, got {widths}")
        if self.kind == "linear" and widths:
            raise ValueError("linear architecture has no hidden layer")
        if self.kind in ("single", "double") and widths != DEFAULT_WIDTHS[self.kind]:
            raise ValueError(f"{self.kind} architecture has fixed widths {DEFAULT_WIDTHS[self.kind]}")
        if self.kind in ("tower", "quad_tower", "wide_embedding") and not widths:
            raise ValueError(f"{self.kind} needs at least one hidden layer")
        if self.kind == "wide_embedding" and len(widths) != 1:
            raise ValueError("wide_embedding has exactly one hidden layer")
        object.__setattr__(self, "widths", widths)
        if self.kind == "linear" and self.activation.kind != "identity":
            object.__setattr__(self, "activation", Activation())

    @property
    def hidden_units(self) -> int:
        return sum(self.widths)

    @property
    def input_dim(self) -> int:
        return 2 * EMBED_DIM if self.kind == "wide_embedding" else N_INPUTS

    def label(self) -> str:
        """Legend label: activation followed by the number of hidden units."""
        if self.kind == "linear":
            return "linear"
        return f"{self.activation.label()}{self.hidden_units}"

    def shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        return list(self._shapes)

    @cached_property
    def _shapes(self) -> tuple:
        out = []
        if self.kind == "wide_embedding":
            out += [("emb0", (GROUP, EMBED_DIM)), ("emb1", (GROUP, EMBED_DIM))]
        dims = (self.input_dim,) + self.widths + (1,)
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            out += [(f"w{i}", (fan_in, fan_out)), (f"b{i}", (fan_out,))]
        return tuple(out)

    @cached_property
    def n_params(self) -> int:
        return sum(math.prod(shape) for _, shape in self.shapes())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "widths": list(self.widths), "activation": asdict(self.activation)}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        return cls(d["kind"], tuple(d["widths"]), Activation(**d["activation"]))


class Network:
    """Parameter store for one model.

    All parameters live in one contiguous ``buffer``; ``params`` holds views into
    it, ordered as ``spec.shapes()``.
    """

    def __init__(self, spec: ArchitectureSpec, params: list[np.ndarray]):
        shapes = spec.shapes()
        if len(params) != len(shapes):
            raise ValueError(f"expected {len(shapes)} parameter arrays, got {len(params)}")
        for (name, shape), p in zip(shapes, params):
            if p.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {p.shape}")
        self.spec = spec
        self.names = [name for name, _ in shapes]
        self.buffer = np.concatenate([np.asarray(p).ravel() for p in params])
        self.params = _views(self.buffer, shapes)
        start = 2 if spec.kind == "wide_embedding" else 0
        ps = self.params[start:]
        self._layers = [(ps[i], ps[i + 1]) for i in range(0, len(ps), 2)]

    @property
    def dtype(self):
        return self.params[0].dtype

    @property
    def n_params(self) -> int:
        return self.buffer.size

    @property
    def embeddings(self) -> tuple[np.ndarray, np.ndarray] | None:
        if self.spec.kind != "wide_embedding":
            return None
        return self.params[0], self.params[1]

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return self._layers

    def copy(self) -> "Network":
        return Network(self.spec, self.params)

    def astype(self, dtype) -> "Network":
        return Network(self.spec, [p.astype(dtype) for p in self.params])

    def flat(self) -> np.ndarray:
        return self.buffer.astype(np.float64)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.buffer).all())

    def __repr__(self):
        return f"Network({self.spec.kind}, {self.spec.label()}, n_params={self.n_params})"


def _views(buffer: np.ndarray, shapes) -> list[np.ndarray]:
    out, offset = [], 0
    for _, shape in tuple(shapes):
        size = math.prod(shape)
        out.append(buffer[offset : offset + size].reshape(shape))
        offset += size
    return out


class GradientSet(list):
    """Per-parameter gradients (a list congruent with ``Network.params``) backed by one flat ``buffer``."""

    def __init__(self, spec: ArchitectureSpec, dtype):
        self.buffer = np.zeros(spec.n_params, dtype=dtype)
        super().__init__(_views(self.buffer, spec._shapes))


def build_network(spec: ArchitectureSpec, rng: np.random.Generator, dtype="float64") -> Network:
    """Glorot-uniform weights and embeddings, zero biases."""
    dtype = DTYPES[dtype] if isinstance(dtype, str) else dtype
    params = []
    for name, shape in spec.shapes():
        if name.startswith("b"):
            params.append(np.zeros(shape, dtype=dtype))
        else:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            params.append(rng.uniform(-limit, limit, size=shape).astype(dtype))
    return Network(spec, params)


def _as_batch(net: Network, X) -> np.ndarray:
    X = np.asarray(X, dtype=net.dtype)
    return X[None, :] if X.ndim == 1 else X


def _forward(net: Network, X: np.ndarray):
    """Logits plus the cache needed by backprop: inputs to each layer and pre-activations."""
    act = net.spec.activation
    if net.spec.kind == "wide_embedding":
        e0, e1 = net.embeddings
        a = np.concatenate([X[:, :GROUP] @ e0, X[:, GROUP:] @ e1], axis=1)
    else:
        a = X
    inputs, pre = [], []
    layers = net.layers
    for W, b in layers[:-1]:
        z = a @ W + b
        inputs.append(a)
        pre.append(z)
        a = act(z)
    W, b = layers[-1]
    inputs.append(a)
    logit = (a @ W + b)[:, 0]
    return logit, inputs, pre


def forward(net: Network, X):
    """Return ``(logit, p_positive)``; scalars for a single example."""
    X = np.asarray(X)
    logit, _, _ = _forward(net, _as_batch(net, X))
    p = expit(logit)
    if X.ndim == 1:
        return float(logit[0]), float(p[0])
    return logit, p


def pre_activations(net: Network, X) -> list[np.ndarray]:
    _, _, pre = _forward(net, _as_batch(net, X))
    return pre


def logistic_loss(logit, y):
    """log(1 + exp(-y * logit)) without overflow."""
    out = np.logaddexp(0.0, -np.asarray(y) * np.asarray(logit))
    return float(out) if np.ndim(out) == 0 else out


def backward(net: Network, X, y, out: GradientSet | None = None) -> GradientSet:
    """Gradient of the mean logistic loss over the batch ``(X, y)``.

    ``out`` may be a previously returned GradientSet to overwrite.
    """
    X = _as_batch(net, X)
    y = np.atleast_1d(np.asarray(y))
    logit, inputs, pre = _forward(net, X)
    n = X.shape[0]
    delta = ((expit(logit) - (y > 0)) / n).astype(net.dtype)[:, None]
    act = net.spec.activation
    grads = GradientSet(net.spec, net.dtype) if out is None else out
    offset = 2 if net.spec.kind == "wide_embedding" else 0
    layers = net.layers
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        np.matmul(inputs[i].T, delta, out=grads[offset + 2 * i])
        delta.sum(axis=0, out=grads[offset + 2 * i + 1])
        if i > 0 or offset:
            delta = delta @ W.T
            if i > 0:
                delta *= act.grad(pre[i - 1])
    if offset:
        np.matmul(X[:, :GROUP].T, delta[:, :EMBED_DIM], out=grads[0])
        np.matmul(X[:, GROUP:].T, delta[:, EMBED_DIM:], out=grads[1])
    return grads


def loss(net: Network, X, y) -> float:
    logit, _ = forward(net, np.atleast_2d(X))
    return float(np.mean(logistic_loss(logit, np.atleast_1d(y))))


# -- checkpoints ------------------------------------------------------------

MAGIC = b"PDLABNET"


def checkpoint_bytes(net: Network) -> bytes:
    """Magic, length-prefixed JSON spec descriptor, parameter count, then
    every parameter as a little-endian float64 in ``spec.shapes()`` order."""
    desc = json.dumps(net.spec.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(desc)))
    buf.write(desc)
    buf.write(struct.pack("<Q", net.n_params))
    buf.write(net.flat().astype("<f8").tobytes())
    return buf.getvalue()


def network_from_bytes(data: bytes, dtype="float64") -> Network:
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError("not a network checkpoint (bad magic)")
    pos = len(MAGIC)
    (dlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    spec = ArchitectureSpec.from_dict(json.loads(data[pos : pos + dlen]))
    pos += dlen
    (count,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if count != spec.n_params:
        raise ValueError(f"checkpoint holds {count} parameters, spec needs {spec.n_params}")
    flat = np.frombuffer(data, dtype="<f8", count=count, offset=pos)
    if pos + 8 * count != len(data):
        raise ValueError("trailing or missing bytes in checkpoint")
    dtype = DTYPES[dtype] if isinstance(dtype, str) else dtype
    params, offset = [], 0
    for _, shape in spec.shapes():
        size = math.prod(shape)
        params.append(flat[offset : offset + size].reshape(shape).astype(dtype))
        offset += size
    return Network(spec, params)


def save_checkpoint(net: Network, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(net))


def load_checkpoint(path, dtype="float64") -> Network:
    return network_from_bytes(Path(path).read_bytes(), dtype)
