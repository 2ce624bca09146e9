"""Flat ``section.key = value`` experiment configuration files.

Example::

    # ReLU pair, distinct initialization
    data.truth = linear
    model.arch = double
    model.activation = relu
    optim.kind = adagrad
    optim.lr = 0.1
    stream.T = 2^20
    stream.log2_z = 10
    harness.pairs = 8
    harness.init_mode = distinct

Unset keys take their defaults; unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
from dataclasses import replace

from .harness import ExperimentConfig
from .nnet import Activation, ArchitectureSpec
from .optim import OptimizerConfig
from .stream import StreamConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


def _int(text: str) -> int:
    text = text.replace("_", "")
    for op in ("**", "^"):
        if op in text:
            base, _, exp = text.partition(op)
            return int(base) ** int(exp)
    return int(text)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _widths(text: str) -> tuple[int, ...]:
    text = text.strip("[]() ")
    return tuple(_int(w.strip()) for w in text.split(",") if w.strip())


def _str(text: str) -> str:
    return text


KEYS = {
    "data.truth": _str,
    "data.truth_file": _str,
    "data.eval_size": _int,
    "model.arch": _str,
    "model.widths": _widths,
    "model.activation": _str,
    "model.beta": float,
    "model.dtype": _str,
    "optim.kind": _str,
    "optim.lr": float,
    "optim.acc_init": float,
    "optim.momentum": float,
    "optim.decay": float,
    "stream.T": _int,
    "stream.batch_size": _int,
    "stream.log2_z": _int,
    "stream.master_seed": _int,
    "harness.pairs": _int,
    "harness.init_mode": _str,
    "harness.emulate": _bool,
    "harness.warm_start": _str,
    "harness.teacher_lr_ratio": float,
}


def parse_values(text: str) -> dict[str, object]:
    """Parse the text into typed values, keyed by dotted name (no defaults applied)."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = key.strip(), value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            value = value[1:-1]
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, field=key)
        if key in values:
            raise ConfigError("duplicate key", line=lineno, field=key)
        try:
            values[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"invalid value {value!r} ({exc})", line=lineno, field=key) from None
    return values


def build_config(values: dict[str, object], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply dotted-key values on top of ``base`` (defaults if omitted) and validate."""
    base = base or ExperimentConfig()
    v = dict(values)
    arch, opt, stream = base.architecture, base.optimizer, base.stream

    def get(key, current):
        return v[key] if key in v else current

    act_kind = get("model.activation", arch.activation.kind)
    beta = v.get("model.beta", arch.activation.beta if act_kind == arch.activation.kind else None)
    try:
        activation = Activation(act_kind, beta)
    except ValueError as exc:
        field = "model.beta" if "beta" in str(exc) else "model.activation"
        raise ConfigError(str(exc), field=field) from None
    kind = get("model.arch", arch.kind)
    widths = v.get("model.widths", arch.widths if kind == arch.kind else None)
    architecture = _field("model.arch", ArchitectureSpec, kind, widths, activation)
    optimizer = _field(
        "optim",
        OptimizerConfig,
        get("optim.kind", opt.kind),
        get("optim.lr", opt.lr),
        get("optim.acc_init", opt.acc_init),
        get("optim.momentum", opt.momentum),
        get("optim.decay", opt.decay),
    )
    stream = _field(
        "stream",
        StreamConfig,
        get("stream.T", stream.total_examples),
        get("stream.batch_size", stream.batch_size),
        get("stream.log2_z", stream.log2_z),
        get("stream.master_seed", stream.master_seed),
    )
    return _field(
        "harness",
        ExperimentConfig,
        architecture=architecture,
        optimizer=optimizer,
        stream=stream,
        pairs=get("harness.pairs", base.pairs),
        init_mode=get("harness.init_mode", base.init_mode),
        eval_size=get("data.eval_size", base.eval_size),
        truth_kind=get("data.truth", base.truth_kind),
        truth_file=get("data.truth_file", base.truth_file),
        emulate=get("harness.emulate", base.emulate),
        dtype=get("model.dtype", base.dtype),
        warm_start=get("harness.warm_start", base.warm_start),
        teacher_lr_ratio=get("harness.teacher_lr_ratio", base.teacher_lr_ratio),
    )


def _field(path: str, ctor, *args, **kwargs):
    try:
        return ctor(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), field=path) from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    return build_config(parse_values(text), base)


def parse_overrides(items) -> dict[str, object]:
    """``["optim.lr=0.01", "model.activation=relu;model.arch=double"]`` -> typed values."""
    lines = []
    for item in items:
        lines += [part.strip() for part in item.split(";") if part.strip()]
    return parse_values("\n".join(lines))


def _num(x: float) -> str:
    return repr(float(x))


def dump_config(config: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    a, o, s = config.architecture, config.optimizer, config.stream
    lines = [
        f"data.truth = {config.truth_kind}",
        f"data.eval_size = {config.eval_size}",
    ]
    if config.truth_file is not None:
        lines.append(f"data.truth_file = {config.truth_file}")
    lines += [
        f"model.arch = {a.kind}",
        f"model.widths = {','.join(str(w) for w in a.widths)}" if a.widths else None,
        f"model.activation = {a.activation.kind}",
        f"model.beta = {_num(a.activation.beta)}" if a.activation.beta is not None else None,
        f"model.dtype = {config.dtype}",
        f"optim.kind = {o.kind}",
        f"optim.lr = {_num(o.lr)}",
        f"optim.acc_init = {_num(o.acc_init)}",
        f"optim.momentum = {_num(o.momentum)}",
        f"optim.decay = {_num(o.decay)}",
        f"stream.T = {s.total_examples}",
        f"stream.batch_size = {s.batch_size}",
        f"stream.log2_z = {s.log2_z}",
        f"stream.master_seed = {s.master_seed}",
        f"harness.pairs = {config.pairs}",
        f"harness.init_mode = {config.init_mode}",
        f"harness.emulate = {'true' if config.emulate else 'false'}",
    ]
    if config.warm_start is not None:
        lines.append(f"harness.warm_start = {config.warm_start}")
    lines.append(f"harness.teacher_lr_ratio = {_num(config.teacher_lr_ratio)}")
    return "\n".join(l for l in lines if l is not None) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(config).encode()).hexdigest()


def with_overrides(config: ExperimentConfig, items) -> ExperimentConfig:
    return build_config(parse_overrides(items), config) if items else config


def with_seed(config: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return config
    stream = _field("stream.master_seed", replace, config.stream, master_seed=seed)
    return replace(config, stream=stream)
