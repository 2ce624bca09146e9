"""Paired-training experiments: train pairs, evaluate, aggregate, sweep."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import rng as rngmod
from .datagen import Truth, load_truth, sample_truth
from .metrics import (
    PairReport,
    diff_cosine,
    excess_label_loss,
    make_eval_set,
    pair_relative_pd,
)
from .nnet import (
    DTYPES,
    ArchitectureSpec,
    GradientSet,
    Network,
    backward,
    build_network,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .optim import OptimizerConfig, make_state, step
from .stream import INIT_MODES, StreamConfig, derive_pair_seeds, windowed_stream

log = logging.getLogger(__name__)

STUCK_FACTOR = 5.0
FINITE_CHECK_EVERY = 1024


class TrainingDiverged(RuntimeError):
    """A parameter became NaN or infinite during training."""


@dataclass(frozen=True)
class ExperimentConfig:
    architecture: ArchitectureSpec = ArchitectureSpec()
    optimizer: OptimizerConfig = OptimizerConfig()
    stream: StreamConfig = StreamConfig()
    pairs: int = 8
    init_mode: str = "identical"
    eval_size: int = 2**13
    truth_kind: str = "linear"
    truth_file: str | None = None
    emulate: bool = False
    dtype: str = "float64"
    warm_start: str | None = None
    teacher_lr_ratio: float = 0.1

    def __post_init__(self):
        if self.pairs <= 0:
            raise ValueError(f"pairs must be positive, got {self.pairs}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.eval_size <= 0:
            raise ValueError(f"eval_size must be positive, got {self.eval_size}")
        if self.truth_kind not in ("linear", "quadratic"):
            raise ValueError(f"truth_kind must be linear or quadratic, got {self.truth_kind!r}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {tuple(DTYPES)}, got {self.dtype!r}")
        if not self.teacher_lr_ratio > 0:
            raise ValueError("teacher_lr_ratio must be positive")

    @property
    def n_models(self) -> int:
        return 2 * self.pairs

    @property
    def master_seed(self) -> int:
        return self.stream.master_seed

    def with_log2_z(self, log2_z: int) -> "ExperimentConfig":
        return replace(self, stream=replace(self.stream, log2_z=log2_z))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, stream=replace(self.stream, master_seed=seed))


def variant_label(config: ExperimentConfig) -> str:
    label = config.architecture.label()
    if config.warm_start is not None:
        return label + " TL"
    if config.init_mode == "distinct":
        label += " diff"
    return label


def experiment_truth(config: ExperimentConfig) -> Truth:
    """One truth per experiment: from ``truth_file`` if set, else from the master seed."""
    if config.truth_file:
        truth = load_truth(config.truth_file)
        if truth.kind != config.truth_kind:
            raise ValueError(f"truth file holds a {truth.kind} truth, config asks for {config.truth_kind}")
        return truth
    return sample_truth(config.truth_kind, rngmod.make_stream(config.master_seed, rngmod.TRUTH))


# -- training -----------------------------------------------------------------

def train_single(
    spec: ArchitectureSpec,
    optimizer: OptimizerConfig,
    batches: Iterable[tuple[np.ndarray, np.ndarray]],
    init_seed: int | None = None,
    emul_seed: int | None = None,
    *,
    init_net: Network | None = None,
    dtype: str = "float64",
) -> Network:
    """One pass over ``batches``, one optimizer step per mini-batch.

    With ``emul_seed`` set, each batch is fed to the gradient reduction in a
    freshly permuted order, so per-example contributions are accumulated in a
    different sequence and rounding differs between runs.
    """
    if init_net is not None:
        net = init_net.astype(DTYPES[dtype])
    elif init_seed is not None:
        net = build_network(spec, rngmod.make_stream(init_seed), dtype)
    else:
        raise ValueError("need init_seed or init_net")
    if net.spec != spec:
        raise ValueError("initial network does not match the architecture")
    state = make_state(net, optimizer)
    emul = rngmod.make_stream(emul_seed, rngmod.EMULATION) if emul_seed is not None else None
    ftype = net.dtype
    grads = GradientSet(spec, ftype)
    # overflow shows up as a non-finite parameter and is reported as divergence
    with threadpool_limits(1), np.errstate(over="ignore", invalid="ignore"):
        for t, (X, y) in enumerate(batches, 1):
            X = X.astype(ftype)
            if emul is not None:
                perm = emul.permutation(X.shape[0])
                X, y = X[perm], y[perm]
            step(state, net, backward(net, X, y, out=grads), optimizer)
            if t % FINITE_CHECK_EVERY == 0 and not net.is_finite():
                raise TrainingDiverged(f"non-finite parameter after step {t}")
    if not net.is_finite():
        raise TrainingDiverged(f"non-finite parameter after step {state.step_counter}")
    return net


def _evaluate_pair(
    config: ExperimentConfig, truth: Truth, data_seed: int, net_a: Network, net_b: Network, report: PairReport
) -> PairReport:
    eval_set = make_eval_set(truth, data_seed, config.eval_size)
    with threadpool_limits(1):
        p_a = forward(net_a, eval_set.X)[1]
        p_b = forward(net_b, eval_set.X)[1]
    report.excess_loss_a = excess_label_loss(eval_set.p_true, p_a)
    report.excess_loss_b = excess_label_loss(eval_set.p_true, p_b)
    report.relative_pd = pair_relative_pd(eval_set.p_true, p_a, p_b)
    if config.architecture.kind == "linear" and truth.kind == "linear":
        report.diff_cosine = diff_cosine(net_a.params[0][:, 0], net_b.params[0][:, 0], truth.theta)
    return report


def _blank_report(config: ExperimentConfig, pair_index: int, init_mode: str) -> PairReport:
    return PairReport(
        pair_index=pair_index,
        log2_z=config.stream.log2_z,
        init_mode=init_mode,
        activation=config.architecture.activation.label(),
        arch=config.architecture.kind,
        optimizer=config.optimizer.label(),
    )


def train_pair_networks(
    config: ExperimentConfig, pair_index: int, truth: Truth | None = None
) -> tuple[PairReport, Network, Network]:
    truth = experiment_truth(config) if truth is None else truth
    seeds = derive_pair_seeds(config.master_seed, pair_index, config.init_mode)
    report = _blank_report(config, pair_index, config.init_mode)
    report.init_seed_a, report.init_seed_b = seeds.init_seed_a, seeds.init_seed_b
    nets = []
    for shuffle_seed, init_seed, emul_seed in (
        (seeds.shuffle_seed_a, seeds.init_seed_a, seeds.emul_seed_a),
        (seeds.shuffle_seed_b, seeds.init_seed_b, seeds.emul_seed_b),
    ):
        batches = windowed_stream(config.stream, seeds.data_seed, shuffle_seed, truth)
        nets.append(
            train_single(
                config.architecture,
                config.optimizer,
                batches,
                init_seed,
                emul_seed if config.emulate else None,
                dtype=config.dtype,
            )
        )
    _evaluate_pair(config, truth, seeds.data_seed, nets[0], nets[1], report)
    return report, nets[0], nets[1]


def train_pair(config: ExperimentConfig, pair_index: int, truth: Truth | None = None) -> PairReport:
    return train_pair_networks(config, pair_index, truth)[0]


def train_teacher(config: ExperimentConfig, truth: Truth | None = None) -> Network:
    """A model trained at the full learning rate on a stream disjoint from every pair."""
    truth = experiment_truth(config) if truth is None else truth
    m = config.master_seed
    data_seed = rngmod.derive_seed(m, rngmod.TEACHER, rngmod.DATA)
    batches = windowed_stream(
        config.stream, data_seed, rngmod.derive_seed(m, rngmod.TEACHER, rngmod.SHUFFLE), truth
    )
    emul = rngmod.derive_seed(m, rngmod.TEACHER, rngmod.EMULATION) if config.emulate else None
    return train_single(
        config.architecture,
        config.optimizer,
        batches,
        rngmod.derive_seed(m, rngmod.TEACHER, rngmod.INIT),
        emul,
        dtype=config.dtype,
    )


def warm_start_pair_networks(
    config: ExperimentConfig, teacher: Network, pair_index: int, truth: Truth | None = None
) -> tuple[PairReport, Network, Network]:
    if teacher.spec != config.architecture:
        raise ValueError("teacher checkpoint architecture does not match the config")
    truth = experiment_truth(config) if truth is None else truth
    seeds = derive_pair_seeds(config.master_seed, pair_index, "identical")
    report = _blank_report(config, pair_index, "warm")
    optimizer = config.optimizer.scaled(config.teacher_lr_ratio)
    nets = []
    for shuffle_seed, emul_seed in ((seeds.shuffle_seed_a, seeds.emul_seed_a), (seeds.shuffle_seed_b, seeds.emul_seed_b)):
        batches = windowed_stream(config.stream, seeds.data_seed, shuffle_seed, truth)
        nets.append(
            train_single(
                config.architecture,
                optimizer,
                batches,
                emul_seed=emul_seed if config.emulate else None,
                init_net=teacher,
                dtype=config.dtype,
            )
        )
    _evaluate_pair(config, truth, seeds.data_seed, nets[0], nets[1], report)
    return report, nets[0], nets[1]


def warm_start_pair(
    config: ExperimentConfig, teacher: Network, pair_index: int, truth: Truth | None = None
) -> PairReport:
    return warm_start_pair_networks(config, teacher, pair_index, truth)[0]


# -- experiments and sweeps ------------------------------------------------------

@dataclass
class SweepRow:
    variant: str
    log2_z: int
    mean_pd: float
    se_pd: float
    mean_loss: float
    se_loss: float
    n_pairs: int


@dataclass
class ExperimentResult:
    row: SweepRow
    pairs: list[PairReport]


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)
    pairs: list[PairReport] = field(default_factory=list)

    def variants(self) -> list[str]:
        return list(dict.fromkeys(r.variant for r in self.rows))

    def pd_vs_logz(self) -> dict[str, list[tuple[int, float]]]:
        out: dict[str, list] = {}
        for r in self.rows:
            out.setdefault(r.variant, []).append((r.log2_z, r.mean_pd))
        return out

    def pd_vs_loss(self) -> dict[str, list[tuple[float, float, int]]]:
        out: dict[str, list] = {}
        for r in self.rows:
            out.setdefault(r.variant, []).append((r.mean_loss, r.mean_pd, r.log2_z))
        return out


def _pair_job(args) -> PairReport:
    config, pair_index, truth, teacher, checkpoint_dir = args
    try:
        if teacher is not None:
            report, net_a, net_b = warm_start_pair_networks(config, teacher, pair_index, truth)
        else:
            report, net_a, net_b = train_pair_networks(config, pair_index, truth)
        if checkpoint_dir is not None:
            stem = f"z{config.stream.log2_z}-pair{pair_index}"
            save_checkpoint(net_a, Path(checkpoint_dir) / f"{stem}-a.ckpt")
            save_checkpoint(net_b, Path(checkpoint_dir) / f"{stem}-b.ckpt")
        return report
    except TrainingDiverged as exc:
        report = _blank_report(config, pair_index, "warm" if teacher is not None else config.init_mode)
        report.status, report.error = "failed", str(exc)
        return report


def mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(np.mean(v)), se


def flag_stuck(reports: list[PairReport], factor: float = STUCK_FACTOR) -> None:
    """Mark models whose excess loss exceeds ``factor`` times the median over the experiment."""
    losses = [l for r in reports if r.ok for l in (r.excess_loss_a, r.excess_loss_b)]
    if not losses:
        return
    cut = factor * float(np.median(losses))
    for r in reports:
        if r.ok:
            r.stuck_a = r.excess_loss_a > cut
            r.stuck_b = r.excess_loss_b > cut


def aggregate(label: str, log2_z: int, reports: list[PairReport]) -> SweepRow:
    done = [r for r in reports if r.ok]
    if len(done) < len(reports):
        log.warning("%s log2_z=%d: %d of %d pairs failed", label, log2_z, len(reports) - len(done), len(reports))
    mean_pd, se_pd = mean_and_se([r.relative_pd for r in done])
    mean_loss, se_loss = mean_and_se([r.mean_excess_loss for r in done])
    return SweepRow(label, log2_z, mean_pd, se_pd, mean_loss, se_loss, len(done))


def run_experiment(
    config: ExperimentConfig,
    threads: int = 1,
    teacher: Network | None = None,
    label: str | None = None,
    checkpoint_dir=None,
) -> ExperimentResult:
    """Train and evaluate every pair; aggregation is in pair-index order.

    With ``checkpoint_dir`` set, both members of each pair are saved there.
    """
    truth = experiment_truth(config)
    if teacher is None and config.warm_start is not None:
        teacher = load_checkpoint(config.warm_start, config.dtype)
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(config, k, truth, teacher, checkpoint_dir) for k in range(config.pairs)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(_pair_job, jobs))
    else:
        reports = [_pair_job(j) for j in jobs]
    reports.sort(key=lambda r: r.pair_index)
    flag_stuck(reports)
    if teacher is not None and label is None:
        label = variant_label(replace(config, warm_start=config.warm_start or "<teacher>"))
    label = label or variant_label(config)
    for r in reports:
        r.variant = label
    row = aggregate(label, config.stream.log2_z, reports)
    return ExperimentResult(row, reports)


def sweep(
    base_config: ExperimentConfig,
    log2_z_values: Sequence[int],
    variants: Sequence[ExperimentConfig] | None = None,
    threads: int = 1,
) -> SweepReport:
    """Run every (variant, z) point; rows are grouped by variant in ascending log2 z."""
    if not log2_z_values:
        raise ValueError("need at least one log2_z value")
    variants = list(variants) if variants else [base_config]
    labels = unique_labels(variants)
    report = SweepReport()
    for label, cfg in zip(labels, variants):
        for lz in sorted(set(log2_z_values)):
            result = run_experiment(cfg.with_log2_z(lz), threads=threads, label=label)
            report.rows.append(result.row)
            report.pairs.extend(result.pairs)
    return report


def unique_labels(variants: Sequence[ExperimentConfig]) -> list[str]:
    """Legend labels; variants sharing a label are told apart by optimizer."""
    base = [variant_label(v) for v in variants]
    return [f"{b} {v.optimizer.label()}" if base.count(b) > 1 else b for b, v in zip(base, variants)]
