"""Command-line front end.

    pdlab truth --kind linear --seed 7 --out truth.txt
    pdlab run --config exp.cfg --seed 7
    pdlab sweep --config exp.cfg --log2z 0,10,20 --variant "model.activation=relu"
    pdlab warmstart --config exp.cfg --log2z 12
    pdlab plot --sweep runs/<id>/sweep.csv --out figs/
    pdlab inspect-weights --a a.ckpt --b b.ckpt --out weights.csv

Outputs go to ``$PDLAB_OUTPUT_ROOT/<config-hash>-seed<seed>/`` (default root
``./runs``) unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import rng as rngmod
from .config import ConfigError, config_hash, dump_config, parse_config, parse_overrides, build_config, with_overrides, with_seed
from .datagen import sample_truth, save_truth, load_truth
from .harness import ExperimentConfig, SweepReport, run_experiment, sweep, train_teacher, variant_label
from .metrics import diff_cosine, weight_pairs_export
from .nnet import load_checkpoint, save_checkpoint
from .report import read_sweep_csv, render_figures, write_manifest, write_pairs_csv, write_sweep_csv, write_weights_csv

OUTPUT_ROOT_ENV = "PDLAB_OUTPUT_ROOT"

log = logging.getLogger("pdlab")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _log2z_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("need at least one nonnegative log2 z")
    return values


def _load_config(args) -> ExperimentConfig:
    text = Path(args.config).read_text() if args.config else ""
    config = parse_config(text)
    config = with_overrides(config, getattr(args, "set", None))
    return with_seed(config, args.seed)


def _run_dir(args, config: ExperimentConfig) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        out = root / f"{config_hash(config)[:12]}-seed{config.master_seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _rel(path: Path, out: Path) -> str:
    path = Path(path)
    try:
        return path.relative_to(out).as_posix()
    except ValueError:
        return path.name


def _finish(out: Path, config: ExperimentConfig, started: str, report: SweepReport, files: list[Path]) -> None:
    (out / "config.cfg").write_text(dump_config(config))
    write_manifest(
        out / "manifest.json",
        config_hash=config_hash(config),
        master_seed=config.master_seed,
        tool_version=__version__,
        started=started,
        finished=_now(),
        files=sorted([_rel(p, out) for p in files] + ["config.cfg"]),
        pairs=[
            {
                "variant": r.variant,
                "pair_index": r.pair_index,
                "log2_z": r.log2_z,
                "status": r.status,
                "error": r.error,
                "stuck_a": r.stuck_a,
                "stuck_b": r.stuck_b,
                "init_seed_a": r.init_seed_a,
                "init_seed_b": r.init_seed_b,
            }
            for r in report.pairs
        ],
    )
    log.info("wrote %s", out)


def cmd_truth(args) -> int:
    truth = sample_truth(args.kind, rngmod.make_stream(args.seed, rngmod.TRUTH))
    save_truth(truth, args.out)
    print(args.out)
    return 0


def cmd_run(args) -> int:
    started = _now()
    config = _load_config(args)
    out = _run_dir(args, config)
    ckpt_dir = out / "checkpoints" if args.save_checkpoints else None
    result = run_experiment(config, threads=args.threads, checkpoint_dir=ckpt_dir)
    report = SweepReport([result.row], result.pairs)
    files = [write_pairs_csv(report.pairs, out / "pairs.csv"), write_sweep_csv(report.rows, out / "sweep.csv")]
    if ckpt_dir is not None:
        files += sorted(ckpt_dir.glob("*.ckpt"))
    _finish(out, config, started, report, files)
    print(out)
    return 0


def _variants(base: ExperimentConfig, items: list[str] | None) -> list[ExperimentConfig]:
    if not items:
        return [base]
    return [build_config(parse_overrides([item]), base) for item in items]


def cmd_sweep(args) -> int:
    started = _now()
    config = _load_config(args)
    variants = _variants(config, args.variant)
    out = _run_dir(args, config)
    report = sweep(config, args.log2z, variants, threads=args.threads)
    files = [write_pairs_csv(report.pairs, out / "pairs.csv"), write_sweep_csv(report.rows, out / "sweep.csv")]
    files += render_figures(report.rows, out, note=f"config {config_hash(config)[:12]} seed {config.master_seed}")
    _finish(out, config, started, report, files)
    print(out)
    return 0


def cmd_warmstart(args) -> int:
    started = _now()
    config = _load_config(args)
    out = _run_dir(args, config)
    files = []
    if args.teacher:
        teacher = load_checkpoint(args.teacher, config.dtype)
    else:
        log.info("training teacher")
        teacher = train_teacher(config)
        save_checkpoint(teacher, out / "teacher.ckpt")
        files.append(out / "teacher.ckpt")
    ratio = args.ratio if args.ratio is not None else config.teacher_lr_ratio
    config = replace(config, teacher_lr_ratio=ratio, warm_start=args.teacher or "teacher.ckpt")
    label = variant_label(config)
    report = SweepReport()
    for lz in sorted(set(args.log2z or [config.stream.log2_z])):
        result = run_experiment(config.with_log2_z(lz), threads=args.threads, teacher=teacher, label=label)
        report.rows.append(result.row)
        report.pairs.extend(result.pairs)
    files += [write_pairs_csv(report.pairs, out / "pairs.csv"), write_sweep_csv(report.rows, out / "sweep.csv")]
    _finish(out, config, started, report, files)
    print(out)
    return 0


def cmd_plot(args) -> int:
    rows = read_sweep_csv(args.sweep)
    for path in render_figures(rows, args.out):
        print(path)
    return 0


def cmd_inspect_weights(args) -> int:
    net_a = load_checkpoint(args.a)
    net_b = load_checkpoint(args.b)
    rows = weight_pairs_export(net_a, net_b)
    write_weights_csv(rows, args.out)
    print(args.out)
    if args.truth:
        truth = load_truth(args.truth)
        if net_a.spec.kind == "linear" and truth.kind == "linear":
            print(f"diff_cosine {diff_cosine(net_a.params[0][:, 0], net_b.params[0][:, 0], truth.theta):.10g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdlab", description="Paired-training prediction-difference laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{truth,run,sweep,warmstart,plot,inspect-weights}")

    p = sub.add_parser("truth", help="sample a ground-truth model and save it")
    p.add_argument("--kind", choices=("linear", "quadratic"), default="linear")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_truth)

    def experiment_args(p):
        p.add_argument("--config", help="config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="master seed (overrides stream.master_seed)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes for pairs")

    p = sub.add_parser("run", help="run one experiment")
    experiment_args(p)
    p.add_argument("--save-checkpoints", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run experiments over log2 z and variants")
    experiment_args(p)
    p.add_argument("--log2z", type=_log2z_list, required=True, help="e.g. 0,10,20")
    p.add_argument("--variant", action="append", metavar="KEY=VALUE[;KEY=VALUE]")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("warmstart", help="warm-start pairs from a teacher model")
    experiment_args(p)
    p.add_argument("--teacher", help="teacher checkpoint (trained when omitted)")
    p.add_argument("--ratio", type=float, help="learning-rate ratio for the pair")
    p.add_argument("--log2z", type=_log2z_list)
    p.set_defaults(func=cmd_warmstart)

    p = sub.add_parser("plot", help="render figures from a sweep table")
    p.add_argument("--sweep", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("inspect-weights", help="export parameter pairs of two checkpoints")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="truth file; prints the difference cosine for linear models")
    p.set_defaults(func=cmd_inspect_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"pdlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
