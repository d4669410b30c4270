"""Command-line interface.

Subcommands cover the whole workflow: ``synth`` writes a simulated CSV,
``preprocess`` turns a CSV into a padded dataset directory, ``stats``
prints dataset statistics as JSON, ``train``/``ablate`` run the training
protocol into a run directory, ``evaluate`` re-scores a finished run,
``export-attention``/``export-repr`` dump per-step internals to CSV, and
``plot`` renders an exported CSV to an image.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors. Every
file-writing command records a manifest before any other output.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_interactions, load_processed, preprocess, save_processed
from .model import PKTParams, forward_sequence, load_checkpoint
from .synthetic import SynthConfig, generate_dataset, write_csv
from .training import (TrainConfig, VARIANTS, best_fold_checkpoint,
                       evaluate_split, run_ablation, run_training,
                       write_manifest)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; the contract here is 1
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pkt", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"pkt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("preprocess", help="clean a CSV into a padded dataset directory")
    p.add_argument("--in", dest="infile", required=True, help="canonical interaction CSV")
    p.add_argument("--out", dest="outdir", required=True, help="output dataset directory")
    p.add_argument("--maxlen", type=int, default=None,
                   help="override the rounded-average sequence length")

    p = sub.add_parser("stats", help="print dataset statistics as JSON")
    p.add_argument("--in", dest="infile", required=True, help="canonical interaction CSV")
    p.add_argument("--maxlen", type=int, default=None)

    p = sub.add_parser("synth", help="generate a synthetic interaction CSV")
    p.add_argument("--config", required=True, help="JSON file of generator settings")
    p.add_argument("--out", dest="outfile", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, required=True, help="overrides the config seed")

    p = sub.add_parser("train", help="train with k-fold cross-validation")
    _add_train_flags(p, seed_required=True)

    p = sub.add_parser("evaluate", help="re-score a finished run")
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--split", choices=("test", "val", "train"), default="test")
    p.add_argument("--data", default=None, help="override the dataset directory")

    p = sub.add_parser("ablate", help="train all four loss variants")
    _add_train_flags(p, seed_required=False)

    p = sub.add_parser("export-attention",
                       help="write one CSV of attention rows per capsule block")
    _add_export_flags(p)

    p = sub.add_parser("export-repr",
                       help="write per-step student/reconstruction vectors and similarity")
    _add_export_flags(p)

    p = sub.add_parser("plot", help="render an exported CSV to an image")
    p.add_argument("--in", dest="infile", required=True, help="exported CSV")
    p.add_argument("--out", dest="outfile", required=True, help="image path (png)")
    return parser


def _add_train_flags(p: argparse.ArgumentParser, seed_required: bool) -> None:
    p.add_argument("--data", required=True, help="dataset directory from preprocess")
    p.add_argument("--out", dest="outdir", required=True, help="run directory to create")
    p.add_argument("--seed", type=int, required=seed_required,
                   default=None if seed_required else 0)
    p.add_argument("--config", default=None, help="JSON file of training settings")
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--nc", type=int, default=None, help="number of capsule blocks")
    p.add_argument("--hidden", type=int, default=None, help="hidden dimension")
    p.add_argument("--gamma", type=float, default=None, help="focal exponent")
    p.add_argument("--lambda-rr", type=float, default=None, dest="lambda_rr")
    p.add_argument("--lambda-ci", type=float, default=None, dest="lambda_ci")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None, dest="test_fraction")


def _add_export_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--user", required=True, help="user id present in the dataset")
    p.add_argument("--fold", type=int, default=None,
                   help="fold checkpoint to use (default: best validation AUC)")
    p.add_argument("--data", default=None, help="override the dataset directory")
    p.add_argument("--out", dest="outdir", default=None,
                   help="export directory (default: <run>/exports)")


def _resolve_train_config(args) -> TrainConfig:
    merged: dict = {}
    if args.config:
        with open(args.config) as fh:
            merged.update(json.load(fh))
    flag_to_field = {
        "variant": "variant", "nc": "n_blocks", "hidden": "hidden_dim",
        "gamma": "gamma", "lambda_rr": "lambda_rr", "lambda_ci": "lambda_ci",
        "epochs": "epochs", "patience": "patience", "batch_size": "batch_size",
        "lr": "learning_rate", "folds": "k_folds", "test_fraction": "test_fraction",
    }
    for flag, field in flag_to_field.items():
        value = getattr(args, flag)
        if value is not None:
            merged[field] = value
    if args.seed is not None:
        merged["seed"] = args.seed
    return TrainConfig.from_dict(merged)


# -- commands -------------------------------------------------------------


def _cmd_preprocess(args) -> int:
    out_dir = Path(args.outdir)
    write_manifest(out_dir, "preprocess", {"maxlen": args.maxlen},
                   {"in": args.infile, "out": out_dir}, seed=None,
                   filename="manifest.json")
    records = load_interactions(args.infile)
    result = preprocess(records, maxlen=args.maxlen)
    save_processed(result, out_dir)
    print(json.dumps(result.stats.to_dict(), indent=2))
    return 0


def _cmd_stats(args) -> int:
    records = load_interactions(args.infile)
    result = preprocess(records, maxlen=args.maxlen)
    print(json.dumps(result.stats.to_dict(), indent=2))
    return 0


def _cmd_synth(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    raw["seed"] = args.seed
    config = SynthConfig.from_dict(raw)
    out = Path(args.outfile)
    out.parent.mkdir(parents=True, exist_ok=True)
    with Path(str(out) + ".manifest.json").open("w") as fh:
        json.dump({"command": "synth", "version": __version__, "seed": args.seed,
                   "config": config.to_dict(),
                   "paths": {"config": args.config, "out": str(out)}}, fh, indent=2)
        fh.write("\n")
    records = generate_dataset(config)
    write_csv(records, out)
    print(f"wrote {len(records)} interactions to {out}")
    return 0


def _cmd_train(args) -> int:
    config = _resolve_train_config(args)
    dataset = load_processed(args.data)
    report = run_training(dataset.sequences, dataset.num_skills, config,
                          args.outdir, data_path=args.data)
    print(json.dumps(report["mean"], indent=2))
    return 0


def _cmd_ablate(args) -> int:
    config = _resolve_train_config(args)
    dataset = load_processed(args.data)
    report = run_ablation(dataset.sequences, dataset.num_skills, config,
                          args.outdir, data_path=args.data)
    summary = {v: r["mean"] for v, r in report["variants"].items()}
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    with (run_dir / "run.json").open() as fh:
        manifest = json.load(fh)
    config = TrainConfig.from_dict(manifest["config"])
    data_dir = args.data or manifest["paths"].get("data")
    if not data_dir:
        raise ValueError("evaluate: run manifest has no data path; pass --data")
    dataset = load_processed(data_dir)
    with (run_dir / "folds.json").open() as fh:
        folds = json.load(fh)
    reports = []
    for fold_id in range(len(folds["folds"])):
        params = load_checkpoint(run_dir / f"fold_{fold_id}" / "checkpoint.pkt")
        if args.split == "test":
            indices = folds["test"]
        elif args.split == "val":
            indices = folds["folds"][fold_id]
        else:
            indices = [i for j, f in enumerate(folds["folds"]) if j != fold_id for i in f]
        seqs = [dataset.sequences[i] for i in indices]
        report = evaluate_split(params, seqs, dataset.num_skills,
                                batch_size=config.batch_size, fold_id=fold_id)
        reports.append(report.to_dict())
    out = {
        "split": args.split,
        "folds": reports,
        "mean": {
            "auc": float(np.mean([r["auc"] for r in reports])),
            "acc": float(np.mean([r["acc"] for r in reports])),
            "aucprc": float(np.mean([r["aucprc"] for r in reports])),
        },
    }
    print(json.dumps(out, indent=2))
    return 0


def _load_export_state(args) -> tuple[PKTParams, int, "object"]:
    run_dir = Path(args.run)
    if args.fold is None:
        params, fold_id = best_fold_checkpoint(run_dir)
    else:
        fold_id = args.fold
        params = load_checkpoint(run_dir / f"fold_{fold_id}" / "checkpoint.pkt")
    with (run_dir / "run.json").open() as fh:
        manifest = json.load(fh)
    data_dir = args.data or manifest["paths"].get("data")
    if not data_dir:
        raise ValueError("export: run manifest has no data path; pass --data")
    dataset = load_processed(data_dir)
    if dataset.num_skills != params.config.num_skills:
        raise ValueError(
            f"export: checkpoint was trained with {params.config.num_skills} skills "
            f"but the dataset has {dataset.num_skills}")
    matches = [s for s in dataset.sequences if s.user_id == args.user]
    if not matches:
        raise ValueError(f"export: user {args.user!r} not found in {data_dir}")
    return params, fold_id, matches[0]


def _cmd_export_attention(args) -> int:
    params, fold_id, seq = _load_export_state(args)
    out_dir = Path(args.outdir) if args.outdir else Path(args.run) / "exports"
    write_manifest(out_dir, "export-attention",
                   {"user": args.user, "fold": fold_id},
                   {"run": args.run, "out": out_dir}, seed=None,
                   filename="manifest-attention.json")
    trace = forward_sequence(seq, params)
    length = seq.valid_length
    t_steps = len(seq.skills)
    written = []
    for j, alpha in enumerate(trace.attention):
        rows = alpha.value[0]
        path = out_dir / f"attention_user_{args.user}_block{j}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"w_{i}" for i in range(1, t_steps + 1)])
            for t in range(length):
                writer.writerow([t + 1] + [repr(float(w)) for w in rows[t]])
        written.append(str(path))
    print("\n".join(written))
    return 0


def _cmd_export_repr(args) -> int:
    params, fold_id, seq = _load_export_state(args)
    out_dir = Path(args.outdir) if args.outdir else Path(args.run) / "exports"
    write_manifest(out_dir, "export-repr",
                   {"user": args.user, "fold": fold_id},
                   {"run": args.run, "out": out_dir}, seed=None,
                   filename="manifest-repr.json")
    trace = forward_sequence(seq, params)
    length = seq.valid_length
    d = params.config.hidden_dim
    student = trace.student.value[0]
    recon = trace.recon.value[0]
    sims = trace.sims.value[0]
    path = out_dir / f"repr_user_{args.user}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"us_{i}" for i in range(1, d + 1)]
                        + [f"r_{i}" for i in range(1, d + 1)] + ["sim"])
        for t in range(length):
            writer.writerow([t + 1] + [repr(float(x)) for x in student[t]]
                            + [repr(float(x)) for x in recon[t]]
                            + [repr(float(sims[t]))])
    print(str(path))
    return 0


def _cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.infile, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    if not rows:
        raise ValueError(f"plot: {args.infile} has no data rows")
    out = Path(args.outfile)
    out.parent.mkdir(parents=True, exist_ok=True)
    with Path(str(out) + ".manifest.json").open("w") as fh:
        json.dump({"command": "plot", "version": __version__, "seed": None,
                   "config": {}, "paths": {"in": args.infile, "out": str(out)}},
                  fh, indent=2)
        fh.write("\n")

    fig, ax = plt.subplots(figsize=(6, 4.5))
    if header[0] == "t" and len(header) > 1 and header[1].startswith("w_"):
        matrix = np.array([r[1:] for r in rows])
        im = ax.imshow(matrix, aspect="auto", origin="upper", cmap="viridis")
        ax.set_xlabel("attended step")
        ax.set_ylabel("query step")
        ax.set_title("capsule attention")
        fig.colorbar(im, ax=ax, label="weight")
    elif header[0] == "step" and header[-1] == "sim":
        steps = [r[0] for r in rows]
        sims = [r[-1] for r in rows]
        ax.plot(steps, sims, marker="o")
        ax.set_xlabel("step")
        ax.set_ylabel("reconstruction similarity")
        ax.set_ylim(0.0, 1.0)
        ax.set_title("student/reconstruction similarity")
    else:
        plt.close(fig)
        raise ValueError(f"plot: unrecognized export header in {args.infile}")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    print(str(out))
    return 0


_COMMANDS = {
    "preprocess": _cmd_preprocess,
    "stats": _cmd_stats,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "export-attention": _cmd_export_attention,
    "export-repr": _cmd_export_repr,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"pkt: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError, KeyError,
            ZeroDivisionError, json.JSONDecodeError) as exc:
        print(f"pkt {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
