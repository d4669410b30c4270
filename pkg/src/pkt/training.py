"""Training harness: fold training with early stopping, evaluation, runs.

``train_fold`` owns one model: seeded init, per-epoch shuffled batches,
Adam steps on the combined loss, validation AUC after every epoch, and
early stopping once the AUC has not strictly improved for ``patience``
consecutive epochs (the best-AUC snapshot is returned, not the last).

``run_training`` drives the full protocol: a fixed 20% user-level test
holdout, k-fold rotation over the rest, per-fold logs and checkpoints,
and a report aggregating test metrics. ``run_ablation`` repeats that for
the four loss variants with identical seeds, folds, and initialization.

Per-fold epochs.csv files hold only deterministic columns so identical
seeds reproduce them byte-for-byte; wall-clock timings go to a separate
timings.csv.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import Adam, no_grad
from .data import (InteractionSequence, batch_arrays, compute_stats, split_folds)
from .losses import (LossConfig, ci_focal_loss, count_clamped, kt_loss, rr_loss,
                     total_loss)
from .metrics import MetricsReport, evaluate_predictions
from .model import (PKTConfig, PKTParams, forward_batch, load_checkpoint,
                    save_checkpoint)

VARIANTS = ("full", "no-rr", "no-ci", "no-rr-ci")

EPOCH_CSV_COLUMNS = ("epoch", "loss", "loss_kt", "loss_rr", "loss_ci",
                     "val_auc", "val_acc", "val_aucprc", "clamp_events")


@dataclass
class TrainConfig:
    epochs: int = 200
    patience: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    k_folds: int = 5
    test_fraction: float = 0.2
    seed: int = 0
    hidden_dim: int = 64
    n_blocks: int = 4
    include_next_skill: bool = False
    whole_sequence_mean: bool = False
    gamma: float = 2.0
    lambda_rr: float = 1.0
    lambda_ci: float = 1.0
    variant: str = "full"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"TrainConfig: epochs must be >= 1, got {self.epochs}")
        if self.patience < 1:
            raise ValueError(f"TrainConfig: patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ValueError(f"TrainConfig: batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"TrainConfig: learning_rate must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"TrainConfig: variant must be one of {VARIANTS}, got {self.variant!r}")

    def effective_lambdas(self) -> tuple[float, float]:
        """Loss weights after applying the ablation variant."""
        lam_rr = self.lambda_rr if self.variant in ("full", "no-ci") else 0.0
        lam_ci = self.lambda_ci if self.variant in ("full", "no-rr") else 0.0
        return lam_rr, lam_ci

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"TrainConfig: unknown fields {sorted(extra)}")
        return cls(**{f: d[f] for f in cls.__dataclass_fields__ if f in d})


@dataclass
class EpochLog:
    epoch: int
    loss: float
    loss_kt: float
    loss_rr: float
    loss_ci: float
    val_auc: float
    val_acc: float
    val_aucprc: float
    clamp_events: int
    wall_seconds: float

    def csv_row(self) -> list[str]:
        vals = (self.epoch, self.loss, self.loss_kt, self.loss_rr, self.loss_ci,
                self.val_auc, self.val_acc, self.val_aucprc, self.clamp_events)
        return [repr(v) if isinstance(v, float) else str(v) for v in vals]


def _loss_config(train_seqs: list[InteractionSequence], config: TrainConfig) -> LossConfig:
    lam_rr, lam_ci = config.effective_lambdas()
    alpha_ci = 1.0
    minority = 0
    if lam_ci > 0:
        # the focal weight comes from this fold's training portion only
        stats = compute_stats(train_seqs)
        alpha_ci = stats.imbalance_ratio
        minority = 1 - stats.majority_class
    return LossConfig(lambda_rr=lam_rr, lambda_ci=lam_ci, gamma=config.gamma,
                      alpha_ci=alpha_ci, minority_class=minority)


def _model_config(num_skills: int, maxlen: int, config: TrainConfig, fold_id: int) -> PKTConfig:
    return PKTConfig(num_skills=num_skills, maxlen=maxlen,
                     hidden_dim=config.hidden_dim, n_blocks=config.n_blocks,
                     seed=config.seed + fold_id,
                     include_next_skill=config.include_next_skill,
                     whole_sequence_mean=config.whole_sequence_mean)


def train_fold(train_seqs: list[InteractionSequence], val_seqs: list[InteractionSequence],
               num_skills: int, config: TrainConfig, fold_id: int = 0
               ) -> tuple[PKTParams, list[EpochLog]]:
    """Train one fold; returns the best-validation-AUC snapshot and the log."""
    if not train_seqs or not val_seqs:
        raise ValueError("train_fold: train and validation splits must be nonempty")
    maxlen = len(train_seqs[0].skills)
    model_config = _model_config(num_skills, maxlen, config, fold_id)
    loss_config = _loss_config(train_seqs, config)
    params = PKTParams(model_config)
    optimizer = Adam(params.tensors(), lr=config.learning_rate,
                     beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    arrays = batch_arrays(train_seqs, num_skills)
    rng = np.random.default_rng([config.seed, fold_id, 0x7C4])

    best_auc = -np.inf
    best_params = params.copy()
    stale = 0
    logs: list[EpochLog] = []
    n_train = len(train_seqs)

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n_train)
        sums = {"loss": 0.0, "kt": 0.0, "rr": 0.0, "ci": 0.0}
        clamp_events = 0
        n_batches = 0
        for batch_index, start in enumerate(range(0, n_train, config.batch_size)):
            idx = order[start:start + config.batch_size]
            trace = forward_batch(params, arrays["encoded"][idx], arrays["valid"][idx])
            labels = arrays["targets"][idx]
            mask = arrays["target_mask"][idx]
            l_kt = kt_loss(trace.preds, labels, mask)
            l_rr = rr_loss(trace.sims, labels, mask)
            l_ci = ci_focal_loss(trace.preds, labels, mask, loss_config.alpha_ci,
                                 loss_config.gamma, loss_config.minority_class)
            loss = total_loss(l_kt, l_rr, l_ci,
                              loss_config.lambda_rr, loss_config.lambda_ci)
            if not np.isfinite(loss.value):
                raise RuntimeError(
                    f"train_fold: training diverged at epoch {epoch}, "
                    f"batch {batch_index}: loss is not finite")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sums["loss"] += loss.item()
            sums["kt"] += l_kt.item()
            sums["rr"] += l_rr.item()
            sums["ci"] += l_ci.item()
            clamp_events += count_clamped(trace.preds, mask)
            clamp_events += count_clamped(trace.sims, mask)
            n_batches += 1

        report = evaluate_split(params, val_seqs, num_skills,
                                batch_size=config.batch_size, fold_id=fold_id)
        logs.append(EpochLog(
            epoch=epoch,
            loss=sums["loss"] / n_batches,
            loss_kt=sums["kt"] / n_batches,
            loss_rr=sums["rr"] / n_batches,
            loss_ci=sums["ci"] / n_batches,
            val_auc=report.auc,
            val_acc=report.acc,
            val_aucprc=report.aucprc,
            clamp_events=clamp_events,
            wall_seconds=time.perf_counter() - started,
        ))
        if report.auc > best_auc:
            best_auc = report.auc
            best_params = params.copy()
            stale = 0
        else:
            stale += 1
        if stale >= config.patience:
            break
    return best_params, logs


def evaluate_split(params: PKTParams, sequences: list[InteractionSequence],
                   num_skills: int, batch_size: int = 256, threshold: float = 0.5,
                   fold_id: int | None = None) -> MetricsReport:
    """Metrics over all next-step predictions of the given sequences."""
    if not sequences:
        raise ValueError("evaluate_split: empty sequence list")
    config = params.config
    if num_skills != config.num_skills:
        raise ValueError(
            f"evaluate_split: checkpoint was trained with {config.num_skills} skills "
            f"but the dataset has {num_skills}")
    if len(sequences[0].skills) != config.maxlen:
        raise ValueError(
            f"evaluate_split: checkpoint expects maxlen {config.maxlen} but sequences "
            f"have length {len(sequences[0].skills)}")
    arrays = batch_arrays(sequences, num_skills)
    scores: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    with no_grad():
        for start in range(0, len(sequences), batch_size):
            sl = slice(start, start + batch_size)
            trace = forward_batch(params, arrays["encoded"][sl], arrays["valid"][sl])
            mask = arrays["target_mask"][sl]
            scores.append(trace.preds.value[mask])
            labels.append(arrays["targets"][sl][mask])
    return evaluate_predictions(np.concatenate(scores),
                                np.concatenate(labels).astype(np.int64),
                                threshold=threshold, fold_id=fold_id)


def _write_epoch_logs(fold_dir: Path, logs: list[EpochLog]) -> None:
    with (fold_dir / "epochs.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPOCH_CSV_COLUMNS)
        for log in logs:
            writer.writerow(log.csv_row())
    with (fold_dir / "timings.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("epoch", "wall_seconds"))
        for log in logs:
            writer.writerow((log.epoch, repr(log.wall_seconds)))


def write_manifest(out_dir: Path, command: str, config_dict: dict,
                   paths: dict, seed: int, filename: str = "run.json") -> None:
    """Record what produced this directory; written before any other output."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config_dict,
        "paths": {k: str(v) for k, v in paths.items()},
    }
    with (out_dir / filename).open("w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def run_training(sequences: list[InteractionSequence], num_skills: int,
                 config: TrainConfig, out_dir, data_path: str | None = None) -> dict:
    """Full protocol: test holdout, k-fold rotation, per-fold artifacts, report."""
    out_dir = Path(out_dir)
    write_manifest(out_dir, "train", config.to_dict(),
                   {"data": data_path or "", "out": out_dir}, config.seed)
    split = split_folds(len(sequences), k=config.k_folds,
                        test_fraction=config.test_fraction, seed=config.seed)
    with (out_dir / "folds.json").open("w") as fh:
        json.dump({"test": split.test, "folds": split.folds}, fh)
        fh.write("\n")
    test_seqs = [sequences[i] for i in split.test]

    fold_reports: list[dict] = []
    for fold_id in range(config.k_folds):
        train_seqs = [sequences[i] for i in split.train_indices(fold_id)]
        val_seqs = [sequences[i] for i in split.folds[fold_id]]
        params, logs = train_fold(train_seqs, val_seqs, num_skills, config, fold_id)
        fold_dir = out_dir / f"fold_{fold_id}"
        fold_dir.mkdir(parents=True, exist_ok=True)
        _write_epoch_logs(fold_dir, logs)
        save_checkpoint(fold_dir / "checkpoint.pkt", params)
        test_report = evaluate_split(params, test_seqs, num_skills,
                                     batch_size=config.batch_size, fold_id=fold_id)
        best = max(logs, key=lambda l: l.val_auc)
        fold_reports.append({
            **test_report.to_dict(),
            "best_epoch": best.epoch,
            "best_val_auc": best.val_auc,
            "epochs_run": len(logs),
        })

    report = {
        "variant": config.variant,
        "folds": fold_reports,
        "mean": {
            "auc": float(np.mean([f["auc"] for f in fold_reports])),
            "acc": float(np.mean([f["acc"] for f in fold_reports])),
            "aucprc": float(np.mean([f["aucprc"] for f in fold_reports])),
        },
    }
    with (out_dir / "report.json").open("w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def run_ablation(sequences: list[InteractionSequence], num_skills: int,
                 config: TrainConfig, out_dir, data_path: str | None = None) -> dict:
    """Train all four loss variants with identical seeds, folds, and inits."""
    out_dir = Path(out_dir)
    write_manifest(out_dir, "ablate", config.to_dict(),
                   {"data": data_path or "", "out": out_dir}, config.seed)
    variants: dict[str, dict] = {}
    for variant in VARIANTS:
        sub = replace(config, variant=variant)
        variants[variant] = run_training(sequences, num_skills, sub,
                                         out_dir / f"variant-{variant}", data_path)
    report = {"variants": variants}
    with (out_dir / "report.json").open("w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def best_fold_checkpoint(run_dir) -> tuple[PKTParams, int]:
    """Load the checkpoint of the fold with the highest best validation AUC."""
    run_dir = Path(run_dir)
    report_path = run_dir / "report.json"
    if not report_path.exists():
        raise FileNotFoundError(f"{run_dir}: no report.json; not a completed run")
    with report_path.open() as fh:
        report = json.load(fh)
    if "folds" not in report:
        raise ValueError(f"{run_dir}: report has no folds (is this an ablation root?)")
    folds = report["folds"]
    best = max(range(len(folds)), key=lambda i: folds[i]["best_val_auc"])
    fold_id = folds[best].get("fold_id", best)
    if fold_id is None:
        fold_id = best
    params = load_checkpoint(run_dir / f"fold_{fold_id}" / "checkpoint.pkt")
    return params, int(fold_id)
