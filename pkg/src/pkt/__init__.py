"""Personalized knowledge tracing.

A from-scratch implementation: interaction embeddings feed a GRU, causal
attention capsules summarize each student's history, sigmoid heads vote
on the next response, and a reconstruction-similarity term plus a focal
class-balancing term regularize training. Built on a small float64
reverse-mode tape; no deep-learning framework involved.
"""

__version__ = "0.1.0"

from .autodiff import Adam, Tensor, concat, masked_softmax, no_grad, stack, take_rows
from .data import (CSV_COLUMNS, DatasetStats, FoldSplit, InteractionSequence,
                   PreprocessResult, RawRecord, batch_arrays, compute_stats,
                   encode_sequence, load_interactions, load_processed,
                   padding_index, preprocess, save_processed, split_folds)
from .losses import (EPS, LossConfig, ci_focal_loss, count_clamped, kt_loss,
                     rr_loss, total_loss)
from .metrics import (MetricsReport, accuracy, average_precision,
                      evaluate_predictions, roc_auc)
from .model import (ForwardTrace, PKTConfig, PKTParams, capsule_attention,
                    causal_mask, forward_batch, forward_sequence, gru_step,
                    load_checkpoint, save_checkpoint)
from .synthetic import SynthConfig, generate_dataset, write_csv
from .training import (EpochLog, TrainConfig, VARIANTS, best_fold_checkpoint,
                       evaluate_split, run_ablation, run_training, train_fold)
from .estimator import PKTClassifier

__all__ = [
    "__version__",
    # autodiff
    "Tensor", "Adam", "no_grad", "concat", "stack", "take_rows", "masked_softmax",
    # data
    "CSV_COLUMNS", "RawRecord", "InteractionSequence", "DatasetStats",
    "PreprocessResult", "FoldSplit", "load_interactions", "preprocess",
    "compute_stats", "encode_sequence", "padding_index", "batch_arrays",
    "split_folds", "save_processed", "load_processed",
    # model
    "PKTConfig", "PKTParams", "ForwardTrace", "gru_step", "capsule_attention",
    "causal_mask", "forward_batch", "forward_sequence", "save_checkpoint",
    "load_checkpoint",
    # losses
    "EPS", "LossConfig", "kt_loss", "rr_loss", "ci_focal_loss", "total_loss",
    "count_clamped",
    # metrics
    "MetricsReport", "roc_auc", "accuracy", "average_precision",
    "evaluate_predictions",
    # synthetic
    "SynthConfig", "generate_dataset", "write_csv",
    # training
    "TrainConfig", "EpochLog", "VARIANTS", "train_fold", "evaluate_split",
    "run_training", "run_ablation", "best_fold_checkpoint",
    # estimator
    "PKTClassifier",
]
