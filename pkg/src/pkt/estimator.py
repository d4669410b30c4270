"""scikit-learn style front end over the training harness."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import no_grad
from .data import InteractionSequence, batch_arrays
from .metrics import roc_auc
from .model import forward_batch
from .training import TrainConfig, train_fold
from .validation import as_sequence_pairs


class PKTClassifier(BaseEstimator):
    """Next-response correctness model with a fit/predict surface.

    ``X`` is a list of per-student interaction sequences, each a
    ``(skills, responses)`` pair of equal-length integer arrays (dicts or
    objects with those attributes also work). Labels live inside the
    sequences, so ``y`` is ignored. ``predict_proba`` returns, per
    sequence, the probability that each response from the second step on
    is correct, aligned with ``next_step_labels``.

    Follows the scikit-learn estimator contract: constructor arguments
    are stored verbatim, fitted state lives in trailing-underscore
    attributes, and ``get_params``/``set_params``/``clone`` work as usual.
    """

    def __init__(self, hidden_dim: int = 64, n_blocks: int = 4,
                 learning_rate: float = 1e-3, batch_size: int = 64,
                 epochs: int = 200, patience: int = 10, gamma: float = 2.0,
                 lambda_rr: float = 1.0, lambda_ci: float = 1.0,
                 variant: str = "full", validation_fraction: float = 0.2,
                 maxlen: int | None = None, num_skills: int | None = None,
                 include_next_skill: bool = False, seed: int = 0):
        self.hidden_dim = hidden_dim
        self.n_blocks = n_blocks
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.gamma = gamma
        self.lambda_rr = lambda_rr
        self.lambda_ci = lambda_ci
        self.variant = variant
        self.validation_fraction = validation_fraction
        self.maxlen = maxlen
        self.num_skills = num_skills
        self.include_next_skill = include_next_skill
        self.seed = seed

    # -- helpers -------------------------------------------------------

    def _to_sequences(self, pairs, num_skills: int, maxlen: int
                      ) -> list[InteractionSequence]:
        out = []
        for i, (skills, responses) in enumerate(pairs):
            if np.any(skills >= num_skills):
                raise ValueError(
                    f"sequence {i}: skill id {int(skills.max())} outside "
                    f"[0, {num_skills})")
            kept_s = [int(s) for s in skills[:maxlen]]
            kept_r = [int(r) for r in responses[:maxlen]]
            pad = maxlen - len(kept_s)
            out.append(InteractionSequence(
                user_id=f"x{i}",
                skills=kept_s + [-1] * pad,
                responses=kept_r + [-1] * pad,
                mask=[True] * len(kept_s) + [False] * pad,
                original_length=len(skills),
            ))
        return out

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise ValueError("PKTClassifier: call fit before predicting")

    # -- estimator API ---------------------------------------------------

    def fit(self, X, y=None) -> "PKTClassifier":
        pairs = as_sequence_pairs(X, "fit")
        num_skills = self.num_skills
        if num_skills is None:
            num_skills = int(max(s.max() for s, _ in pairs)) + 1
        maxlen = self.maxlen
        if maxlen is None:
            maxlen = int(np.floor(np.mean([len(s) for s, _ in pairs]) + 0.5))
        maxlen = max(int(maxlen), 3)
        sequences = self._to_sequences(pairs, num_skills, maxlen)

        if not 0 <= self.validation_fraction < 1:
            raise ValueError("PKTClassifier: validation_fraction must lie in [0, 1)")
        rng = np.random.default_rng(self.seed)
        order = rng.permutation(len(sequences))
        n_val = int(np.floor(len(sequences) * self.validation_fraction + 0.5))
        if 0 < n_val < len(sequences):
            val = [sequences[i] for i in order[:n_val]]
            train = [sequences[i] for i in order[n_val:]]
        else:
            # no held-out slice: early stopping watches the training AUC
            train = sequences
            val = sequences

        config = TrainConfig(
            epochs=self.epochs, patience=self.patience, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed,
            hidden_dim=self.hidden_dim, n_blocks=self.n_blocks,
            include_next_skill=self.include_next_skill, gamma=self.gamma,
            lambda_rr=self.lambda_rr, lambda_ci=self.lambda_ci, variant=self.variant)
        self.params_, self.history_ = train_fold(train, val, num_skills, config)
        self.n_skills_ = num_skills
        self.maxlen_ = maxlen
        return self

    def predict_proba(self, X) -> list[np.ndarray]:
        """Per sequence: P(correct) for responses 2..L (L capped at maxlen)."""
        self._check_fitted()
        pairs = as_sequence_pairs(X, "predict_proba")
        sequences = self._to_sequences(pairs, self.n_skills_, self.maxlen_)
        arrays = batch_arrays(sequences, self.n_skills_)
        out: list[np.ndarray] = []
        with no_grad():
            for start in range(0, len(sequences), self.batch_size):
                sl = slice(start, start + self.batch_size)
                trace = forward_batch(self.params_, arrays["encoded"][sl],
                                      arrays["valid"][sl])
                for row, mask_row in zip(trace.preds.value, arrays["target_mask"][sl]):
                    out.append(row[mask_row].copy())
        return out

    def predict(self, X) -> list[np.ndarray]:
        """Thresholded next-step predictions (0.5, ties count as correct)."""
        return [(p >= 0.5).astype(np.int64) for p in self.predict_proba(X)]

    def next_step_labels(self, X) -> list[np.ndarray]:
        """Labels aligned with predict_proba: responses 2..L of each sequence."""
        self._check_fitted()
        pairs = as_sequence_pairs(X, "next_step_labels")
        return [r[1:self.maxlen_].astype(np.int64) for _, r in pairs]

    def score(self, X, y=None) -> float:
        """ROC-AUC over all next-step predictions, pooled across sequences."""
        probs = np.concatenate(self.predict_proba(X))
        labels = np.concatenate(self.next_step_labels(X))
        return roc_auc(probs, labels)
