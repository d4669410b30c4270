"""Loss terms over masked per-step predictions.

All three terms are means over unmasked positions. Probabilities are
clamped to [EPS, 1 - EPS] before any log; ``count_clamped`` reports how
often that fired so training logs can surface saturation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor

EPS = 1e-7


@dataclass
class LossConfig:
    """Weights for the combined objective L_KT + lambda_rr*L_RR + lambda_ci*L_CI."""

    lambda_rr: float = 1.0
    lambda_ci: float = 1.0
    gamma: float = 2.0
    alpha_ci: float = 1.0
    minority_class: int = 0

    def __post_init__(self) -> None:
        if self.lambda_rr < 0 or self.lambda_ci < 0:
            raise ValueError("LossConfig: lambda weights must be nonnegative")
        if self.gamma < 0:
            raise ValueError(f"LossConfig: gamma must be nonnegative, got {self.gamma}")
        if self.alpha_ci < 1:
            raise ValueError(f"LossConfig: alpha_ci must be >= 1, got {self.alpha_ci}")
        if self.minority_class not in (0, 1):
            raise ValueError(f"LossConfig: minority_class must be 0 or 1, got {self.minority_class}")


def _prep(p: Tensor, labels, mask, op: str) -> tuple[np.ndarray, np.ndarray, int]:
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != p.shape:
        raise ValueError(f"{op}: labels shape {labels.shape} does not match predictions {p.shape}")
    m = np.asarray(mask)
    if m.shape != p.shape:
        raise ValueError(f"{op}: mask shape {m.shape} does not match predictions {p.shape}")
    m = m.astype(bool)
    count = int(m.sum())
    if count == 0:
        raise ValueError(f"{op}: no unmasked steps")
    lab = labels[m]
    if np.any((lab != 0.0) & (lab != 1.0)):
        raise ValueError(f"{op}: labels must be 0 or 1 at unmasked steps")
    return labels, m, count


def count_clamped(p: Tensor, mask) -> int:
    """Unmasked predictions outside [EPS, 1 - EPS] (clamp events)."""
    m = np.asarray(mask).astype(bool)
    v = p.value
    return int(np.sum(((v < EPS) | (v > 1.0 - EPS)) & m))


def kt_loss(p: Tensor, labels, mask) -> Tensor:
    """Masked-mean binary cross-entropy of next-step predictions."""
    labels, m, count = _prep(p, labels, mask, "kt_loss")
    pc = p.clip(EPS, 1.0 - EPS)
    term = Tensor(labels) * pc.log() + Tensor(1.0 - labels) * (1.0 - pc).log()
    return -(term.sum(mask=m) / count)


def rr_loss(sim: Tensor, labels, mask) -> Tensor:
    """Cross-entropy of the reconstruction similarity against the same labels."""
    return kt_loss(sim, labels, mask)


def ci_focal_loss(p: Tensor, labels, mask, alpha_ci: float, gamma: float,
                  minority_class: int = 0) -> Tensor:
    """Two-sided focal term: hard examples up-weighted by (1 - p*)^gamma.

    ``p*`` is the probability assigned to the true class; steps whose label
    is the training-set minority class are additionally weighted by
    ``alpha_ci``.
    """
    if gamma < 0:
        raise ValueError(f"ci_focal_loss: gamma must be nonnegative, got {gamma}")
    if alpha_ci < 1:
        raise ValueError(f"ci_focal_loss: alpha_ci must be >= 1, got {alpha_ci}")
    if minority_class not in (0, 1):
        raise ValueError(f"ci_focal_loss: minority_class must be 0 or 1, got {minority_class}")
    labels, m, count = _prep(p, labels, mask, "ci_focal_loss")
    pc = p.clip(EPS, 1.0 - EPS)
    p_true = Tensor(labels) * pc + Tensor(1.0 - labels) * (1.0 - pc)
    weights = np.where(labels == minority_class, float(alpha_ci), 1.0)
    term = Tensor(weights) * (1.0 - p_true).pow(gamma) * p_true.log()
    return -(term.sum(mask=m) / count)


def total_loss(l_kt: Tensor, l_rr: Tensor | None = None, l_ci: Tensor | None = None,
               lambda_rr: float = 0.0, lambda_ci: float = 0.0) -> Tensor:
    """Exact weighted sum of the active terms; zero weights drop a term."""
    if lambda_rr < 0 or lambda_ci < 0:
        raise ValueError("total_loss: lambda weights must be nonnegative")
    total = l_kt
    if lambda_rr > 0:
        if l_rr is None:
            raise ValueError("total_loss: lambda_rr > 0 but no reconstruction loss given")
        total = total + lambda_rr * l_rr
    if lambda_ci > 0:
        if l_ci is None:
            raise ValueError("total_loss: lambda_ci > 0 but no focal loss given")
        total = total + lambda_ci * l_ci
    return total
