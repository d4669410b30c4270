"""Input validation helpers shared by the metrics and the estimator."""

from __future__ import annotations

import numpy as np


def check_scores(scores, op: str) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"{op}: scores must be 1-d, got shape {s.shape}")
    if s.size == 0:
        raise ValueError(f"{op}: empty scores")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{op}: scores must be finite")
    return s


def check_binary_labels(labels, op: str) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError(f"{op}: labels must be 1-d, got shape {y.shape}")
    y = y.astype(np.int64)
    if y.size and not np.all((y == 0) | (y == 1)):
        raise ValueError(f"{op}: labels must be 0 or 1")
    return y


def check_same_length(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"{op}: got {a.shape[0]} scores but {b.shape[0]} labels")


def as_sequence_pairs(X, op: str = "fit") -> list[tuple[np.ndarray, np.ndarray]]:
    """Coerce estimator input into (skills, responses) integer array pairs.

    Accepts an iterable of 2-tuples/lists, dicts with ``skills`` and
    ``responses`` keys, or objects exposing those attributes (masked
    entries of padded objects are stripped).
    """
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    if X is None:
        raise ValueError(f"{op}: X is None")
    for i, item in enumerate(X):
        if hasattr(item, "skills") and hasattr(item, "responses"):
            skills = np.asarray(item.skills)
            responses = np.asarray(item.responses)
            if hasattr(item, "mask"):
                keep = np.asarray(item.mask, dtype=bool)
                skills, responses = skills[keep], responses[keep]
        elif isinstance(item, dict):
            try:
                skills = np.asarray(item["skills"])
                responses = np.asarray(item["responses"])
            except KeyError as exc:
                raise ValueError(f"{op}: sequence {i} lacks key {exc}") from None
        else:
            try:
                skills, responses = item
            except (TypeError, ValueError):
                raise ValueError(
                    f"{op}: sequence {i} must be a (skills, responses) pair, a dict, "
                    "or expose .skills/.responses") from None
            skills = np.asarray(skills)
            responses = np.asarray(responses)
        if skills.ndim != 1 or responses.ndim != 1:
            raise ValueError(f"{op}: sequence {i} fields must be 1-d")
        if len(skills) != len(responses):
            raise ValueError(
                f"{op}: sequence {i} has {len(skills)} skills but {len(responses)} responses")
        if len(skills) < 3:
            raise ValueError(f"{op}: sequence {i} is shorter than three interactions")
        skills = skills.astype(np.int64)
        responses = responses.astype(np.int64)
        if np.any(skills < 0):
            raise ValueError(f"{op}: sequence {i} has negative skill ids")
        if not np.all((responses == 0) | (responses == 1)):
            raise ValueError(f"{op}: sequence {i} responses must be 0 or 1")
        pairs.append((skills, responses))
    if not pairs:
        raise ValueError(f"{op}: X is empty")
    return pairs
