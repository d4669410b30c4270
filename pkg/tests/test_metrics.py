import numpy as np
import pytest

from pkt.metrics import accuracy, average_precision, evaluate_predictions, roc_auc


def brute_force_auc(scores, labels):
    """Pairwise definition: P(score_pos > score_neg) + 0.5 P(equal)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_force_ap(scores, labels):
    """Step-integrated precision/recall over distinct score thresholds."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = labels.sum()
    thresholds = sorted(set(scores.tolist()), reverse=True)
    ap = 0.0
    prev_recall = 0.0
    for th in thresholds:
        kept = scores >= th
        tp = int(labels[kept].sum())
        precision = tp / int(kept.sum())
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def test_auc_known_example():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [0, 0, 1, 1]
    assert roc_auc(scores, labels) == 0.75


def test_auc_perfect_and_inverted():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auc_all_tied_is_half():
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_ap_known_example():
    assert average_precision([0.9, 0.1], [0, 1]) == 0.5


def test_ap_perfect():
    assert average_precision([0.2, 0.9, 0.8], [0, 1, 1]) == 1.0


def test_accuracy_threshold_boundary():
    # exactly 0.5 counts as a positive prediction
    assert accuracy([0.5, 0.49], [1, 0]) == 1.0
    assert accuracy([0.5, 0.51], [0, 0]) == 0.0


def test_auc_matches_brute_force_with_ties():
    rng = np.random.default_rng(42)
    for trial in range(100):
        n = int(rng.integers(10, 201))
        # quantized scores force plenty of ties
        scores = np.round(rng.random(n), 2)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        expected = brute_force_auc(scores, labels)
        assert abs(roc_auc(scores, labels) - expected) <= 1e-12, f"trial {trial}"


def test_ap_matches_brute_force_with_ties():
    rng = np.random.default_rng(43)
    for trial in range(100):
        n = int(rng.integers(10, 201))
        scores = np.round(rng.random(n), 2)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[0] = 1
        expected = brute_force_ap(scores, labels)
        assert abs(average_precision(scores, labels) - expected) <= 1e-12, f"trial {trial}"


def test_auc_invariant_under_monotone_transform(rng):
    scores = rng.random(80)
    labels = rng.integers(0, 2, size=80)
    labels[0], labels[1] = 0, 1
    base = roc_auc(scores, labels)
    assert roc_auc(np.exp(3.0 * scores), labels) == pytest.approx(base, abs=1e-12)


def test_metrics_invariant_under_permutation(rng):
    scores = rng.random(60)
    labels = rng.integers(0, 2, size=60)
    labels[:2] = [0, 1]
    perm = rng.permutation(60)
    assert roc_auc(scores[perm], labels[perm]) == pytest.approx(
        roc_auc(scores, labels), abs=1e-12)
    assert average_precision(scores[perm], labels[perm]) == pytest.approx(
        average_precision(scores, labels), abs=1e-12)


def test_single_class_rejected():
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.9], [1, 1])
    with pytest.raises(ValueError):
        average_precision([0.1, 0.9], [0, 0])  # no positives: recall undefined


def test_input_validation():
    with pytest.raises(ValueError):
        roc_auc([0.1, np.nan], [0, 1])
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.9], [0, 2])
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.9, 0.5], [0, 1])
    with pytest.raises(ValueError):
        roc_auc([], [])


def test_evaluate_predictions_report():
    report = evaluate_predictions([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert report.auc == 0.75
    assert report.acc == 0.75
    assert report.n_predictions == 4
    assert report.n_positive == 2
    d = report.to_dict()
    assert set(d) == {"auc", "acc", "aucprc", "n_predictions", "n_positive",
                      "threshold", "fold_id"}
