"""Acceptance gate: each numbered test exercises one release criterion at
its stated tolerance and emits a single pass/fail line (echoed in the
terminal summary). Criterion 11 needs real benchmark data and only runs
when PKT_ASSIST09_CSV points at it; it reports without gating."""

import csv
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from pkt.autodiff import no_grad
from pkt.cli import main as cli_main
from pkt.data import load_interactions, preprocess, split_folds
from pkt.losses import (ci_focal_loss, count_clamped, kt_loss, rr_loss,
                        total_loss)
from pkt.metrics import average_precision, roc_auc
from pkt.model import PKTConfig, PKTParams, forward_batch
from pkt.synthetic import SynthConfig, generate_dataset
from pkt.training import TrainConfig, evaluate_split, run_training, train_fold
from pkt.autodiff import Tensor

DATA_DIR = Path(__file__).parent / "data"


def report(number, ok, detail):
    line = f"[criterion {number:>2}] {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# -- shared datasets ---------------------------------------------------------


@pytest.fixture(scope="module")
def benchmark_data():
    """500 students, 10 skills, length 30, calibrated to a 1:1 class mix."""
    config = SynthConfig(num_students=500, num_skills=10, mean_length=30,
                         length_spread=5, mastery_increment=0.20, slip=0.03,
                         guess=0.08, target_ratio=1.0, seed=606)
    result = preprocess(generate_dataset(config), maxlen=30)
    assert abs(result.stats.imbalance_ratio - 1.0) < 0.1
    return result


# -- criterion 1: whole-model gradient check ---------------------------------


def test_criterion_01_full_gradient_check():
    started = time.time()
    rng = np.random.default_rng(17)
    e, d, n_blocks, batch, t_steps = 5, 6, 3, 4, 8
    lengths = [8, 6, 4, 3]
    pad = 2 * e
    encoded = np.full((batch, t_steps), pad, dtype=np.int64)
    valid = np.zeros((batch, t_steps), dtype=bool)
    for b, length in enumerate(lengths):
        encoded[b, :length] = rng.integers(0, 2 * e, size=length)
        valid[b, :length] = True
    labels = rng.integers(0, 2, size=(batch, t_steps)).astype(float)
    tmask = np.zeros_like(valid)
    for b, length in enumerate(lengths):
        tmask[b, :length - 1] = True

    params = PKTParams(PKTConfig(num_skills=e, maxlen=t_steps, hidden_dim=d,
                                 n_blocks=n_blocks, seed=3))

    def compute_loss():
        trace = forward_batch(params, encoded, valid)
        loss = total_loss(kt_loss(trace.preds, labels, tmask),
                          rr_loss(trace.sims, labels, tmask),
                          ci_focal_loss(trace.preds, labels, tmask,
                                        alpha_ci=2.0, gamma=2.0),
                          lambda_rr=0.7, lambda_ci=0.4)
        return loss, trace

    loss, trace = compute_loss()
    # no prediction sits on a clamp boundary, so the loss is smooth here
    assert count_clamped(trace.preds, tmask) == 0
    assert count_clamped(trace.sims, tmask) == 0
    loss.backward()
    grads = {name: t.grad.copy() for name, t in params.named()}

    h = 1e-5
    n_checked = 0
    worst = 0.0
    all_ok = True
    for name, t in params.named():
        fd = np.zeros_like(t.value)
        it = np.nditer(t.value, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = t.value[idx]
            t.value[idx] = orig + h
            with no_grad():
                up = float(compute_loss()[0].value)
            t.value[idx] = orig - h
            with no_grad():
                down = float(compute_loss()[0].value)
            t.value[idx] = orig
            fd[idx] = (up - down) / (2.0 * h)
            n_checked += 1
            it.iternext()
        all_ok &= bool(np.allclose(grads[name], fd, rtol=1e-4, atol=1e-8))
        denom = np.maximum(np.abs(fd), 1e-4)
        worst = max(worst, float((np.abs(grads[name] - fd) / denom).max()))
    elapsed = time.time() - started
    report(1, all_ok and elapsed < 60.0,
           f"gradients of all {n_checked} parameters match central differences "
           f"(h=1e-5, rtol 1e-4; worst rel err {worst:.1e}; {elapsed:.1f}s < 60s)")


# -- criterion 2: focal loss reduces to cross-entropy ------------------------


def test_criterion_02_focal_bce_reduction():
    rng = np.random.default_rng(2)
    p = rng.uniform(0.01, 0.99, size=1000)
    y = rng.integers(0, 2, size=1000).astype(float)
    one = np.array([True])
    worst = 0.0
    for i in range(1000):
        pi = Tensor(np.array([p[i]]))
        focal = ci_focal_loss(pi, np.array([y[i]]), one, alpha_ci=1.0, gamma=0.0)
        bce = kt_loss(pi, np.array([y[i]]), one)
        worst = max(worst, abs(float(focal.value) - float(bce.value)))
    report(2, worst <= 1e-12,
           f"focal(gamma=0, alpha=1) equals cross-entropy on 1000 pairs "
           f"(max |diff| {worst:.1e} <= 1e-12)")


# -- criterion 3: ranking metrics against brute force -------------------------


def _pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return total / (len(pos) * len(neg))


def _threshold_ap(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    ap, prev_recall = 0.0, 0.0
    for th in sorted(set(scores.tolist()), reverse=True):
        kept = scores >= th
        tp = int(labels[kept].sum())
        recall = tp / labels.sum()
        ap += (recall - prev_recall) * (tp / int(kept.sum()))
        prev_recall = recall
    return ap


def test_criterion_03_metric_oracles():
    rng = np.random.default_rng(3)
    worst_auc = worst_ap = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 201))
        scores = np.round(rng.random(n), 2)  # heavy ties
        labels = rng.integers(0, 2, size=n)
        labels[:2] = [0, 1]
        worst_auc = max(worst_auc,
                        abs(roc_auc(scores, labels) - _pairwise_auc(scores, labels)))
        worst_ap = max(worst_ap,
                       abs(average_precision(scores, labels) - _threshold_ap(scores, labels)))
    ok = worst_auc <= 1e-12 and worst_ap <= 1e-12
    report(3, ok,
           f"AUC/AUCPRC match brute-force oracles on 100 tied instances "
           f"(max diff {worst_auc:.1e}/{worst_ap:.1e} <= 1e-12)")


# -- criterion 4: causality ---------------------------------------------------


def test_criterion_04_causality():
    started = time.time()
    rng = np.random.default_rng(4)
    e, t_steps, n_seqs = 4, 12, 50
    params = PKTParams(PKTConfig(num_skills=e, maxlen=t_steps, hidden_dim=8,
                                 n_blocks=2, seed=0))
    encoded = rng.integers(0, 2 * e, size=(n_seqs, t_steps))
    valid = np.ones((n_seqs, t_steps), dtype=bool)
    cuts = rng.integers(1, t_steps, size=n_seqs)
    with no_grad():
        base = forward_batch(params, encoded, valid).preds.value.copy()
    mutated = encoded.copy()
    for s, cut in enumerate(cuts):
        mutated[s, cut:] = (mutated[s, cut:] + rng.integers(1, 2 * e,
                                                            size=t_steps - cut)) % (2 * e)
    with no_grad():
        after = forward_batch(params, mutated, valid).preds.value
    unchanged = all(np.array_equal(base[s, :cuts[s]], after[s, :cuts[s]])
                    for s in range(n_seqs))
    changed = sum(not np.allclose(base[s, cuts[s]:], after[s, cuts[s]:])
                  for s in range(n_seqs))
    elapsed = time.time() - started
    report(4, unchanged and elapsed < 60.0,
           f"mutating steps after t left every p_<=t bitwise unchanged on "
           f"{n_seqs} sequences ({changed} suffixes moved; {elapsed:.1f}s < 60s)")


# -- criterion 5: overfit capacity --------------------------------------------


def test_criterion_05_overfit_small_data():
    started = time.time()
    synth = SynthConfig(num_students=20, num_skills=2, mean_length=10,
                        length_spread=0, initial_mastery=0.05,
                        mastery_increment=1.0, slip=0.0, guess=0.05, seed=101)
    result = preprocess(generate_dataset(synth), maxlen=10)
    seqs, e = result.sequences, result.stats.num_skills
    wins = 0
    epochs_needed = []
    for seed in range(10):
        config = TrainConfig(epochs=200, patience=200, batch_size=20,
                             learning_rate=2e-2, hidden_dim=24, n_blocks=2,
                             seed=seed)
        # validation == training set: early stopping tracks the train AUC
        _, logs = train_fold(seqs, seqs, e, config)
        hit = next((l.epoch for l in logs if l.val_auc >= 0.95), None)
        if hit is not None:
            wins += 1
            epochs_needed.append(hit)
    elapsed = time.time() - started
    report(5, wins >= 8 and elapsed < 300.0,
           f"train AUC >= 0.95 within <= 200 epochs for {wins}/10 seeds (need 8; "
           f"median epoch {int(np.median(epochs_needed))}; {elapsed:.0f}s < 300s)")


# -- criterion 6: learnable signal at scale -----------------------------------


def test_criterion_06_benchmark_auc(benchmark_data, tmp_path):
    started = time.time()
    seqs, e = benchmark_data.sequences, benchmark_data.stats.num_skills
    config = TrainConfig(epochs=200, patience=10, batch_size=64,
                         learning_rate=5e-3, hidden_dim=16, n_blocks=2,
                         k_folds=5, test_fraction=0.2, seed=0)
    run_report = run_training(seqs, e, config, tmp_path / "run")
    mean_auc = run_report["mean"]["auc"]
    elapsed = time.time() - started
    report(6, mean_auc >= 0.60 and elapsed < 900.0,
           f"5-fold mean test AUC {mean_auc:.4f} >= 0.60 on 500 students / "
           f"10 skills / length 30, balanced classes ({elapsed:.0f}s < 900s)")


# -- criterion 7: untrained models sit at chance ------------------------------


def test_criterion_07_untrained_auc_band(benchmark_data):
    seqs, e = benchmark_data.sequences, benchmark_data.stats.num_skills
    split = split_folds(len(seqs), k=5, test_fraction=0.2, seed=0)
    test_seqs = [seqs[i] for i in split.test]
    aucs = []
    for seed in range(20):
        params = PKTParams(PKTConfig(num_skills=e, maxlen=30, hidden_dim=16,
                                     n_blocks=2, seed=seed))
        aucs.append(evaluate_split(params, test_seqs, e).auc)
    lo, hi = min(aucs), max(aucs)
    ok = all(0.40 <= a <= 0.60 for a in aucs)
    report(7, ok,
           f"untrained test AUC within [0.40, 0.60] for all 20 init seeds "
           f"(observed [{lo:.3f}, {hi:.3f}])")


# -- criterion 8: focal term earns its keep on imbalanced data ----------------


def test_criterion_08_focal_ablation_wins():
    started = time.time()
    synth = SynthConfig(num_students=200, num_skills=6, mean_length=20,
                        length_spread=4, mastery_increment=0.06, slip=0.15,
                        guess=0.05, target_ratio=0.39, seed=808)
    result = preprocess(generate_dataset(synth), maxlen=20)
    seqs, e = result.sequences, result.stats.num_skills
    ratio = result.stats.imbalance_ratio
    assert 2.5 <= ratio <= 2.9  # the data really is ~2.7:1
    wins = 0
    diffs = []
    for seed in range(10):
        split = split_folds(len(seqs), k=5, test_fraction=0.2, seed=seed)
        train = [seqs[i] for i in split.train_indices(0)]
        val = [seqs[i] for i in split.folds[0]]
        test = [seqs[i] for i in split.test]
        scores = {}
        for variant in ("full", "no-ci"):
            config = TrainConfig(epochs=200, patience=10, batch_size=64,
                                 learning_rate=5e-3, hidden_dim=16, n_blocks=2,
                                 lambda_ci=2.0, gamma=2.0, seed=seed,
                                 variant=variant)
            params, _ = train_fold(train, val, e, config)
            scores[variant] = evaluate_split(params, test, e).aucprc
        wins += scores["full"] >= scores["no-ci"]
        diffs.append(scores["full"] - scores["no-ci"])
    elapsed = time.time() - started
    report(8, wins >= 7,
           f"full model AUCPRC >= no-ci for {wins}/10 seeds on {ratio:.2f}:1 "
           f"imbalanced data (need 7; mean gap {np.mean(diffs):+.4f}; {elapsed:.0f}s)")


# -- criterion 9: preprocessing oracle fixture --------------------------------


def _fixture_expected_interactions():
    """Recount the fixture by hand: null-drop, tag split, <3 filter."""
    per_user = {}
    with (DATA_DIR / "fixture_200.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    for row in rows:
        if not (row["user_id"] and row["skill_ids"] and row["correct"]
                and row["timestamp"]):
            continue
        per_user.setdefault(row["user_id"], 0)
        per_user[row["user_id"]] += len(row["skill_ids"].split("_"))
    return {u: n for u, n in per_user.items() if n >= 3}


def test_criterion_09_fixture_stats(tmp_path, capsys):
    expected_text = (DATA_DIR / "fixture_200_stats.json").read_text()
    expected = json.loads(expected_text)

    assert cli_main(["preprocess", "--in", str(DATA_DIR / "fixture_200.csv"),
                     "--out", str(tmp_path / "ds")]) == 0
    capsys.readouterr()
    assert cli_main(["stats", "--in", str(DATA_DIR / "fixture_200.csv")]) == 0
    printed = capsys.readouterr().out

    stats_match = printed == expected_text
    on_disk = json.loads((tmp_path / "ds" / "stats.json").read_text())
    disk_match = on_disk == expected

    # multi-skill rows expand to one interaction per tag, none lost
    survivors = _fixture_expected_interactions()
    conservation = sum(survivors.values()) == expected["num_records"]
    conservation &= len(survivors) == expected["num_users"]

    payload = json.loads((tmp_path / "ds" / "sequences.json").read_text())
    padding_ok = all(
        item["skills"][sum(item["mask"]):] == [-1] * (len(item["skills"])
                                                      - sum(item["mask"]))
        and item["responses"][sum(item["mask"]):] == [-1] * (len(item["mask"])
                                                             - sum(item["mask"]))
        for item in payload["sequences"])

    report(9, stats_match and disk_match and conservation and padding_ok,
           f"preprocess+stats reproduce the checked-in fixture byte for byte "
           f"({expected['num_records']} interactions conserved from 200 rows; "
           f"-1 padding verified)")


# -- criterion 10: reproducible training runs ---------------------------------


def test_criterion_10_training_determinism(tmp_path, capsys):
    assert cli_main(["preprocess", "--in", str(DATA_DIR / "fixture_200.csv"),
                     "--out", str(tmp_path / "ds")]) == 0
    flags = ["--seed", "3", "--hidden", "4", "--nc", "2", "--epochs", "3",
             "--folds", "2", "--batch-size", "8"]
    assert cli_main(["train", "--data", str(tmp_path / "ds"),
                     "--out", str(tmp_path / "a"), *flags]) == 0
    assert cli_main(["train", "--data", str(tmp_path / "ds"),
                     "--out", str(tmp_path / "b"), *flags]) == 0
    capsys.readouterr()
    identical = True
    for fold in (0, 1):
        for name in ("epochs.csv", "checkpoint.pkt"):
            fa = (tmp_path / "a" / f"fold_{fold}" / name).read_bytes()
            fb = (tmp_path / "b" / f"fold_{fold}" / name).read_bytes()
            identical &= fa == fb
    report(10, identical,
           "two same-seed train runs wrote byte-identical epochs.csv and "
           "checkpoints for every fold")


# -- criterion 11: published benchmark (optional, non-gating) -----------------


def test_criterion_11_assist09_benchmark(tmp_path):
    path = os.environ.get("PKT_ASSIST09_CSV")
    if not path:
        line = ("[criterion 11] SKIP real-benchmark AUC (set PKT_ASSIST09_CSV "
                "to the canonical CSV to run; non-gating)")
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
        pytest.skip("PKT_ASSIST09_CSV not set")
    result = preprocess(load_interactions(path))
    config = TrainConfig(epochs=200, patience=10, batch_size=64,
                         learning_rate=1e-3, hidden_dim=64, n_blocks=4, seed=0)
    run_report = run_training(result.sequences, result.stats.num_skills,
                              config, tmp_path / "run")
    auc = run_report["mean"]["auc"]
    within = abs(auc - 0.80328) <= 0.02
    # informative only: real-data results never gate the suite
    line = (f"[criterion 11] {'PASS' if within else 'INFO'} benchmark AUC "
            f"{auc:.5f} vs 0.80328 +/- 0.02 (non-gating)")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
