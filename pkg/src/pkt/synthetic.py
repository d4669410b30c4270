"""Synthetic interaction logs from a mastery/slip/guess student simulator.

Each student-skill pair starts at ``initial_mastery`` and gains
``mastery_increment`` (capped at 1) after every practice of that skill.
An answer is correct with probability
``mastery * (1 - slip) + (1 - mastery) * guess``.

When ``target_ratio`` (correct:wrong) is set, the initial mastery is
recalibrated by bisection so the realized ratio lands within +/-0.05 of
the target; this holds once the dataset has at least ~10k interactions.
The random draws are fixed before calibration, so the realized ratio is
a monotone function of the initial mastery and the whole dataset is a
deterministic function of the config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RawRecord


@dataclass
class SynthConfig:
    num_students: int = 100
    num_skills: int = 5
    mean_length: float = 20.0
    length_spread: float = 5.0
    initial_mastery: float = 0.3
    mastery_increment: float = 0.05
    slip: float = 0.1
    guess: float = 0.2
    target_ratio: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_students < 1:
            raise ValueError(f"SynthConfig: num_students must be >= 1, got {self.num_students}")
        if self.num_skills < 1:
            raise ValueError(f"SynthConfig: num_skills must be >= 1, got {self.num_skills}")
        if self.mean_length < 3:
            raise ValueError(f"SynthConfig: mean_length must be >= 3, got {self.mean_length}")
        if self.length_spread < 0:
            raise ValueError(f"SynthConfig: length_spread must be >= 0, got {self.length_spread}")
        for name in ("initial_mastery", "mastery_increment", "slip", "guess"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"SynthConfig: {name} must lie in [0, 1], got {val}")
        if self.target_ratio is not None:
            if self.target_ratio <= 0:
                raise ValueError(
                    f"SynthConfig: target_ratio must be positive, got {self.target_ratio}")
            if self.slip + self.guess >= 1.0:
                raise ValueError(
                    "SynthConfig: calibration needs slip + guess < 1 so correctness "
                    "grows with mastery")

    def to_dict(self) -> dict:
        return {
            "num_students": self.num_students,
            "num_skills": self.num_skills,
            "mean_length": self.mean_length,
            "length_spread": self.length_spread,
            "initial_mastery": self.initial_mastery,
            "mastery_increment": self.mastery_increment,
            "slip": self.slip,
            "guess": self.guess,
            "target_ratio": self.target_ratio,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f: d[f] for f in cls.__dataclass_fields__ if f in d}
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"SynthConfig: unknown fields {sorted(extra)}")
        return cls(**known)


def _correct_fraction(initial: float, prior_counts: np.ndarray, draws: np.ndarray,
                      config: SynthConfig) -> float:
    mastery = np.minimum(1.0, initial + config.mastery_increment * prior_counts)
    p_correct = mastery * (1.0 - config.slip) + (1.0 - mastery) * config.guess
    return float(np.mean(draws < p_correct))


def _calibrate_initial_mastery(prior_counts: np.ndarray, draws: np.ndarray,
                               config: SynthConfig) -> float:
    target = config.target_ratio / (1.0 + config.target_ratio)
    lo_frac = _correct_fraction(0.0, prior_counts, draws, config)
    hi_frac = _correct_fraction(1.0, prior_counts, draws, config)
    if not lo_frac <= target <= hi_frac:
        raise ValueError(
            f"SynthConfig: target_ratio {config.target_ratio} is unreachable; realized "
            f"correct fraction spans [{lo_frac:.4f}, {hi_frac:.4f}] but the target "
            f"needs {target:.4f}")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _correct_fraction(mid, prior_counts, draws, config) < target:
            lo = mid
        else:
            hi = mid
    return hi


def generate_dataset(config: SynthConfig) -> list[RawRecord]:
    """Simulate students; deterministic for a fixed config."""
    rng = np.random.default_rng(config.seed)
    lengths = np.clip(
        np.rint(rng.normal(config.mean_length, config.length_spread, config.num_students)),
        3, None).astype(int)
    skills = [rng.integers(0, config.num_skills, size=n) for n in lengths]
    draws = [rng.random(n) for n in lengths]

    # how many times the student practiced this skill before each step;
    # mastery at any step is then a closed form of the initial value
    prior_counts = []
    for seq in skills:
        seen = np.zeros(config.num_skills, dtype=np.int64)
        counts = np.empty(len(seq), dtype=np.int64)
        for i, s in enumerate(seq):
            counts[i] = seen[s]
            seen[s] += 1
        prior_counts.append(counts)

    flat_counts = np.concatenate(prior_counts)
    flat_draws = np.concatenate(draws)
    initial = config.initial_mastery
    if config.target_ratio is not None:
        initial = _calibrate_initial_mastery(flat_counts, flat_draws, config)

    records: list[RawRecord] = []
    question = 0
    for u in range(config.num_students):
        mastery = np.minimum(1.0, initial + config.mastery_increment * prior_counts[u])
        p_correct = mastery * (1.0 - config.slip) + (1.0 - mastery) * config.guess
        correct = draws[u] < p_correct
        for t in range(lengths[u]):
            records.append(RawRecord(
                user_id=f"u{u:05d}",
                question_id=f"q{question}",
                skill_ids=(int(skills[u][t]),),
                response=int(correct[t]),
                timestamp=t,
            ))
            question += 1
    return records


def write_csv(records: list[RawRecord], path) -> None:
    """Serialize records in the canonical CSV column order."""
    import csv
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "item_id", "skill_ids", "correct", "timestamp"])
        for r in records:
            writer.writerow([
                r.user_id,
                r.question_id or "",
                "_".join(str(s) for s in r.skill_ids),
                "" if r.response is None else r.response,
                "" if r.timestamp is None else r.timestamp,
            ])
