"""Interaction logs: CSV loading, cleaning, encoding, and fold splits.

The canonical input is a CSV with header ``user_id,item_id,skill_ids,
correct,timestamp`` where ``skill_ids`` holds one or more integer skill
tags joined by underscores (``12_47``). Preprocessing mirrors the usual
knowledge-tracing recipe:

1. drop records with a null user, skill list, response, or timestamp;
2. split a record tagged with k skills into k consecutive interactions
   sharing the user and response;
3. drop users left with fewer than three interactions;
4. fix every sequence to ``maxlen`` (the rounded average post-split
   length unless overridden), truncating late interactions and padding
   short sequences with -1 plus a boolean mask.

Raw skill tags are remapped to contiguous indices ``[0, num_skills)`` in
ascending numeric order of the surviving tags.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("user_id", "item_id", "skill_ids", "correct", "timestamp")

# sort key for records whose timestamp was null; they are dropped later
# but load() still has to order each user's group totally
_NULL_TS = 1 << 62


@dataclass(frozen=True)
class RawRecord:
    """One logged answer event, possibly tagged with several skills."""

    user_id: str
    question_id: str | None
    skill_ids: tuple[int, ...]
    response: int | None
    timestamp: int | None

    def is_null(self) -> bool:
        return (not self.user_id or not self.skill_ids
                or self.response is None or self.timestamp is None)


@dataclass
class InteractionSequence:
    """A user's fixed-length, padded interaction history."""

    user_id: str
    skills: list[int]
    responses: list[int]
    mask: list[bool]
    original_length: int

    @property
    def valid_length(self) -> int:
        return int(sum(self.mask))

    def validate(self, num_skills: int | None = None) -> None:
        n = len(self.skills)
        if not (len(self.responses) == n and len(self.mask) == n):
            raise ValueError(f"sequence {self.user_id}: ragged field lengths")
        valid = self.valid_length
        if valid < 1:
            raise ValueError(f"sequence {self.user_id}: no unmasked steps")
        if any(self.mask[valid:]):
            raise ValueError(f"sequence {self.user_id}: mask is not a prefix")
        for i in range(n):
            if self.mask[i]:
                if self.responses[i] not in (0, 1):
                    raise ValueError(
                        f"sequence {self.user_id}: response at step {i} is not binary")
                if self.skills[i] < 0:
                    raise ValueError(f"sequence {self.user_id}: negative skill at step {i}")
                if num_skills is not None and self.skills[i] >= num_skills:
                    raise ValueError(
                        f"sequence {self.user_id}: skill {self.skills[i]} out of range "
                        f"[0, {num_skills})")
            else:
                if self.skills[i] != -1 or self.responses[i] != -1:
                    raise ValueError(
                        f"sequence {self.user_id}: padding at step {i} must be -1")
        if self.original_length < valid:
            raise ValueError(
                f"sequence {self.user_id}: original_length {self.original_length} "
                f"smaller than valid prefix {valid}")


@dataclass
class DatasetStats:
    num_users: int
    num_skills: int
    num_records: int
    maxlen: int
    imbalance_ratio: float
    majority_class: int

    def to_dict(self) -> dict:
        return {
            "num_users": self.num_users,
            "num_skills": self.num_skills,
            "num_records": self.num_records,
            "maxlen": self.maxlen,
            "imbalance_ratio": self.imbalance_ratio,
            "majority_class": self.majority_class,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetStats":
        return cls(num_users=int(d["num_users"]), num_skills=int(d["num_skills"]),
                   num_records=int(d["num_records"]), maxlen=int(d["maxlen"]),
                   imbalance_ratio=float(d["imbalance_ratio"]),
                   majority_class=int(d["majority_class"]))


@dataclass
class PreprocessResult:
    sequences: list[InteractionSequence]
    stats: DatasetStats
    skill_map: dict[int, int] = field(default_factory=dict)

    @property
    def num_skills(self) -> int:
        return self.stats.num_skills

    @property
    def maxlen(self) -> int:
        return self.stats.maxlen


def _parse_int(text: str, what: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{where}: {what} must be an integer, got {text!r}") from None


def load_interactions(path) -> list[RawRecord]:
    """Parse the canonical CSV into records grouped per user and sorted by time.

    Empty fields mark a null value and survive parsing (they are dropped
    during preprocessing); malformed values raise with the offending line
    number. Groups keep the order in which users first appear; within a
    group, records sort by timestamp with the stable file order on ties.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise ValueError(
                f"{path}:1: expected header {','.join(CSV_COLUMNS)}, got {','.join(header)}")
        groups: dict[str, list[RawRecord]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(f"{where}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            user, item, skills_tok, correct_tok, ts_tok = (f.strip() for f in row)
            if skills_tok:
                skills = tuple(_parse_int(tok, "skill id", where)
                               for tok in skills_tok.split("_"))
            else:
                skills = ()
            if correct_tok:
                response = _parse_int(correct_tok, "correct", where)
                if response not in (0, 1):
                    raise ValueError(f"{where}: correct must be 0 or 1, got {response}")
            else:
                response = None
            timestamp = _parse_int(ts_tok, "timestamp", where) if ts_tok else None
            rec = RawRecord(user_id=user, question_id=item or None,
                            skill_ids=skills, response=response, timestamp=timestamp)
            groups.setdefault(user, []).append(rec)
    out: list[RawRecord] = []
    for user in groups:
        out.extend(sorted(groups[user],
                          key=lambda r: r.timestamp if r.timestamp is not None else _NULL_TS))
    return out


def preprocess(records: list[RawRecord], maxlen: int | None = None) -> PreprocessResult:
    """Clean, split, filter, and pad raw records into model-ready sequences.

    ``maxlen`` overrides the default target length, which is the average
    post-split sequence length rounded half-up.
    """
    per_user: dict[str, list[tuple[int, int]]] = {}
    for rec in records:
        if rec.is_null():
            continue
        rows = per_user.setdefault(rec.user_id, [])
        # one interaction per tagged skill, same user/response/position
        for raw_skill in rec.skill_ids:
            rows.append((raw_skill, rec.response))
    survivors = {u: rows for u, rows in per_user.items() if len(rows) >= 3}
    if not survivors:
        raise ValueError("preprocess: no users with at least three interactions")

    raw_skills = sorted({s for rows in survivors.values() for s, _ in rows})
    skill_map = {raw: idx for idx, raw in enumerate(raw_skills)}

    lengths = [len(rows) for rows in survivors.values()]
    if maxlen is None:
        maxlen = int(np.floor(sum(lengths) / len(lengths) + 0.5))
    else:
        maxlen = int(maxlen)
        if maxlen < 3:
            raise ValueError(f"preprocess: maxlen must be at least 3, got {maxlen}")

    sequences: list[InteractionSequence] = []
    for user, rows in survivors.items():
        kept = rows[:maxlen]
        pad = maxlen - len(kept)
        sequences.append(InteractionSequence(
            user_id=user,
            skills=[skill_map[s] for s, _ in kept] + [-1] * pad,
            responses=[a for _, a in kept] + [-1] * pad,
            mask=[True] * len(kept) + [False] * pad,
            original_length=len(rows),
        ))
    stats = compute_stats(sequences, num_skills=len(skill_map))
    return PreprocessResult(sequences=sequences, stats=stats, skill_map=skill_map)


def compute_stats(sequences: list[InteractionSequence],
                  num_skills: int | None = None) -> DatasetStats:
    """Summary statistics over padded sequences.

    The imbalance ratio is majority/minority over unmasked responses only;
    ``num_records`` counts pre-truncation interactions via original_length.
    """
    if not sequences:
        raise ValueError("compute_stats: empty sequence list")
    maxlen = len(sequences[0].skills)
    ones = 0
    zeros = 0
    max_skill = -1
    for seq in sequences:
        if len(seq.skills) != maxlen:
            raise ValueError("compute_stats: sequences have inconsistent lengths")
        for skill, resp, keep in zip(seq.skills, seq.responses, seq.mask):
            if not keep:
                continue
            if resp == 1:
                ones += 1
            else:
                zeros += 1
            if skill > max_skill:
                max_skill = skill
    if ones == 0 or zeros == 0:
        raise ValueError("compute_stats: all responses identical; imbalance ratio undefined")
    majority = 1 if ones >= zeros else 0
    ratio = max(ones, zeros) / min(ones, zeros)
    return DatasetStats(
        num_users=len(sequences),
        num_skills=int(num_skills) if num_skills is not None else max_skill + 1,
        num_records=sum(seq.original_length for seq in sequences),
        maxlen=maxlen,
        imbalance_ratio=ratio,
        majority_class=majority,
    )


def padding_index(num_skills: int) -> int:
    """Reserved embedding row for padded steps."""
    return 2 * num_skills


def encode_sequence(seq: InteractionSequence, num_skills: int) -> np.ndarray:
    """Map (skill, response) pairs to interaction indices s + a * num_skills.

    Padded steps map to the reserved index ``2 * num_skills``.
    """
    seq.validate(num_skills)
    out = np.empty(len(seq.skills), dtype=np.int64)
    pad = padding_index(num_skills)
    for i, (s, a, keep) in enumerate(zip(seq.skills, seq.responses, seq.mask)):
        out[i] = s + a * num_skills if keep else pad
    return out


def batch_arrays(sequences: list[InteractionSequence], num_skills: int) -> dict[str, np.ndarray]:
    """Stack sequences into model-ready arrays.

    ``targets[:, t]`` is the response at step t+1 and ``target_mask`` marks
    positions with a real next response, so predictions line up with the
    next-step labels they score.
    """
    if not sequences:
        raise ValueError("batch_arrays: empty sequence list")
    encoded = np.stack([encode_sequence(s, num_skills) for s in sequences])
    valid = np.array([s.mask for s in sequences], dtype=bool)
    responses = np.array([[a if a >= 0 else 0 for a in s.responses] for s in sequences],
                         dtype=np.float64)
    targets = np.zeros_like(responses)
    targets[:, :-1] = responses[:, 1:]
    target_mask = np.zeros_like(valid)
    target_mask[:, :-1] = valid[:, 1:]
    return {"encoded": encoded, "valid": valid, "targets": targets,
            "target_mask": target_mask}


@dataclass
class FoldSplit:
    """User-level indices: one held-out test slice plus k train-pool folds."""

    test: list[int]
    folds: list[list[int]]

    def train_indices(self, fold: int) -> list[int]:
        out: list[int] = []
        for i, f in enumerate(self.folds):
            if i != fold:
                out.extend(f)
        return out


def split_folds(num_users: int, k: int = 5, test_fraction: float = 0.2,
                seed: int = 0) -> FoldSplit:
    """Deterministic user-level split: test holdout, then k folds of the rest."""
    if k < 2:
        raise ValueError(f"split_folds: k must be at least 2, got {k}")
    if not 0 < test_fraction < 1:
        raise ValueError(f"split_folds: test_fraction must lie in (0, 1), got {test_fraction}")
    if num_users < k + 1:
        raise ValueError(f"split_folds: need at least {k + 1} users, got {num_users}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(num_users)
    n_test = max(1, int(np.floor(num_users * test_fraction + 0.5)))
    if num_users - n_test < k:
        n_test = num_users - k
    test = [int(i) for i in order[:n_test]]
    pool = order[n_test:]
    base, extra = divmod(len(pool), k)
    folds: list[list[int]] = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append([int(j) for j in pool[start:start + size]])
        start += size
    return FoldSplit(test=test, folds=folds)


# -- persistence ---------------------------------------------------------


def save_processed(result: PreprocessResult, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "stats.json").open("w") as fh:
        json.dump(result.stats.to_dict(), fh, indent=2)
        fh.write("\n")
    with (out_dir / "skill_map.json").open("w") as fh:
        json.dump({str(raw): idx for raw, idx in result.skill_map.items()}, fh, indent=2)
        fh.write("\n")
    payload = {
        "num_skills": result.num_skills,
        "maxlen": result.maxlen,
        "sequences": [
            {
                "user_id": s.user_id,
                "skills": s.skills,
                "responses": s.responses,
                "mask": [int(b) for b in s.mask],
                "original_length": s.original_length,
            }
            for s in result.sequences
        ],
    }
    with (out_dir / "sequences.json").open("w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_processed(data_dir) -> PreprocessResult:
    data_dir = Path(data_dir)
    seq_path = data_dir / "sequences.json"
    if not seq_path.exists():
        raise FileNotFoundError(f"{data_dir}: not a processed dataset (missing sequences.json)")
    with seq_path.open() as fh:
        payload = json.load(fh)
    sequences = [
        InteractionSequence(
            user_id=item["user_id"],
            skills=[int(x) for x in item["skills"]],
            responses=[int(x) for x in item["responses"]],
            mask=[bool(x) for x in item["mask"]],
            original_length=int(item["original_length"]),
        )
        for item in payload["sequences"]
    ]
    with (data_dir / "stats.json").open() as fh:
        stats = DatasetStats.from_dict(json.load(fh))
    skill_map: dict[int, int] = {}
    map_path = data_dir / "skill_map.json"
    if map_path.exists():
        with map_path.open() as fh:
            skill_map = {int(k): int(v) for k, v in json.load(fh).items()}
    return PreprocessResult(sequences=sequences, stats=stats, skill_map=skill_map)
