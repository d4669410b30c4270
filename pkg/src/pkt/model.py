"""The PKT network.

Interactions embed as rows of a ``(2E+1, d)`` table (index ``s + a*E``,
with ``2E`` reserved for padding). A GRU turns the embedded history into
per-step hidden states ``h_t``. Two read-outs summarize each causal
prefix ``h_1..h_t``:

* the student representation ``u_s,t`` (mean of the prefix), and
* ``n_blocks`` parallel attention capsules, each scoring the prefix with
  its own vector, soft-maxing over ``i <= t``, and pooling ``u_c,j,t``.

Per block, a sigmoid head maps the capsule to a probability ``p_j,t``;
the model prediction ``p_t`` (the chance the response at step t+1 is
correct) is the mean over blocks. The reconstruction ``r_t`` is the
elementwise max over blocks of ``p_j,t * u_c,j,t``, and the auxiliary
similarity ``sim_t = sigmoid(u_s,t . r_t)`` scores how well the weighted
capsules reproduce the student state.

Everything is causal: position t never reads interactions after t, which
the attention masks enforce with exact zeros.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, masked_softmax, stack, take_rows
from .data import InteractionSequence, encode_sequence

_CKPT_MAGIC = b"PKTCKPT1"


@dataclass
class PKTConfig:
    """Architecture hyperparameters; ``seed`` fixes the init draw."""

    num_skills: int
    maxlen: int
    hidden_dim: int = 64
    n_blocks: int = 4
    seed: int = 0
    include_next_skill: bool = False
    whole_sequence_mean: bool = False

    def __post_init__(self) -> None:
        if self.num_skills < 1:
            raise ValueError(f"PKTConfig: num_skills must be >= 1, got {self.num_skills}")
        if self.maxlen < 3:
            raise ValueError(f"PKTConfig: maxlen must be >= 3, got {self.maxlen}")
        if self.hidden_dim < 1:
            raise ValueError(f"PKTConfig: hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.n_blocks < 2:
            raise ValueError(f"PKTConfig: n_blocks must be >= 2, got {self.n_blocks}")

    @property
    def padding_index(self) -> int:
        return 2 * self.num_skills

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PKTConfig":
        return cls(num_skills=int(d["num_skills"]), maxlen=int(d["maxlen"]),
                   hidden_dim=int(d["hidden_dim"]), n_blocks=int(d["n_blocks"]),
                   seed=int(d["seed"]),
                   include_next_skill=bool(d["include_next_skill"]),
                   whole_sequence_mean=bool(d["whole_sequence_mean"]))


class PKTParams:
    """Trainable tensors: embedding, GRU gates, attention vectors, heads.

    Weights draw from U[-1/sqrt(d), 1/sqrt(d)] under the config seed;
    biases start at zero.
    """

    def __init__(self, config: PKTConfig, _skip_init: bool = False):
        self.config = config
        if _skip_init:
            return
        d = config.hidden_dim
        rng = np.random.default_rng(config.seed)
        bound = 1.0 / np.sqrt(d)

        def weight(shape):
            return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

        def bias(shape):
            return Tensor(np.zeros(shape), requires_grad=True)

        self.embedding = weight((2 * config.num_skills + 1, d))
        self.w_z = weight((d, 2 * d))
        self.w_r = weight((d, 2 * d))
        self.w_h = weight((d, 2 * d))
        self.b_z = bias(d)
        self.b_r = bias(d)
        self.b_h = bias(d)
        head_in = 2 * d if config.include_next_skill else d
        self.attention = [weight((d, 1)) for _ in range(config.n_blocks)]
        self.head_w = [weight((1, head_in)) for _ in range(config.n_blocks)]
        self.head_b = [bias(1) for _ in range(config.n_blocks)]

    def named(self) -> list[tuple[str, Tensor]]:
        items = [
            ("embedding", self.embedding),
            ("w_z", self.w_z), ("w_r", self.w_r), ("w_h", self.w_h),
            ("b_z", self.b_z), ("b_r", self.b_r), ("b_h", self.b_h),
        ]
        for j in range(self.config.n_blocks):
            items.append((f"attention_{j}", self.attention[j]))
            items.append((f"head_w_{j}", self.head_w[j]))
            items.append((f"head_b_{j}", self.head_b[j]))
        return items

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def num_parameters(self) -> int:
        return sum(t.value.size for t in self.tensors())

    def copy(self) -> "PKTParams":
        return PKTParams.from_arrays(self.config,
                                     {name: t.value.copy() for name, t in self.named()})

    @classmethod
    def from_arrays(cls, config: PKTConfig, arrays: dict[str, np.ndarray]) -> "PKTParams":
        params = cls(config, _skip_init=True)
        params.embedding = Tensor(arrays["embedding"], requires_grad=True)
        for name in ("w_z", "w_r", "w_h", "b_z", "b_r", "b_h"):
            setattr(params, name, Tensor(arrays[name], requires_grad=True))
        params.attention = [Tensor(arrays[f"attention_{j}"], requires_grad=True)
                            for j in range(config.n_blocks)]
        params.head_w = [Tensor(arrays[f"head_w_{j}"], requires_grad=True)
                         for j in range(config.n_blocks)]
        params.head_b = [Tensor(arrays[f"head_b_{j}"], requires_grad=True)
                         for j in range(config.n_blocks)]
        return params


def save_checkpoint(path, params: PKTParams) -> None:
    """Write config plus named tensors to a byte-reproducible container.

    Layout: magic, u64 header length, JSON header (config and the ordered
    tensor names/shapes), then raw little-endian float64 payloads in C
    order. Round-trips bit-exactly.
    """
    named = params.named()
    header = {
        "config": params.config.to_dict(),
        "tensors": [{"name": n, "shape": list(t.value.shape)} for n, t in named],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in named:
            fh.write(np.ascontiguousarray(t.value, dtype="<f8").tobytes())


def load_checkpoint(path) -> PKTParams:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a PKT checkpoint")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        config = PKTConfig.from_dict(header["config"])
        arrays: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(int(x) for x in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ValueError(f"{path}: truncated checkpoint")
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return PKTParams.from_arrays(config, arrays)


@dataclass
class ForwardTrace:
    """Everything the forward pass produces, still on the tape.

    Shapes: hidden/student/recon (B, T, d); capsules and attention are
    per-block lists of (B, T, d) and (B, T, T); block_probs, preds and
    sims are (B, T). ``preds[:, t]`` scores the response at step t+1.
    """

    hidden: Tensor
    student: Tensor
    capsules: list[Tensor]
    attention: list[Tensor]
    block_probs: list[Tensor]
    preds: Tensor
    recon: Tensor
    sims: Tensor


def gru_step(h_prev: Tensor, e_t: Tensor, params: PKTParams) -> Tensor:
    """One GRU update on (d,) vectors or (B, d) batches.

    Gates read the stitched vector [h_prev, e_t]; the candidate state
    reads [r * h_prev, e_t]; output interpolates h_prev toward the
    candidate by z.
    """
    hx = concat([h_prev, e_t])
    z = (hx @ params.w_z.T + params.b_z).sigmoid()
    r = (hx @ params.w_r.T + params.b_r).sigmoid()
    rx = concat([r * h_prev, e_t])
    h_tilde = (rx @ params.w_h.T + params.b_h).tanh()
    return (1.0 - z) * h_prev + z * h_tilde


def capsule_attention(hidden: Tensor, attn_weight: Tensor, mask: np.ndarray
                      ) -> tuple[Tensor, Tensor]:
    """Per-step attention pooling over causal prefixes.

    ``hidden`` is (B, T, d) or (T, d); ``mask[..., t, i]`` marks which
    source position i each query step t may read. Returns the attention
    matrix with rows summing to one over unmasked entries (exact zeros
    elsewhere) and the pooled capsules.
    """
    t_steps = hidden.shape[-2]
    scores = (hidden @ attn_weight).reshape(hidden.shape[:-1])
    logits = scores.repeat_rows(t_steps)
    alpha = masked_softmax(logits, mask)
    return alpha, alpha @ hidden


def causal_mask(valid: np.ndarray) -> np.ndarray:
    """(B, T) validity -> (B, T, T) prefix mask: row t reads valid i <= t."""
    t_steps = valid.shape[-1]
    tri = np.tril(np.ones((t_steps, t_steps), dtype=bool))
    return valid[..., None, :] & tri


def _prefix_mean_matrix(valid: np.ndarray, whole_sequence: bool) -> np.ndarray:
    """Constant (B, T, T) operator averaging hidden states over each prefix.

    With ``whole_sequence`` every row averages the full valid span
    instead (the non-causal ablation).
    """
    if whole_sequence:
        t_steps = valid.shape[-1]
        m = np.repeat(valid[..., None, :], t_steps, axis=-2).astype(np.float64)
    else:
        m = causal_mask(valid).astype(np.float64)
    counts = m.sum(axis=-1, keepdims=True)
    # rows past the valid prefix fall back to the whole valid span
    empty = counts == 0
    if empty.any():
        fallback = np.repeat(valid[..., None, :], valid.shape[-1], axis=-2).astype(np.float64)
        m = np.where(empty, fallback, m)
        counts = m.sum(axis=-1, keepdims=True)
    return m / counts


def forward_batch(params: PKTParams, encoded: np.ndarray, valid: np.ndarray
                  ) -> ForwardTrace:
    """Run the network over a batch of encoded sequences.

    ``encoded`` is (B, T) interaction indices, ``valid`` the matching
    boolean mask; each row needs at least two unmasked steps so that at
    least one prediction has a target.
    """
    config = params.config
    encoded = np.asarray(encoded, dtype=np.int64)
    valid = np.asarray(valid, dtype=bool)
    if encoded.ndim != 2 or valid.shape != encoded.shape:
        raise ValueError(
            f"forward_batch: encoded {encoded.shape} and valid {valid.shape} "
            "must be matching 2-d arrays")
    if np.any(valid.sum(axis=1) < 2):
        raise ValueError("forward_batch: every sequence needs at least two unmasked steps")
    batch, t_steps = encoded.shape
    d = config.hidden_dim

    h = Tensor(np.zeros((batch, d)))
    states = []
    for t in range(t_steps):
        e_t = take_rows(params.embedding, encoded[:, t])
        h = gru_step(h, e_t, params)
        states.append(h)
    hidden = stack(states, axis=1)  # (B, T, d)

    mask3 = causal_mask(valid)
    # pad rows past the valid prefix attend over the full prefix; their
    # outputs are never read by a loss term
    empty_rows = mask3.sum(axis=-1) == 0
    if empty_rows.any():
        mask3 = mask3 | (empty_rows[..., None] & valid[..., None, :])

    student = Tensor(_prefix_mean_matrix(valid, config.whole_sequence_mean)) @ hidden

    next_embedded = None
    if config.include_next_skill:
        # skill of the upcoming interaction, stripped of its response offset
        nxt = np.full_like(encoded, config.padding_index)
        upcoming = np.where(encoded[:, 1:] == config.padding_index,
                            config.padding_index,
                            encoded[:, 1:] % config.num_skills)
        nxt[:, :-1] = upcoming
        next_embedded = take_rows(params.embedding, nxt)

    capsules, attention, block_probs, recon_parts = [], [], [], []
    for j in range(config.n_blocks):
        alpha, caps = capsule_attention(hidden, params.attention[j], mask3)
        head_in = caps if next_embedded is None else concat([caps, next_embedded])
        logits = (head_in @ params.head_w[j].T).reshape((batch, t_steps)) + params.head_b[j]
        p_j = logits.sigmoid()
        capsules.append(caps)
        attention.append(alpha)
        block_probs.append(p_j)
        recon_parts.append(p_j.repeat_last(d) * caps)

    preds = stack(block_probs, axis=0).mean(axis=0)
    recon = stack(recon_parts, axis=0).max(axis=0)
    sims = (student * recon).sum(axis=-1).sigmoid()
    return ForwardTrace(hidden=hidden, student=student, capsules=capsules,
                        attention=attention, block_probs=block_probs,
                        preds=preds, recon=recon, sims=sims)


def forward_sequence(seq: InteractionSequence, params: PKTParams) -> ForwardTrace:
    """Forward one sequence (batch of one)."""
    if seq.valid_length < 2:
        raise ValueError(
            f"forward_sequence: sequence {seq.user_id} has fewer than two unmasked "
            "steps; no prediction target exists")
    encoded = encode_sequence(seq, params.config.num_skills)[None, :]
    valid = np.asarray(seq.mask, dtype=bool)[None, :]
    return forward_batch(params, encoded, valid)
