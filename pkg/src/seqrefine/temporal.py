"""Long-term embeddings: GRU + attention across intervals, positional attention over
recent items, and a projected mean over intervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .tensor import Tensor, glorot, zeros

MASK_FILL = -1e9


@dataclass
class TemporalConfig:
    n_heads: int = 2
    attn_layers: int = 2
    max_seq: int = 30

    def __post_init__(self):
        if self.n_heads < 1:
            raise ValueError("n_heads must be >= 1")
        if self.attn_layers < 1:
            raise ValueError("attn_layers must be >= 1")
        if self.max_seq < 1:
            raise ValueError("max_seq must be >= 1")


def init_gru(rng: np.random.Generator, in_dim: int, d: int, prefix: str) -> dict[str, Tensor]:
    p = {f"{prefix}.proj": glorot(rng, in_dim, d)}
    for gate in ("z", "r", "h"):
        p[f"{prefix}.W_{gate}"] = glorot(rng, d, d)
        p[f"{prefix}.U_{gate}"] = glorot(rng, d, d)
        p[f"{prefix}.b_{gate}"] = zeros((1, d))
    for k, v in p.items():
        v.name = k
    return p


def init_attention(rng: np.random.Generator, d: int, prefix: str) -> dict[str, Tensor]:
    p = {f"{prefix}.{k}": glorot(rng, d, d) for k in ("Wq", "Wk", "Wv", "Wo")}
    for k, v in p.items():
        v.name = k
    return p


def _sub(params: dict, prefix: str) -> dict:
    return {k[len(prefix) + 1:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def gru_step(x: Tensor, h: Tensor, p: dict) -> Tensor:
    z = tt.sigmoid(x @ p["W_z"] + h @ p["U_z"] + p["b_z"])
    r = tt.sigmoid(x @ p["W_r"] + h @ p["U_r"] + p["b_r"])
    cand = tt.tanh(x @ p["W_h"] + (r * h) @ p["U_h"] + p["b_h"])
    return (1.0 - z) * h + z * cand


def gru_sequence(inputs: list[Tensor], params: dict, prefix: str = "") -> list[Tensor]:
    """Hidden states h_1..h_T of a GRU run row-wise over ``inputs`` with h_0 = 0.

    Each input (N, L*d) is first projected to the hidden size d.
    """
    p = _sub(params, prefix) if prefix else params
    d = p["W_z"].shape[0]
    h = Tensor(np.zeros((inputs[0].shape[0], d)))
    states = []
    for x in inputs:
        h = gru_step(x @ p["proj"], h, p)
        states.append(h)
    return states


def multihead_attention(x: Tensor, params: dict, n_heads: int, key_mask: np.ndarray | None = None,
                        return_weights: bool = False):
    """Scaled dot-product self-attention over axis 1 of ``x`` (N, S, d).

    ``key_mask`` (N, S) marks real positions; masked keys get zero weight.
    """
    N, S, d = x.shape
    if d % n_heads:
        raise tt.ShapeError(f"model dim {d} is not divisible by {n_heads} heads")
    dh = d // n_heads

    def heads(t: Tensor) -> Tensor:
        return tt.transpose(tt.reshape(t, (N, S, n_heads, dh)), (0, 2, 1, 3))

    q, k, v = heads(x @ params["Wq"]), heads(x @ params["Wk"]), heads(x @ params["Wv"])
    scores = (q @ tt.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
    if key_mask is not None:
        fill = np.where(key_mask, 0.0, MASK_FILL)[:, None, None, :]
        scores = scores + Tensor(fill)
    attn = tt.softmax(scores, axis=-1)
    out = tt.reshape(tt.transpose(attn @ v, (0, 2, 1, 3)), (N, S, d)) @ params["Wo"]
    if return_weights:
        return out, attn
    return out


def stack_time(states: list[Tensor]) -> Tensor:
    """list of T tensors (N, d) -> (N, T, d)."""
    N, d = states[0].shape
    return tt.concat([tt.reshape(h, (N, 1, d)) for h in states], axis=1)


def interval_attention(states: list[Tensor], params: dict, n_heads: int, prefix: str = "") -> Tensor:
    """Self-attend across the T hidden states, then sum over time -> (N, d)."""
    p = _sub(params, prefix) if prefix else params
    return tt.sum(multihead_attention(stack_time(states), p, n_heads), axis=1)


def build_instant_sequences(sequences_per_interval: list[dict], num_users: int, M: int) -> np.ndarray:
    """(I, M) item ids of each user's last M events, oldest first, left-padded with -1."""
    out = np.full((num_users, M), -1, dtype=np.int64)
    for u in range(num_users):
        events = []
        for seqs in sequences_per_interval:
            events.extend(seqs.get(u, ()))
        events.sort(key=lambda e: e[1])  # stable: ties keep interval/file order
        recent = [item for item, _ in events[-M:]]
        if recent:
            out[u, M - len(recent):] = recent
    return out


def instant_attention(seq: np.ndarray, item_emb: Tensor, positions: Tensor, layer_params: list[dict],
                      n_heads: int) -> Tensor:
    """Sum over real positions of a residual LeakyReLU self-attention stack.

    ``seq`` is (N, S) with -1 for padding; ``positions`` is (S, d). Rows with
    no history come out as zero vectors.
    """
    N, S = seq.shape
    if positions.shape[0] != S:
        raise tt.ShapeError(f"positions {positions.shape} do not match sequence length {S}")
    mask = seq >= 0
    tokens = tt.embedding_lookup(item_emb, np.where(mask, seq, 0).reshape(-1))
    x = tt.reshape(tokens, (N, S, item_emb.shape[1])) + positions
    for p in layer_params:
        x = tt.leaky_relu(multihead_attention(x, p, n_heads, key_mask=mask)) + x
    return tt.sum(x * Tensor(mask[:, :, None].astype(np.float64)), axis=1)


def mean_pool(short_terms: list[Tensor], proj: Tensor | None = None) -> Tensor:
    """Arithmetic mean over intervals, optionally projected L*d -> d."""
    total = short_terms[0]
    for e in short_terms[1:]:
        total = total + e
    m = total * (1.0 / len(short_terms))
    return m if proj is None else m @ proj
