"""Adaptive gate between the recurrent and mean branches, predictions, and losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .tensor import Tensor, glorot, zeros


@dataclass
class LossConfig:
    lambda1: float = 0.1
    lambda2: float = 1e-2
    n_pr: int = 4

    def __post_init__(self):
        if not 0.0 <= self.lambda1 <= 1.0:
            raise ValueError(f"lambda1 must lie in [0, 1], got {self.lambda1}")
        if self.lambda2 < 0:
            raise ValueError(f"lambda2 must be >= 0, got {self.lambda2}")
        if self.n_pr < 1:
            raise ValueError("n_pr must be >= 1")


def init_gate(rng: np.random.Generator, d: int) -> dict[str, Tensor]:
    p = {"gate.W1": glorot(rng, 2 * d, d), "gate.b1": zeros((1, d)),
         "gate.W2": glorot(rng, d, 1), "gate.b2": zeros((1, 1))}
    for k, v in p.items():
        v.name = k
    return p


def gate(U: Tensor, e_bar: Tensor, params: dict) -> Tensor:
    """w = sigmoid(MLP([U || e_bar])), shape (N, 1), strictly inside (0, 1)."""
    h = tt.leaky_relu(tt.concat([U, e_bar], axis=1) @ params["gate.W1"] + params["gate.b1"])
    return tt.sigmoid(h @ params["gate.W2"] + params["gate.b2"])


def rowdot(a: Tensor, b: Tensor) -> Tensor:
    return tt.sum(a * b, axis=1, keepdims=True)


def predict(U_i: Tensor, V_j: Tensor, e_bar_i: Tensor, e_tilde_i: Tensor, e_bar_j: Tensor,
            w: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Row-aligned (mean, recurrent, fused) scores, each (N, 1)."""
    a_mean = rowdot(U_i, V_j)
    a_gru = rowdot(e_bar_i + e_tilde_i, e_bar_j)
    a_final = w * a_gru + (1.0 - w) * a_mean
    return a_mean, a_gru, a_final


def hinge(coef: Tensor, pos: Tensor, neg: Tensor) -> Tensor:
    """sum max(0, 1 - coef * (pos - neg))."""
    return tt.sum(tt.relu(1.0 - coef * (pos - neg)))


def rec_loss(w: Tensor, gru_pos: Tensor, gru_neg: Tensor, mean_pos: Tensor,
             mean_neg: Tensor) -> tuple[Tensor, Tensor]:
    """Gated pairwise hinge losses: the recurrent gap is scaled by 1-w, the mean gap by w."""
    return hinge(1.0 - w, gru_pos, gru_neg), hinge(w, mean_pos, mean_neg)


def total_loss(l_gru: Tensor, l_mean: Tensor, params, cfg: LossConfig) -> Tensor:
    loss = l_gru * cfg.lambda1 + l_mean * (1.0 - cfg.lambda1)
    if cfg.lambda2:
        loss = loss + tt.frobenius_sq(list(params)) * cfg.lambda2
    return loss
