"""Full recommender: per-interval graph encoder, long-term branches, gated fusion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fusion
from . import tensor as tt
from .corpus import IntervalGraphs
from .encoder import ShortTermConfig, encode_interval, normalize_adjacency
from .temporal import (
    TemporalConfig,
    build_instant_sequences,
    gru_sequence,
    init_attention,
    init_gru,
    instant_attention,
    interval_attention,
    mean_pool,
)
from .tensor import Tensor


@dataclass
class ModelConfig:
    short: ShortTermConfig = field(default_factory=ShortTermConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    init_std: float = 0.1
    fixed_gate_value: float | None = None
    disable_mean_branch: bool = False
    disable_gru_branch: bool = False
    detach_gate: bool = False

    def __post_init__(self):
        if self.short.d % self.temporal.n_heads:
            raise ValueError(f"d={self.short.d} is not divisible by n_heads={self.temporal.n_heads}")
        if self.disable_mean_branch and self.disable_gru_branch:
            raise ValueError("cannot disable both prediction branches")
        if self.fixed_gate_value is not None and not 0.0 <= self.fixed_gate_value <= 1.0:
            raise ValueError("fixed_gate_value must lie in [0, 1]")

    @property
    def d(self) -> int:
        return self.short.d


@dataclass
class ModelInputs:
    """Constant per-run inputs derived from the T input intervals."""
    num_users: int
    num_items: int
    adj: list[sp.csr_matrix]
    adj_t: list[sp.csr_matrix]
    instant_seq: np.ndarray

    @property
    def T(self) -> int:
        return len(self.adj)

    @classmethod
    def from_graphs(cls, graphs: IntervalGraphs, max_seq: int) -> "ModelInputs":
        adj = [normalize_adjacency(g) for g in graphs.user_item]
        return cls(graphs.num_users, graphs.num_items, adj, [a.T.tocsr() for a in adj],
                   build_instant_sequences(graphs.sequences, graphs.num_users, max_seq))


@dataclass
class Forward:
    U: Tensor
    V: Tensor
    e_bar_u: Tensor
    e_bar_v: Tensor
    e_tilde_u: Tensor
    w: Tensor


class Recommender:
    def __init__(self, num_users: int, num_items: int, T: int, cfg: ModelConfig, seed: int = 0):
        self.num_users, self.num_items, self.T, self.cfg = num_users, num_items, T, cfg
        rng = np.random.default_rng(seed)
        d, L = cfg.d, cfg.short.layers
        p: dict[str, Tensor] = {}
        for t in range(T):
            p[f"emb_user.{t}"] = tt.normal(rng, (num_users, d), cfg.init_std)
            p[f"emb_item.{t}"] = tt.normal(rng, (num_items, d), cfg.init_std)
        p.update(init_gru(rng, L * d, d, "gru_user"))
        p.update(init_gru(rng, L * d, d, "gru_item"))
        p.update(init_attention(rng, d, "intv_user"))
        p.update(init_attention(rng, d, "intv_item"))
        for layer in range(cfg.temporal.attn_layers):
            p.update(init_attention(rng, d, f"inst.{layer}"))
        p["positions"] = tt.normal(rng, (cfg.temporal.max_seq, d), cfg.init_std)
        p["mean_proj"] = tt.glorot(rng, L * d, d)
        p.update(fusion.init_gate(rng, d))
        for k, v in p.items():
            v.name = k
        self.params = p

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def _attn(self, prefix: str) -> dict:
        return {k[len(prefix) + 1:]: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    def forward(self, inputs: ModelInputs, training: bool = False,
                rng: np.random.Generator | None = None) -> Forward:
        if inputs.T != self.T:
            raise ValueError(f"model built for T={self.T} intervals, inputs have {inputs.T}")
        cfg, p = self.cfg, self.params
        e_u, e_v = [], []
        for t in range(self.T):
            eu, ev = encode_interval(inputs.adj[t], p[f"emb_user.{t}"], p[f"emb_item.{t}"], cfg.short,
                                     training=training, rng=rng, adj_t=inputs.adj_t[t])
            e_u.append(eu)
            e_v.append(ev)
        heads = cfg.temporal.n_heads
        h_u = gru_sequence(e_u, p, "gru_user")
        h_v = gru_sequence(e_v, p, "gru_item")
        e_bar_u = interval_attention(h_u, p, heads, "intv_user")
        e_bar_v = interval_attention(h_v, p, heads, "intv_item")
        layers = [self._attn(f"inst.{i}") for i in range(cfg.temporal.attn_layers)]
        e_tilde_u = instant_attention(inputs.instant_seq, e_bar_v, p["positions"], layers, heads)
        U = mean_pool(e_u, p["mean_proj"])
        V = mean_pool(e_v, p["mean_proj"])
        if cfg.disable_mean_branch:
            w = Tensor(np.ones((self.num_users, 1)))
        elif cfg.disable_gru_branch:
            w = Tensor(np.zeros((self.num_users, 1)))
        elif cfg.fixed_gate_value is not None:
            w = Tensor(np.full((self.num_users, 1), cfg.fixed_gate_value))
        else:
            w = fusion.gate(U, e_bar_u, p)
        return Forward(U, V, e_bar_u, e_bar_v, e_tilde_u, w)

    def loss(self, fwd: Forward, users, pos, neg, loss_cfg: fusion.LossConfig):
        """Total objective for aligned (user, positive, negative) index arrays.

        Returns ``(total, l_gru, l_mean, w_batch)``.
        """
        users, pos, neg = (np.asarray(a, dtype=np.int64) for a in (users, pos, neg))
        U_b = tt.embedding_lookup(fwd.U, users)
        eb_b = tt.embedding_lookup(fwd.e_bar_u, users)
        et_b = tt.embedding_lookup(fwd.e_tilde_u, users)
        w_b = tt.embedding_lookup(fwd.w, users) if fwd.w.requires_grad else Tensor(fwd.w.data[users])
        m_p, g_p, _ = fusion.predict(U_b, tt.embedding_lookup(fwd.V, pos), eb_b, et_b,
                                     tt.embedding_lookup(fwd.e_bar_v, pos), w_b)
        m_n, g_n, _ = fusion.predict(U_b, tt.embedding_lookup(fwd.V, neg), eb_b, et_b,
                                     tt.embedding_lookup(fwd.e_bar_v, neg), w_b)
        cfg = self.cfg
        if cfg.disable_mean_branch or cfg.disable_gru_branch:
            # one branch left: plain hinge on its gap at full weight
            one = Tensor(1.0)
            if cfg.disable_mean_branch:
                l_gru, l_mean = fusion.hinge(one, g_p, g_n), Tensor(0.0)
            else:
                l_gru, l_mean = Tensor(0.0), fusion.hinge(one, m_p, m_n)
            total = fusion.total_loss(l_gru + l_mean, Tensor(0.0), self.parameters(),
                                      fusion.LossConfig(1.0, loss_cfg.lambda2, loss_cfg.n_pr))
        else:
            coef = Tensor(w_b.data) if cfg.detach_gate else w_b
            l_gru, l_mean = fusion.rec_loss(coef, g_p, g_n, m_p, m_n)
            total = fusion.total_loss(l_gru, l_mean, self.parameters(), loss_cfg)
        return total, l_gru, l_mean, w_b

    def scores(self, fwd: Forward) -> dict[str, np.ndarray]:
        """Dense (I, J) mean / recurrent / fused score matrices."""
        mean = fwd.U.data @ fwd.V.data.T
        gru = (fwd.e_bar_u.data + fwd.e_tilde_u.data) @ fwd.e_bar_v.data.T
        w = fwd.w.data
        return {"mean": mean, "gru": gru, "final": w * gru + (1.0 - w) * mean}
