"""Short-term embeddings: residual graph convolution over one interval's bipartite graph."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as tt
from .corpus import UserItemGraph
from .tensor import Tensor


@dataclass
class ShortTermConfig:
    d: int = 64
    layers: int = 2
    edge_dropout: float = 0.0
    message_dropout: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"embedding dim must be >= 1, got {self.d}")
        if self.layers not in (1, 2, 3):
            raise ValueError(f"GCN layers must be 1, 2 or 3, got {self.layers}")
        for name in ("edge_dropout", "message_dropout"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {p}")


def normalize_adjacency(A: UserItemGraph | sp.spmatrix) -> sp.csr_matrix:
    """D_u^-1/2 A D_v^-1/2 with weighted degrees; empty rows/columns stay zero."""
    M = A.to_csr() if isinstance(A, UserItemGraph) else sp.csr_matrix(A, dtype=np.float64)
    du = np.asarray(M.sum(axis=1)).ravel()
    dv = np.asarray(M.sum(axis=0)).ravel()
    inv_u = np.zeros_like(du)
    inv_v = np.zeros_like(dv)
    inv_u[du > 0] = du[du > 0] ** -0.5
    inv_v[dv > 0] = dv[dv > 0] ** -0.5
    return (sp.diags(inv_u) @ M @ sp.diags(inv_v)).tocsr()


def _drop_edges(adj: sp.csr_matrix, p: float, rng: np.random.Generator) -> sp.csr_matrix:
    out = adj.copy()
    keep = rng.random(out.nnz) >= p
    out.data = out.data * keep / (1.0 - p)
    out.eliminate_zeros()
    return out


def encode_interval(adj: sp.csr_matrix, E_u: Tensor, E_v: Tensor, cfg: ShortTermConfig,
                    training: bool = False, rng: np.random.Generator | None = None,
                    adj_t: sp.csr_matrix | None = None, return_layers: bool = False):
    """Return the (I, L*d) user and (J, L*d) item short-term embeddings.

    Layer l: users aggregate item messages through ``adj`` and items aggregate
    user messages through its transpose, each passed through LeakyReLU and
    added to the previous layer.
    """
    I, J = adj.shape
    if E_u.shape != (I, cfg.d) or E_v.shape != (J, cfg.d):
        raise tt.ShapeError(
            f"embedding tables {E_u.shape} and {E_v.shape} do not match graph {adj.shape} with d={cfg.d}"
        )
    if training and cfg.edge_dropout > 0:
        adj = _drop_edges(adj, cfg.edge_dropout, rng)
        adj_t = None
    if adj_t is None:
        adj_t = adj.T.tocsr()
    u_layers, v_layers = [E_u], [E_v]
    for _ in range(cfg.layers):
        prev_u, prev_v = u_layers[-1], v_layers[-1]
        z_u = tt.leaky_relu(tt.sparse_dense_matmul(adj, prev_v, adj_t))
        z_v = tt.leaky_relu(tt.sparse_dense_matmul(adj_t, prev_u, adj))
        z_u = tt.dropout(z_u, cfg.message_dropout, rng, training)
        z_v = tt.dropout(z_v, cfg.message_dropout, rng, training)
        u_layers.append(z_u + prev_u)
        v_layers.append(z_v + prev_v)
    e_u = tt.concat(u_layers[1:], axis=1)
    e_v = tt.concat(v_layers[1:], axis=1)
    if return_layers:
        return e_u, e_v, u_layers, v_layers
    return e_u, e_v
