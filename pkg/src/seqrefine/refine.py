"""Similarity-driven cleanup of the per-interval user-item graphs.

For every interval the item co-occurrence graph yields an item similarity
matrix; within each user's interval items, Louvain singletons are treated as
noise and down-weighted, and highly similar unseen items are added as
augmented interactions.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .corpus import IntervalGraphs, ItemItemGraph
from .louvain import adjacency_from_edges, louvain

EPS = 1e-8


@dataclass
class RefineConfig:
    beta: float = 0.5
    min_sim: float = 0.7
    max_aug_per_user: int = 10
    min_items_for_detection: int = 3
    top_k: int | None = 50  # None keeps the exact similarity matrix

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.min_sim > 0.0:
            raise ValueError(f"min_sim must be positive, got {self.min_sim}")
        if self.max_aug_per_user < 0:
            raise ValueError("max_aug_per_user must be >= 0")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1 or None")


class SimilarityMatrix:
    """Off-diagonal item similarities for one interval, held as CSR."""

    def __init__(self, matrix: sp.csr_matrix, t: int = 0):
        self.matrix = matrix.tocsr()
        self.t = t

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def get(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def neighbors(self, i: int) -> dict[int, float]:
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return dict(zip(self.matrix.indices[lo:hi].tolist(), self.matrix.data[lo:hi].tolist()))

    def max(self) -> float:
        return float(self.matrix.data.max()) if self.matrix.nnz else 0.0

    @classmethod
    def from_dict(cls, J: int, entries: dict[tuple[int, int], float], t: int = 0) -> "SimilarityMatrix":
        if not entries:
            return cls(sp.csr_matrix((J, J)), t)
        (r, c), v = zip(*entries.keys()), list(entries.values())
        return cls(sp.csr_matrix((v, (r, c)), shape=(J, J)), t)


def item_similarity(Z: ItemItemGraph | sp.spmatrix, top_k: int | None = None, t: int = 0) -> SimilarityMatrix:
    """sim[i, j] = row_i(Z+I).row_j(Z+I) / (row_i(Z).row_j(Z) + eps), off-diagonal only.

    Pairs with a zero numerator (no path of length <= 2) are omitted. With
    ``top_k`` each row keeps only its ``top_k`` largest entries (ties to the
    lower item id).
    """
    if isinstance(Z, ItemItemGraph):
        t = Z.t
        Z = Z.to_csr()
    Z = sp.csr_matrix(Z, dtype=np.float64)
    J = Z.shape[0]
    Zi = (Z + sp.identity(J, format="csr")).tocsr()
    num = (Zi @ Zi.T).tocoo()
    off = (num.row != num.col) & (num.data != 0)
    rows, cols, nv = num.row[off], num.col[off], num.data[off]
    if rows.size == 0:
        return SimilarityMatrix(sp.csr_matrix((J, J)), t)
    den = (Z @ Z.T).tocsr()
    dv = np.asarray(den[rows, cols]).ravel()
    vals = nv / (dv + EPS)
    if top_k is not None:
        order = np.lexsort((cols, -vals, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        starts = np.searchsorted(rows, rows, side="left")
        keep = (np.arange(rows.size) - starts) < top_k
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    return SimilarityMatrix(sp.csr_matrix((vals, (rows, cols)), shape=(J, J)), t)


def _user_subgraph(items: list[int], sim: SimilarityMatrix) -> dict:
    """Undirected induced subgraph; a pair's weight is the larger of its two directions."""
    chosen = set(items)
    edges: dict[tuple[int, int], float] = {}
    for i in items:
        for j, w in sim.neighbors(i).items():
            if j in chosen and j != i:
                key = (min(i, j), max(i, j))
                edges[key] = max(edges.get(key, 0.0), w)
    return adjacency_from_edges(items, edges)


def find_noise(items: list[int], sim: SimilarityMatrix, min_items: int = 3) -> set[int]:
    """Items that land in singleton communities of the induced similarity subgraph."""
    if len(items) < max(min_items, 1):
        return set()
    part = louvain(_user_subgraph(sorted(items), sim))
    sizes: dict[int, int] = {}
    for c in part.community_of.values():
        sizes[c] = sizes.get(c, 0) + 1
    return {i for i, c in part.community_of.items() if sizes[c] == 1}


def detect_noise(user: int, t: int, sim: SimilarityMatrix, graphs: IntervalGraphs,
                 cfg: RefineConfig) -> set[int]:
    """Flag the user's noisy interval-``t`` items and scale their A_t weights by beta."""
    row = graphs.user_item[t].items_of(user)
    noise = find_noise(sorted(row), sim, cfg.min_items_for_detection)
    g = graphs.user_item[t]
    for i in sorted(noise):
        w = g.get(user, i) * cfg.beta
        if w > 0.0:
            g.set(user, i, w)
        else:
            g.remove(user, i)
    return noise


def _candidates(sources, exclude, sim: SimilarityMatrix, cfg: RefineConfig) -> list[tuple[int, float]]:
    best: dict[int, float] = {}
    for i in sources:
        for j, s in sim.neighbors(i).items():
            if j in exclude or s < cfg.min_sim:
                continue
            if s > best.get(j, 0.0):
                best[j] = s
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[: cfg.max_aug_per_user]
    return [(j, min(1.0, s)) for j, s in ranked]


def augment_inactive(user: int, t: int, sim_t: SimilarityMatrix, graphs: IntervalGraphs,
                     cfg: RefineConfig) -> list[tuple[int, float]]:
    """Fill an interval the user skipped with items similar to what they touched at t-1."""
    if t == 0 or graphs.sequences[t].get(user) or not graphs.sequences[t - 1].get(user):
        return []
    previous = sorted({i for i, _ in graphs.sequences[t - 1][user]})
    g = graphs.user_item[t]
    added = _candidates(previous, set(g.items_of(user)), sim_t, cfg)
    for j, w in added:
        g.set(user, j, w)
    return added


def augment_active(user: int, t: int, sim_t: SimilarityMatrix, graphs: IntervalGraphs,
                   cfg: RefineConfig) -> list[tuple[int, float]]:
    g = graphs.user_item[t]
    current = set(g.items_of(user))
    if not current:
        return []
    added = _candidates(sorted(current), current, sim_t, cfg)
    for j, w in added:
        g.set(user, j, w)
    return added


@dataclass
class RefinementReport:
    initial: list[int] = field(default_factory=list)
    noisy: list[int] = field(default_factory=list)
    augmented: list[int] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def initial_count(self) -> int:
        return sum(self.initial)

    @property
    def noisy_count(self) -> int:
        return sum(self.noisy)

    @property
    def augmented_count(self) -> int:
        return sum(self.augmented)

    def to_dict(self) -> dict:
        return {
            "initial_interactions": self.initial_count,
            "noisy_interactions": self.noisy_count,
            "augmented_interactions": self.augmented_count,
            "execution_time_s": self.wall_time,
            "per_interval": [
                {"t": t, "initial": a, "noisy": b, "augmented": c}
                for t, (a, b, c) in enumerate(zip(self.initial, self.noisy, self.augmented))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def refine_all(graphs: IntervalGraphs, cfg: RefineConfig,
               intervals: range | None = None) -> tuple[IntervalGraphs, RefinementReport]:
    """Denoise then augment every interval in ``intervals`` (default: all) on a copy."""
    start = time.perf_counter()
    out = graphs.copy()
    intervals = range(graphs.T) if intervals is None else intervals
    report = RefinementReport()
    for t in range(graphs.T):
        g = out.user_item[t]
        report.initial.append(g.nnz)
        if t not in intervals:
            report.noisy.append(0)
            report.augmented.append(0)
            continue
        sim = item_similarity(out.item_item[t], cfg.top_k)
        noisy = 0
        for u in sorted(g.rows):
            noisy += len(detect_noise(u, t, sim, out, cfg))
        augmented = 0
        for u in range(graphs.num_users):
            if out.sequences[t].get(u):
                augmented += len(augment_active(u, t, sim, out, cfg))
            else:
                augmented += len(augment_inactive(u, t, sim, out, cfg))
        report.noisy.append(noisy)
        report.augmented.append(augmented)
    report.wall_time = time.perf_counter() - start
    return out, report
