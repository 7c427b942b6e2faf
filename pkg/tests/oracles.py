"""Slow, independent reference implementations used only by the tests.

Nothing here imports from the package under test.
"""
from __future__ import annotations

import math

import numpy as np


def set_partitions(items):
    """Every partition of ``items`` (restricted-growth enumeration)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


def dense_modularity(W: np.ndarray, labels) -> float:
    """Q = 1/2m * sum_ij [W_ij - k_i k_j / 2m] delta(c_i, c_j) on a symmetric matrix."""
    W = np.asarray(W, dtype=float)
    k = W.sum(axis=1)
    two_m = W.sum()
    q = 0.0
    n = len(W)
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += W[i, j] - k[i] * k[j] / two_m
    return q / two_m


def best_partition(W: np.ndarray):
    """Exhaustive maximum-modularity partition; ties go to the first enumerated."""
    n = len(W)
    best, best_q = None, -math.inf
    count = 0
    for part in set_partitions(range(n)):
        count += 1
        labels = [0] * n
        for c, block in enumerate(part):
            for i in block:
                labels[i] = c
        q = dense_modularity(W, labels)
        if q > best_q + 1e-15:
            best, best_q = part, q
    return sorted(sorted(b) for b in best), best_q, count


def dense_similarity(Z: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Direct double loop over the item pairs; zero numerators and the diagonal stay 0."""
    J = len(Z)
    Zi = Z + np.eye(J)
    out = np.zeros((J, J))
    for i in range(J):
        for j in range(J):
            if i == j:
                continue
            num = sum(Zi[i, k] * Zi[j, k] for k in range(J))
            if num == 0:
                continue
            den = sum(Z[i, k] * Z[j, k] for k in range(J))
            out[i, j] = num / (den + eps)
    return out


def brute_force_metrics(scores, items, truth, topn):
    """Sort the full candidate list explicitly and read off the truth's position."""
    ranked = sorted(zip(items, scores), key=lambda p: (-p[1], p[0]))
    position = [i for i, _ in ranked].index(truth) + 1
    out = {}
    for n in topn:
        top = [i for i, _ in ranked[:n]]
        hit = 1.0 if truth in top else 0.0
        dcg = sum(1.0 / math.log2(k + 2) for k, i in enumerate(top) if i == truth)
        idcg = 1.0  # single relevant item at rank 1
        out[n] = (hit, dcg / idcg)
    return out, position


def gru_step_reference(x, h, p):
    """Textbook GRU cell written with plain numpy, gate order z, r, candidate."""
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))  # noqa: E731
    z = sig(x @ p["W_z"] + h @ p["U_z"] + p["b_z"])
    r = sig(x @ p["W_r"] + h @ p["U_r"] + p["b_r"])
    cand = np.tanh(x @ p["W_h"] + (r * h) @ p["U_h"] + p["b_h"])
    return (1 - z) * h + z * cand
