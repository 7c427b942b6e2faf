"""Top-N ranking protocol: HR@N and NDCG@N against one held-out item per user."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOPN = (5, 10, 20)


@dataclass
class RankingTask:
    users: np.ndarray
    truth: np.ndarray
    candidates: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.users)


@dataclass
class MetricsReport:
    hr: dict[int, float] = field(default_factory=dict)
    ndcg: dict[int, float] = field(default_factory=dict)
    n_users: int = 0

    def to_dict(self) -> dict:
        out: dict = {}
        for n in sorted(self.hr):
            out[f"HR@{n}"] = self.hr[n]
            out[f"NDCG@{n}"] = self.ndcg[n]
        out["users"] = self.n_users
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self, name: str = "model") -> str:
        rows = []
        for n in sorted(self.hr):
            rows.append((f"HR@{n}", self.hr[n]))
            rows.append((f"NDCG@{n}", self.ndcg[n]))
        width = max(len(name), 7)
        lines = [f"{'Metric':<8} {name:>{width}}"]
        lines += [f"{k:<8} {v:>{width}.4f}" for k, v in rows]
        return "\n".join(lines)


def rank_of(scores: np.ndarray, items: np.ndarray, truth: int) -> int:
    """1-based rank of ``truth``; higher score first, ties to the lower item id."""
    if len(items) == 0:
        raise ValueError("empty candidate set")
    pos = np.flatnonzero(items == truth)
    if pos.size == 0:
        raise ValueError(f"ground-truth item {truth} is not a candidate")
    s = scores[pos[0]]
    return 1 + int(np.count_nonzero(scores > s) + np.count_nonzero((scores == s) & (items < truth)))


def rank_and_score(scores: np.ndarray, items: np.ndarray, truth: int,
                   topn=DEFAULT_TOPN) -> dict[int, tuple[float, float]]:
    """Per-N ``(hit, ndcg)`` for one user; with a single relevant item IDCG = 1."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("candidate scores must be finite")
    r = rank_of(scores, np.asarray(items), truth)
    return {n: (1.0, 1.0 / math.log2(r + 1)) if r <= n else (0.0, 0.0) for n in topn}


def aggregate(per_user: list[dict[int, tuple[float, float]]]) -> MetricsReport:
    if not per_user:
        raise ValueError("no evaluated users")
    ns = sorted(per_user[0])
    k = len(per_user)
    return MetricsReport(
        hr={n: sum(r[n][0] for r in per_user) / k for n in ns},
        ndcg={n: sum(r[n][1] for r in per_user) / k for n in ns},
        n_users=k,
    )


def build_ranking_task(train_items: dict[int, set[int]], target: dict[int, list[tuple[int, int]]],
                       num_items: int, sampled_negatives: int | None = None,
                       seed: int = 0) -> RankingTask:
    """One ground truth per user: their first target-interval item not seen in training.

    Candidates are the catalogue minus the user's training items, or the truth
    plus ``sampled_negatives`` items drawn from that pool.
    """
    rng = np.random.default_rng(seed)
    users, truths, cands = [], [], []
    catalogue = np.arange(num_items)
    for u in sorted(target):
        seen = train_items.get(u, set())
        truth = next((i for i, _ in target[u] if i not in seen), None)
        if truth is None:
            continue
        mask = np.ones(num_items, dtype=bool)
        if seen:
            mask[list(seen)] = False
        pool = catalogue[mask]
        if sampled_negatives is not None:
            negs = pool[pool != truth]
            k = min(sampled_negatives, len(negs))
            pool = np.sort(np.concatenate([[truth], rng.choice(negs, size=k, replace=False)]))
        users.append(u)
        truths.append(truth)
        cands.append(pool)
    return RankingTask(np.array(users, dtype=np.int64), np.array(truths, dtype=np.int64), cands)


def evaluate_scores(scores: np.ndarray, task: RankingTask, topn=DEFAULT_TOPN) -> MetricsReport:
    """Score an (I, J) prediction matrix against ``task``."""
    results = [rank_and_score(scores[u, c], c, t, topn)
               for u, t, c in zip(task.users, task.truth, task.candidates)]
    return aggregate(results)
