"""Seeded synthetic interaction logs with planted communities, drift and noise."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import InteractionLog, IntervalGraphs, build_graphs


@dataclass
class SyntheticSpec:
    n_users: int = 20
    n_items: int = 30
    n_communities: int = 3
    noise_rate: float = 0.0
    drift: float = 0.0  # per-interval probability that a user switches community
    n_intervals: int = 5  # total, including the held-out last interval
    events_per_interval: int = 3
    span: int = 1000  # seconds per interval
    t0: int = 1_600_000_000
    seed: int = 0

    def __post_init__(self):
        for name in ("noise_rate", "drift"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_communities < 1 or self.n_items < self.n_communities:
            raise ValueError("need at least one item per community")
        if self.noise_rate > 0 and self.n_communities < 2:
            raise ValueError("cross-community noise needs at least two communities")


@dataclass
class SyntheticData:
    log: InteractionLog
    item_community: np.ndarray
    user_community: np.ndarray  # (n_users, n_intervals)
    noise: set = field(default_factory=set)  # (user, item, timestamp) of planted noise events


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Users draw items from their current community; noise events come from another one.

    Interval k spans ``[t0 + k*span, t0 + (k+1)*span)``; two anchor events pin the
    log's first and last timestamps to the interval grid so time slicing with
    ``n_intervals`` reproduces it exactly.
    """
    rng = np.random.default_rng(spec.seed)
    C = spec.n_communities
    item_comm = np.arange(spec.n_items) % C
    members = [np.flatnonzero(item_comm == c) for c in range(C)]
    user_comm = np.empty((spec.n_users, spec.n_intervals), dtype=np.int64)
    events, noise = [], set()
    for u in range(spec.n_users):
        c = u % C
        for k in range(spec.n_intervals):
            if k and rng.random() < spec.drift:
                c = int(rng.choice([x for x in range(C) if x != c]))
            user_comm[u, k] = c
            base = spec.t0 + k * spec.span
            stamps = np.sort(rng.choice(np.arange(1, spec.span), size=spec.events_per_interval, replace=False))
            for ts in stamps:
                if rng.random() < spec.noise_rate:
                    other = int(rng.choice([x for x in range(C) if x != c]))
                    item = int(rng.choice(members[other]))
                    noise.add((u, item, int(base + ts)))
                else:
                    item = int(rng.choice(members[c]))
                events.append((u, item, int(base + ts)))
    # pin t_a / t_b to the grid with in-community events
    events.append((0, int(members[user_comm[0, 0]][0]), spec.t0))
    last = spec.n_users - 1
    events.append((last, int(members[user_comm[last, -1]][0]), spec.t0 + spec.n_intervals * spec.span))
    # unobserved ids still belong to the catalogue
    log = InteractionLog.from_events(events)
    if log.num_items < spec.n_items:
        log.num_items = spec.n_items
        log.item_labels = [str(i) for i in range(spec.n_items)]
    if log.num_users < spec.n_users:
        log.num_users = spec.n_users
        log.user_labels = [str(u) for u in range(spec.n_users)]
    return SyntheticData(log, item_comm, user_comm, noise)


@dataclass
class PlantedOutliers:
    graphs: IntervalGraphs
    t: int
    outliers: dict[int, int]  # flagged user -> planted outlier item
    community_items: dict[int, set[int]]


def plant_outliers(spec: SyntheticSpec, t: int = 0, min_items: int = 4,
                   max_users: int | None = None) -> PlantedOutliers:
    """Noise-free synthetic graphs plus one similarity-isolated outlier per flagged user.

    The co-occurrence graph is built before the outliers are inserted into
    ``A_t`` (and the user's sequence), so each outlier has no path of length
    <= 2 to the user's own items.
    """
    clean = SyntheticSpec(**{**spec.__dict__, "noise_rate": 0.0, "drift": 0.0})
    data = generate_synthetic(clean)
    graphs = build_graphs(data.log, clean.n_intervals)
    rng = np.random.default_rng(spec.seed + 1)
    outliers, own = {}, {}
    for u in sorted(graphs.user_item[t].rows):
        items = set(graphs.user_item[t].items_of(u))
        if len(items) < min_items:
            continue
        c = data.user_community[u, t]
        pool = np.flatnonzero(data.item_community != c)
        x = int(rng.choice(pool))
        graphs.user_item[t].set(u, x, 1.0)
        seq = graphs.sequences[t][u]
        seq.append((x, seq[-1][1]))
        outliers[u] = x
        own[u] = items
        if max_users is not None and len(outliers) >= max_users:
            break
    return PlantedOutliers(graphs, t, outliers, own)
