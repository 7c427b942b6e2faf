"""Interaction logs, time slicing, and per-interval user-item / item-item graphs."""
from __future__ import annotations

import copy
import csv
import io
import json
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Interaction(NamedTuple):
    user: int
    item: int
    timestamp: int


@dataclass
class InteractionLog:
    interactions: list[Interaction]
    num_users: int
    num_items: int
    t_a: int
    t_b: int
    user_labels: list[str] = field(default_factory=list)
    item_labels: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.interactions)

    @classmethod
    def from_events(cls, events: Iterable[tuple[int, int, int]],
                    user_labels=None, item_labels=None) -> "InteractionLog":
        """Build from dense-index events; dedups exact repeats, keeps input order on ties."""
        seen = set()
        kept = []
        for u, i, ts in events:
            key = (int(u), int(i), int(ts))
            if key in seen:
                continue
            seen.add(key)
            kept.append(Interaction(*key))
        if not kept:
            raise ParseError("interaction log is empty")
        # sorted() is stable, so equal timestamps keep their input order
        kept = sorted(kept, key=lambda x: (x.user, x.timestamp))
        n_users = 1 + max(x.user for x in kept)
        n_items = 1 + max(x.item for x in kept)
        ts = [x.timestamp for x in kept]
        return cls(kept, n_users, n_items, min(ts), max(ts),
                   list(user_labels) if user_labels is not None else [str(u) for u in range(n_users)],
                   list(item_labels) if item_labels is not None else [str(i) for i in range(n_items)])


_HEADER_TS = {"timestamp", "time", "ts", "datetime", "date"}


def parse_log(stream, format: str = "csv", delimiter: str | None = None) -> InteractionLog:
    """Parse ``user,item,timestamp`` rows with an optional header.

    Ids are arbitrary strings remapped to dense indices in first-seen order.
    ``delimiter=None`` sniffs tab vs comma from the first non-empty line.
    """
    if format != "csv":
        raise ValueError(f"unsupported log format {format!r}")
    if isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    text = stream.read()
    if delimiter is None:
        first = next((ln for ln in text.splitlines() if ln.strip()), "")
        delimiter = "\t" if "\t" in first else ","

    users: dict[str, int] = {}
    items: dict[str, int] = {}
    events = []
    first_row = True
    for lineno, row in enumerate(csv.reader(io.StringIO(text), delimiter=delimiter), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        row = [c.strip() for c in row]
        is_first, first_row = first_row, False
        if len(row) < 3:
            raise ParseError(f"expected user,item,timestamp but got {len(row)} field(s)", lineno)
        try:
            ts = int(row[2])
        except ValueError:
            if is_first and row[2].lower() in _HEADER_TS:
                continue
            raise ParseError(f"timestamp {row[2]!r} is not an integer", lineno) from None
        u = users.setdefault(row[0], len(users))
        i = items.setdefault(row[1], len(items))
        events.append((u, i, ts))
    if not events:
        raise ParseError("interaction log is empty")
    return InteractionLog.from_events(events, list(users), list(items))


def load_log(path: str | os.PathLike) -> InteractionLog:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh)


def write_log(log: InteractionLog, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "item", "timestamp"])
        for x in log.interactions:
            w.writerow([log.user_labels[x.user], log.item_labels[x.item], x.timestamp])


# -- graphs ------------------------------------------------------------------------

class UserItemGraph:
    """Sparse weighted bipartite adjacency A_t stored row-wise: user -> {item: weight}."""

    def __init__(self, num_users: int, num_items: int, t: int):
        self.shape = (num_users, num_items)
        self.t = t
        self.rows: dict[int, dict[int, float]] = {}

    def set(self, user: int, item: int, weight: float) -> None:
        if not 0.0 < weight <= 1.0:
            raise ValueError(f"user-item weight {weight} outside (0, 1]")
        self.rows.setdefault(user, {})[item] = float(weight)

    def remove(self, user: int, item: int) -> None:
        row = self.rows.get(user)
        if row is not None:
            row.pop(item, None)
            if not row:
                del self.rows[user]

    def get(self, user: int, item: int) -> float:
        return self.rows.get(user, {}).get(item, 0.0)

    def items_of(self, user: int) -> dict[int, float]:
        return self.rows.get(user, {})

    def entries(self):
        for u in sorted(self.rows):
            for i in sorted(self.rows[u]):
                yield u, i, self.rows[u][i]

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def to_csr(self) -> sp.csr_matrix:
        ent = list(self.entries())
        if not ent:
            return sp.csr_matrix(self.shape, dtype=np.float64)
        u, i, w = zip(*ent)
        return sp.csr_matrix((w, (u, i)), shape=self.shape, dtype=np.float64)


class ItemItemGraph:
    """Symmetric item co-occurrence graph Z_t; each undirected edge stored once with a < b."""

    def __init__(self, num_items: int, t: int):
        self.shape = (num_items, num_items)
        self.t = t
        self.edges: dict[tuple[int, int], float] = {}

    def get(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        return self.edges.get((min(a, b), max(a, b)), 0.0)

    def entries(self):
        for (a, b) in sorted(self.edges):
            yield a, b, self.edges[(a, b)]

    def to_csr(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix(self.shape, dtype=np.float64)
        a, b, w = zip(*self.entries())
        rows = np.concatenate([a, b])
        cols = np.concatenate([b, a])
        vals = np.concatenate([w, w])
        return sp.csr_matrix((vals, (rows, cols)), shape=self.shape, dtype=np.float64)


@dataclass
class IntervalGraphs:
    T: int
    num_users: int
    num_items: int
    t_a: int
    t_b: int
    # sequences[t][user] -> [(item, timestamp), ...] in time order
    sequences: list[dict[int, list[tuple[int, int]]]]
    user_item: list[UserItemGraph] = field(default_factory=list)
    item_item: list[ItemItemGraph] = field(default_factory=list)

    def copy(self) -> "IntervalGraphs":
        return copy.deepcopy(self)

    def active_users(self, t: int) -> list[int]:
        return sorted(self.sequences[t])

    def head(self, n: int) -> "IntervalGraphs":
        """The first ``n`` intervals as a standalone graph set."""
        return IntervalGraphs(
            n, self.num_users, self.num_items, self.t_a, self.t_b,
            copy.deepcopy(self.sequences[:n]),
            copy.deepcopy(self.user_item[:n]),
            copy.deepcopy(self.item_item[:n]),
        )


def interval_of(ts: int, t_a: int, t_b: int, T: int) -> int:
    if t_b == t_a:
        return 0
    # integer form of floor((ts - t_a) / ((t_b - t_a) / T)), exact for int timestamps
    return min((ts - t_a) * T // (t_b - t_a), T - 1)


def slice_time(log: InteractionLog, T: int) -> IntervalGraphs:
    if T < 1:
        raise ValueError(f"number of intervals must be >= 1, got {T}")
    if not log.interactions:
        raise ValueError("cannot slice an empty log")
    seqs: list[dict[int, list]] = [defaultdict(list) for _ in range(T)]
    for x in log.interactions:
        seqs[interval_of(x.timestamp, log.t_a, log.t_b, T)][x.user].append((x.item, x.timestamp))
    return IntervalGraphs(T, log.num_users, log.num_items, log.t_a, log.t_b,
                          [dict(s) for s in seqs])


def build_user_item(graphs: IntervalGraphs) -> IntervalGraphs:
    graphs.user_item = []
    for t in range(graphs.T):
        g = UserItemGraph(graphs.num_users, graphs.num_items, t)
        for u, seq in graphs.sequences[t].items():
            for item, _ in seq:
                g.set(u, item, 1.0)
        graphs.user_item.append(g)
    return graphs


def build_item_item(graphs: IntervalGraphs) -> IntervalGraphs:
    graphs.item_item = []
    for t in range(graphs.T):
        counts: dict[tuple[int, int], int] = defaultdict(int)
        for seq in graphs.sequences[t].values():
            for (a, _), (b, _) in zip(seq, seq[1:]):
                if a != b:
                    counts[(min(a, b), max(a, b))] += 1
        g = ItemItemGraph(graphs.num_items, t)
        if counts:
            top = max(counts.values())
            g.edges = {k: c / top for k, c in sorted(counts.items())}
        graphs.item_item.append(g)
    return graphs


def build_graphs(log: InteractionLog, T: int) -> IntervalGraphs:
    return build_item_item(build_user_item(slice_time(log, T)))


# -- on-disk format -----------------------------------------------------------------

def save_graphs(graphs: IntervalGraphs, directory: str | os.PathLike) -> None:
    """One text triplet file per interval and graph kind, plus ``manifest.json``."""
    os.makedirs(directory, exist_ok=True)
    manifest = {"I": graphs.num_users, "J": graphs.num_items, "T": graphs.T,
                "t_a": graphs.t_a, "t_b": graphs.t_b}
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for t in range(graphs.T):
        with open(os.path.join(directory, f"user_item_{t:03d}.txt"), "w") as fh:
            fh.writelines(f"{u} {i} {w!r}\n" for u, i, w in graphs.user_item[t].entries())
        with open(os.path.join(directory, f"item_item_{t:03d}.txt"), "w") as fh:
            fh.writelines(f"{a} {b} {w!r}\n" for a, b, w in graphs.item_item[t].entries())
        with open(os.path.join(directory, f"sequences_{t:03d}.txt"), "w") as fh:
            for u in sorted(graphs.sequences[t]):
                fh.writelines(f"{u} {i} {ts}\n" for i, ts in graphs.sequences[t][u])


def load_graphs(directory: str | os.PathLike) -> IntervalGraphs:
    path = os.path.join(directory, "manifest.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no graph manifest at {path}; run `preprocess` first")
    with open(path) as fh:
        m = json.load(fh)
    seqs = []
    ui, ii = [], []
    for t in range(m["T"]):
        s: dict[int, list] = {}
        with open(os.path.join(directory, f"sequences_{t:03d}.txt")) as fh:
            for line in fh:
                u, i, ts = line.split()
                s.setdefault(int(u), []).append((int(i), int(ts)))
        seqs.append(s)
        g = UserItemGraph(m["I"], m["J"], t)
        with open(os.path.join(directory, f"user_item_{t:03d}.txt")) as fh:
            for line in fh:
                u, i, w = line.split()
                g.set(int(u), int(i), float(w))
        ui.append(g)
        z = ItemItemGraph(m["J"], t)
        with open(os.path.join(directory, f"item_item_{t:03d}.txt")) as fh:
            for line in fh:
                a, b, w = line.split()
                z.edges[(int(a), int(b))] = float(w)
        ii.append(z)
    return IntervalGraphs(m["T"], m["I"], m["J"], m["t_a"], m["t_b"], seqs, ui, ii)
