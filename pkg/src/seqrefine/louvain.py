"""Two-phase Louvain modularity optimisation on small weighted undirected graphs.

Nodes are visited in ascending id order, so results are deterministic. The
graph is kept as a symmetric adjacency dict; after aggregation a community's
internal weight becomes a self-loop ``A[c][c]`` counted in both directions,
which keeps ``k_i = sum_j A_ij`` and ``2m = sum_ij A_ij`` valid at every level.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable


@dataclass
class Partition:
    community_of: dict
    modularity: float

    def communities(self) -> list[list]:
        groups: dict[int, list] = defaultdict(list)
        for node in sorted(self.community_of):
            groups[self.community_of[node]].append(node)
        return [groups[c] for c in sorted(groups)]


Adjacency = dict[Hashable, dict[Hashable, float]]
MoveHook = Callable[[Hashable, int, int, float], None]


def adjacency_from_edges(nodes: Iterable, edges: dict[tuple, float]) -> Adjacency:
    adj: Adjacency = {n: {} for n in nodes}
    for (a, b), w in edges.items():
        if w < 0:
            raise ValueError(f"negative edge weight {w} on {(a, b)}")
        if w == 0:
            continue
        adj.setdefault(a, {})
        adj.setdefault(b, {})
        if a == b:
            adj[a][a] = adj[a].get(a, 0.0) + 2.0 * w
        else:
            adj[a][b] = adj[a].get(b, 0.0) + w
            adj[b][a] = adj[b].get(a, 0.0) + w
    return adj


def modularity(adj: Adjacency, community_of: dict) -> float:
    two_m = sum(w for nbrs in adj.values() for w in nbrs.values())
    if two_m == 0:
        return 0.0
    internal: dict[int, float] = defaultdict(float)
    total: dict[int, float] = defaultdict(float)
    for i, nbrs in adj.items():
        ci = community_of[i]
        for j, w in nbrs.items():
            total[ci] += w
            if community_of[j] == ci:
                internal[ci] += w
    return sum(internal[c] / two_m - (total[c] / two_m) ** 2 for c in total)


def _local_moves(adj: Adjacency, on_move: MoveHook | None) -> tuple[dict, bool]:
    nodes = sorted(adj)
    degree = {i: sum(adj[i].values()) for i in nodes}
    two_m = sum(degree.values())
    comm = {i: k for k, i in enumerate(nodes)}
    tot = {k: degree[i] for k, i in enumerate(nodes)}
    moved_any = False
    if two_m == 0:
        return comm, False
    improved = True
    while improved:
        improved = False
        for i in nodes:
            ci = comm[i]
            ki = degree[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in adj[i].items():
                if j != i:
                    links[comm[j]] += w
            tot[ci] -= ki
            # gain of inserting i into c, up to the common factor 1/m
            def gain(c):
                return links.get(c, 0.0) - ki * tot[c] / two_m
            stay = gain(ci)
            best, best_gain = ci, stay
            for c in sorted(links):
                g = gain(c)
                if g > best_gain:
                    best, best_gain = c, g
            # roundoff guard: a move must beat staying by more than float noise
            if best_gain - stay <= 1e-12 * two_m:
                best, best_gain = ci, stay
            tot[best] += ki
            if best != ci:
                comm[i] = best
                improved = moved_any = True
                if on_move is not None:
                    on_move(i, ci, best, 2.0 * (best_gain - stay) / two_m)
    return comm, moved_any


def _aggregate(adj: Adjacency, comm: dict) -> Adjacency:
    new: Adjacency = {c: {} for c in set(comm.values())}
    for i, nbrs in adj.items():
        ci = comm[i]
        for j, w in nbrs.items():
            cj = comm[j]
            new[ci][cj] = new[ci].get(cj, 0.0) + w
    return new


def louvain(adj: Adjacency, on_move: MoveHook | None = None) -> Partition:
    """Partition ``adj`` into communities by greedy modularity maximisation.

    ``on_move(node, from_comm, to_comm, delta_q)`` is called for every local
    move with the exact modularity change of the current level's graph.
    """
    if not adj:
        return Partition({}, 0.0)
    membership = {n: n for n in adj}
    level = adj
    while True:
        comm, moved = _local_moves(level, on_move)
        if not moved:
            break
        membership = {n: comm[membership[n]] for n in membership}
        level = _aggregate(level, comm)
    # relabel communities 0.. in order of their smallest node
    labels: dict = {}
    out = {}
    for n in sorted(adj):
        out[n] = labels.setdefault(membership[n], len(labels))
    return Partition(out, modularity(adj, out))
