"""Undirected communication graphs with 1-based node labels."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

ZERO_EIG_TOL = 1e-9

# Stand-in for the nine-node topology: a 6-cycle 1-2-3-4-5-7 and a triangle
# 6-8-9, bridged by the single edge 3-6.
NINE_NODE_EDGES = ((1, 2), (2, 3), (3, 4), (4, 5), (5, 7), (7, 1), (3, 6), (6, 8), (8, 9), (9, 6))


def _norm(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]]

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 1:
            raise ValueError("graph needs at least one node")
        normed = []
        for e in edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValueError(f"edge ({i},{j}) outside nodes 1..{n}")
            normed.append(_norm(i, j))
        if len(set(normed)) != len(normed):
            raise ValueError("duplicate edge")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(normed))

    def has_edge(self, i: int, j: int) -> bool:
        return _norm(i, j) in self.edges

    def neighbors(self, i: int) -> list[int]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def directed_links(self) -> list[tuple[int, int]]:
        """Every (sender, receiver) pair, sorted."""
        return sorted([(a, b) for a, b in self.edges] + [(b, a) for a, b in self.edges])

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def nine_node_graph() -> Graph:
    return Graph(9, NINE_NODE_EDGES)


@dataclass(frozen=True)
class Laplacian:
    L: np.ndarray
    eigenvalues: np.ndarray

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else 0.0


def laplacian(g: Graph) -> Laplacian:
    Li = np.zeros((g.n, g.n), dtype=np.int64)
    for i, j in g.edges:
        Li[i - 1, j - 1] -= 1
        Li[j - 1, i - 1] -= 1
        Li[i - 1, i - 1] += 1
        Li[j - 1, j - 1] += 1
    L = Li.astype(float)
    ev = np.sort(np.linalg.eigvalsh(L))
    L.flags.writeable = False
    ev.flags.writeable = False
    return Laplacian(L, ev)


def components(g: Graph) -> list[list[int]]:
    adj: dict[int, list[int]] = {i: [] for i in range(1, g.n + 1)}
    for i, j in g.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen: set[int] = set()
    out = []
    for start in range(1, g.n + 1):
        if start in seen:
            continue
        comp = []
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        out.append(sorted(comp))
    return out


def is_connected(g: Graph) -> bool:
    return len(components(g)) == 1


def remove_edge(g: Graph, i: int, j: int) -> Graph:
    if not g.has_edge(i, j):
        raise ValueError(f"edge not present: ({i},{j})")
    return Graph(g.n, g.edges - {_norm(i, j)})
