"""Small helpers on binary adjacency matrices (``B[i, j] = 1`` means i -> j)."""
from __future__ import annotations

import numpy as np


def topological_order(B):
    """Kahn's algorithm. Returns a list of nodes, or ``None`` if ``B`` has a cycle."""
    B = np.asarray(B) != 0
    n = B.shape[0]
    indeg = B.sum(axis=0).astype(int)
    ready = [i for i in range(n) if indeg[i] == 0]
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in np.flatnonzero(B[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(int(j))
    return order if len(order) == n else None


def is_dag(B):
    return topological_order(B) is not None


def find_cycle(B):
    """Return one directed cycle as a list of edges ``[(i, j), ...]``, or ``None``."""
    B = np.asarray(B) != 0
    n = B.shape[0]
    color = [0] * n  # 0 unvisited, 1 on stack, 2 done
    parent = [-1] * n
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(np.flatnonzero(B[root])))]
        color[root] = 1
        while stack:
            u, children = stack[-1]
            advanced = False
            for v in children:
                v = int(v)
                if color[v] == 0:
                    parent[v] = u
                    color[v] = 1
                    stack.append((v, iter(np.flatnonzero(B[v]))))
                    advanced = True
                    break
                if color[v] == 1:
                    cycle = [(u, v)]
                    w = u
                    while w != v:
                        cycle.append((parent[w], w))
                        w = parent[w]
                    return cycle[::-1]
            if not advanced:
                color[u] = 2
                stack.pop()
    return None


def parents(B, j):
    return np.flatnonzero(np.asarray(B)[:, j])


def edges(B):
    """Edges of ``B`` as sorted ``(i, j)`` pairs."""
    rows, cols = np.nonzero(np.asarray(B))
    return sorted(zip(rows.tolist(), cols.tolist()))
