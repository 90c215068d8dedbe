"""Linear algebra over GF(2): incidence maps, kernel dimensions, cycle bases.

Matrices are dense 0/1 uint8 arrays with XOR row elimination; edge sets are
uint8 parity vectors indexed by a host graph's edge ids.  Everything here is a
pure function of immutable inputs.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graphs import Graph

# An EdgeSet is a uint8 vector of length |E| with entries in {0, 1}.
EdgeSet = np.ndarray


@dataclass
class Gf2Matrix:
    rows: int
    cols: int
    bits: np.ndarray  # shape (rows, cols), dtype uint8, values in {0, 1}

    def __post_init__(self):
        self.bits = (np.asarray(self.bits, dtype=np.uint8) % 2).reshape(self.rows, self.cols)

    @classmethod
    def from_dense(cls, arr) -> "Gf2Matrix":
        arr = np.asarray(arr, dtype=np.uint8) % 2
        if arr.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls(rows=arr.shape[0], cols=arr.shape[1], bits=arr)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Matrix-vector product over GF(2)."""
        x = np.asarray(x, dtype=np.uint8) % 2
        return (self.bits @ x.astype(np.int64)) % 2


def rank(m: Gf2Matrix) -> int:
    """GF(2) rank by Gaussian elimination with XOR row operations."""
    work = m.bits.copy()
    nrows, ncols = work.shape
    r = 0
    for col in range(ncols):
        pivot = -1
        for row in range(r, nrows):
            if work[row, col]:
                pivot = row
                break
        if pivot == -1:
            continue
        if pivot != r:
            work[[r, pivot]] = work[[pivot, r]]
        mask = work[r + 1 :, col].astype(bool)
        work[r + 1 :][mask] ^= work[r]
        r += 1
        if r == nrows:
            break
    return r


def kernel_dim(m: Gf2Matrix) -> int:
    return m.cols - rank(m)


def incidence_matrix(g: Graph) -> Gf2Matrix:
    """|V| x |E| vertex-edge incidence over GF(2); a self-loop column is zero."""
    bits = np.zeros((g.vertex_count, g.edge_count), dtype=np.uint8)
    for eid, (u, v) in enumerate(g.edges):
        if u != v:
            bits[u, eid] = 1
            bits[v, eid] = 1
    return Gf2Matrix(rows=g.vertex_count, cols=g.edge_count, bits=bits)


def betti1(g: Graph) -> int:
    """First GF(2) Betti number |E| - |V| + #components; self-loops count 1 each."""
    return g.edge_count - g.vertex_count + len(g.connected_components())


def cycle_basis(g: Graph) -> list[EdgeSet]:
    """Fundamental cycles of a BFS spanning forest.

    Returns exactly betti1(g) independent parity vectors; every one is a
    simple cycle (tree path plus the closing non-tree edge; a self-loop is a
    1-cycle on its own).
    """
    adj = g.adjacency()
    parent_edge = np.full(g.vertex_count, -1, dtype=np.int64)
    parent_vertex = np.full(g.vertex_count, -1, dtype=np.int64)
    depth = np.full(g.vertex_count, -1, dtype=np.int64)
    tree_edges: set[int] = set()
    for root in range(g.vertex_count):
        if depth[root] >= 0:
            continue
        depth[root] = 0
        q = deque([root])
        while q:
            u = q.popleft()
            for w, eid in adj[u]:
                if depth[w] == -1:
                    depth[w] = depth[u] + 1
                    parent_vertex[w] = u
                    parent_edge[w] = eid
                    tree_edges.add(eid)
                    q.append(w)

    basis: list[EdgeSet] = []
    for eid, (u, v) in enumerate(g.edges):
        if eid in tree_edges:
            continue
        vec = np.zeros(g.edge_count, dtype=np.uint8)
        vec[eid] ^= 1
        if u != v:
            # XOR the tree paths from u and v up to their common ancestor.
            a, b = u, v
            while depth[a] > depth[b]:
                vec[parent_edge[a]] ^= 1
                a = parent_vertex[a]
            while depth[b] > depth[a]:
                vec[parent_edge[b]] ^= 1
                b = parent_vertex[b]
            while a != b:
                vec[parent_edge[a]] ^= 1
                vec[parent_edge[b]] ^= 1
                a = parent_vertex[a]
                b = parent_vertex[b]
        basis.append(vec)
    return basis
