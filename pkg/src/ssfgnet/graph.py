"""Graph container and structural helpers.

Graphs are stored as directed edge lists (src, dst); undirected graphs
carry both orientations. Message passing aggregates over incoming edges,
i.e. node i receives from the sources j of edges (j -> i).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import ShapeError


@dataclass
class Graph:
    """A single graph: node features plus a directed edge list."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    x: np.ndarray
    edge_attr: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    graph_ids: Optional[np.ndarray] = None
    num_graphs: int = 1

    def __post_init__(self) -> None:
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.n < 1:
            raise ShapeError(f"graph must have at least one node, got n={self.n}")
        if self.src.shape != self.dst.shape or self.src.ndim != 1:
            raise ShapeError(
                f"src/dst must be matching 1-d arrays, got {self.src.shape} and {self.dst.shape}"
            )
        for name, idx in (("src", self.src), ("dst", self.dst)):
            if idx.size and (idx.min() < 0 or idx.max() >= self.n):
                bad = int(np.flatnonzero((idx < 0) | (idx >= self.n))[0])
                raise ShapeError(
                    f"edge {bad}: {name} index {int(idx[bad])} outside [0, {self.n})"
                )
        if self.x.ndim != 2 or self.x.shape[0] != self.n:
            raise ShapeError(f"x must have shape ({self.n}, d), got {self.x.shape}")
        if self.edge_attr is not None:
            self.edge_attr = np.asarray(self.edge_attr, dtype=np.float64)
            if self.edge_attr.ndim != 2 or self.edge_attr.shape[0] != self.src.size:
                raise ShapeError(
                    f"edge_attr must have shape ({self.src.size}, c), got {self.edge_attr.shape}"
                )

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n)


def add_self_loops(g: Graph) -> Graph:
    """Return a copy of ``g`` where every node has exactly one (i, i) edge.

    Nodes that already have a self-loop are left alone, so the operation
    is idempotent. Edge attributes for new loops are zero-filled.
    """
    has_loop = np.zeros(g.n, dtype=bool)
    has_loop[g.src[g.src == g.dst]] = True
    missing = np.flatnonzero(~has_loop)
    if missing.size == 0:
        return Graph(g.n, g.src.copy(), g.dst.copy(), g.x,
                     None if g.edge_attr is None else g.edge_attr.copy(), g.y,
                     graph_ids=g.graph_ids, num_graphs=g.num_graphs)
    src = np.concatenate([g.src, missing])
    dst = np.concatenate([g.dst, missing])
    edge_attr = None
    if g.edge_attr is not None:
        pad = np.zeros((missing.size, g.edge_attr.shape[1]))
        edge_attr = np.concatenate([g.edge_attr, pad], axis=0)
    return Graph(g.n, src, dst, g.x, edge_attr, g.y,
                 graph_ids=g.graph_ids, num_graphs=g.num_graphs)


def has_all_self_loops(g: Graph) -> bool:
    loops = np.zeros(g.n, dtype=bool)
    loops[g.src[g.src == g.dst]] = True
    return bool(loops.all())


def connected_components(n: int, src: np.ndarray, dst: np.ndarray) -> List[np.ndarray]:
    """Components of the undirected view of the edge list, each sorted."""
    parent = np.arange(n)

    def find(a: int) -> int:
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for a, b in zip(src.tolist(), dst.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    roots = np.array([find(i) for i in range(n)])
    comps = [np.flatnonzero(roots == r) for r in np.unique(roots)]
    comps.sort(key=lambda c: int(c[0]))
    return comps


def normalized_adjacency(g: Graph) -> np.ndarray:
    """Dense symmetrically normalized adjacency D^-1/2 A D^-1/2.

    ``g`` is expected to already include self-loops; a zero-degree node
    (possible only when loops are absent) is rejected because its
    normalization is undefined.
    """
    a = np.zeros((g.n, g.n))
    a[g.dst, g.src] = 1.0
    deg = a.sum(axis=1)
    if (deg == 0).any():
        bad = int(np.flatnonzero(deg == 0)[0])
        raise ValueError(
            f"node {bad} has degree 0; add self-loops before normalizing"
        )
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def batch_graphs(graphs: List[Graph]) -> Graph:
    """Disjoint union of ``graphs`` with node indices shifted per block.

    The result's ``graph_ids`` attribute maps each node to its source
    graph, for graph-level pooling.
    """
    if not graphs:
        raise ShapeError("cannot batch an empty list of graphs")
    offsets = np.cumsum([0] + [g.n for g in graphs[:-1]])
    src = np.concatenate([g.src + off for g, off in zip(graphs, offsets)])
    dst = np.concatenate([g.dst + off for g, off in zip(graphs, offsets)])
    x = np.concatenate([g.x for g in graphs], axis=0)
    edge_attr = None
    if graphs[0].edge_attr is not None:
        edge_attr = np.concatenate([g.edge_attr for g in graphs], axis=0)
    y = None
    if graphs[0].y is not None:
        y = np.concatenate([np.atleast_1d(g.y) for g in graphs], axis=0)
    ids = np.concatenate([np.full(g.n, i, dtype=np.int64) for i, g in enumerate(graphs)])
    return Graph(int(sum(g.n for g in graphs)), src, dst, x, edge_attr, y,
                 graph_ids=ids, num_graphs=len(graphs))
