"""Oversmoothing instrumentation.

Repeated symmetric-normalized graph convolutions drive every feature
column toward the stationary direction pi_i ~ sqrt(deg_i). These helpers
compute that limit, apply k smoothing steps cheaply, and measure feature
diversity (pairwise spread, cosine distance across edges, distance to
the stationary vector).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .graph import Graph, connected_components, has_all_self_loops


@dataclass
class SmoothnessReport:
    """Feature-diversity measurements for one layer's output."""

    layer: int
    mean_pairwise_distance: float
    mad: float
    distance_to_stationary: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "layer": self.layer,
            "mean_pairwise_distance": self.mean_pairwise_distance,
            "mad": self.mad,
            "distance_to_stationary": self.distance_to_stationary,
        }


def stationary_pi(g: Graph) -> np.ndarray:
    """Limit direction of repeated smoothing: pi_i = sqrt(d_i) / sum_j sqrt(d_j).

    Requires self-loops (degrees include them) and a connected graph;
    smoothing a disconnected graph converges per component, so the
    single-vector limit is undefined there.
    """
    if not has_all_self_loops(g):
        raise ValueError("stationary vector requires self-loops on every node")
    comps = connected_components(g.n, g.src, g.dst)
    if len(comps) > 1:
        sizes = ", ".join(str(len(c)) for c in comps)
        raise ValueError(
            f"graph is disconnected: {len(comps)} components of sizes [{sizes}]"
        )
    deg = np.sqrt(g.in_degrees().astype(np.float64))
    return deg / deg.sum()


def power_smooth(g: Graph, x: np.ndarray, k: int) -> np.ndarray:
    """Apply the symmetric-normalized adjacency to ``x`` exactly k times.

    Edge-wise accumulation keeps each step O(E * C); no dense matrix is
    formed.
    """
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    deg = g.in_degrees().astype(np.float64)
    if (deg == 0).any():
        bad = int(np.flatnonzero(deg == 0)[0])
        raise ValueError(f"node {bad} has degree 0; add self-loops before smoothing")
    coeff = 1.0 / np.sqrt(deg[g.src] * deg[g.dst])
    out = np.array(x, dtype=np.float64)
    for _ in range(k):
        nxt = np.zeros_like(out)
        np.add.at(nxt, g.dst, coeff[:, None] * out[g.src])
        out = nxt
    return out


def mean_pairwise_distance(h: np.ndarray) -> float:
    """Root-mean-square distance between feature rows.

    Returns sqrt of the mean squared Euclidean distance over unordered
    row pairs, computed from first and second moments in O(n*d). Zero
    exactly when all rows coincide.
    """
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    total_sq = n * (h * h).sum() - (h.sum(axis=0) ** 2).sum()
    pairs = n * (n - 1) / 2.0
    return math.sqrt(max(total_sq, 0.0) / pairs)


def mean_pairwise_sq_distance_exact(h: np.ndarray) -> float:
    """O(n^2) mean squared pairwise distance, for cross-checking."""
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    if n > 64:
        raise ValueError(f"exact path is for n <= 64, got {n}")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            diff = h[i] - h[j]
            total += float(diff @ diff)
    return total / (n * (n - 1) / 2.0)


def mad(h: np.ndarray, g: Graph) -> float:
    """Mean cosine distance 1 - cos(h_i, h_j) over edges (i != j).

    Self-loops are excluded; rows with norm below 1e-12 are skipped.
    """
    h = np.asarray(h, dtype=np.float64)
    norms = np.linalg.norm(h, axis=1)
    valid_row = norms >= 1e-12
    if not valid_row.any():
        raise ValueError("all feature rows have (near-)zero norm")
    keep = (g.src != g.dst) & valid_row[g.src] & valid_row[g.dst]
    if not keep.any():
        raise ValueError("no valid non-loop edges to measure")
    s, d = g.src[keep], g.dst[keep]
    cos = (h[s] * h[d]).sum(axis=1) / (norms[s] * norms[d])
    return float(np.mean(1.0 - np.clip(cos, -1.0, 1.0)))


def distance_to_stationary(h: np.ndarray, pi: np.ndarray) -> float:
    """Mean over columns of the L1 gap between the normalized column and pi.

    Each column is L1-normalized; since the smoothing limit is defined up
    to sign, the smaller of the distances to +pi and -pi counts. Columns
    that are identically zero contribute the distance from pi to 0.
    """
    h = np.asarray(h, dtype=np.float64)
    dists = []
    for j in range(h.shape[1]):
        col = h[:, j]
        nrm = np.abs(col).sum()
        if nrm == 0.0:
            dists.append(float(np.abs(pi).sum()))
            continue
        u = col / nrm
        dists.append(min(float(np.abs(u - pi).sum()), float(np.abs(u + pi).sum())))
    return float(np.mean(dists))


def smoothness_report(hiddens: List[np.ndarray], g: Graph) -> List[SmoothnessReport]:
    """Per-layer diversity metrics for a stack of hidden features."""
    pi = None
    try:
        pi = stationary_pi(g)
    except ValueError:
        pass  # disconnected or loop-free graphs: skip the stationary metric
    out = []
    for i, h in enumerate(hiddens):
        try:
            m = mad(h, g)
        except ValueError:
            m = 0.0
        out.append(SmoothnessReport(
            layer=i,
            mean_pairwise_distance=mean_pairwise_distance(h),
            mad=m,
            distance_to_stationary=(distance_to_stationary(h, pi) if pi is not None else 0.0),
        ))
    return out
