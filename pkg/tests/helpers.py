"""Shared test utilities: finite-difference oracles and graph builders."""

import numpy as np

from ssfgnet.graph import Graph, add_self_loops, connected_components


def fd_grad(f, arrays, step=1e-5):
    """Central finite differences of the scalar ``f()`` w.r.t. each array.

    Arrays are perturbed in place and restored; ``f`` must recompute from
    scratch on every call.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f()
            flat[i] = orig - step
            f_minus = f()
            flat[i] = orig
            gf[i] = (f_plus - f_minus) / (2.0 * step)
        grads.append(g)
    return grads


def rel_err(got, want):
    """Max abs difference, normalized by the oracle's overall scale."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    return float(np.max(np.abs(got - want)) / max(1e-8, np.max(np.abs(want))))


def random_graph(rng, n=10, p=0.4, feat_dim=4, self_loops=False, edge_dim=None):
    """Connected undirected ER graph with random features."""
    while True:
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < p
        pairs = np.stack([iu[keep], ju[keep]], axis=1)
        if pairs.size and len(connected_components(n, pairs[:, 0], pairs[:, 1])) == 1:
            break
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    x = rng.standard_normal((n, feat_dim))
    g = Graph(n, src, dst, x)
    if edge_dim is not None:
        g = Graph(n, src, dst, x, rng.standard_normal((src.size, edge_dim)))
    if self_loops:
        g = add_self_loops(g)
    return g


def permute_graph(g, perm):
    """Relabel nodes: node i becomes perm[i]."""
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    x = g.x[inv]
    return Graph(g.n, perm[g.src], perm[g.dst], x,
                 None if g.edge_attr is None else g.edge_attr.copy())
