"""Degree centrality from the follow graph via HITS."""

from __future__ import annotations

import math

import numpy as np


def hits_centrality(
    edges,
    nodes=None,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> dict[str, tuple[float, float, float]]:
    """Authority, hub, and their mean for every node of a directed graph.

    ``edges`` is an iterable of (source, target) pairs; ``nodes`` may add
    nodes that have no edges (they score 0).  Power iteration with L2
    normalization per step, stopping when both vectors move less than
    ``tol`` in max-abs norm.  An empty graph yields an empty map.
    """
    names = set(nodes or [])
    edge_list = []
    for src, dst in edges:
        names.add(src)
        names.add(dst)
        edge_list.append((src, dst))
    if not names:
        return {}
    order = sorted(names)
    index = {name: i for i, name in enumerate(order)}
    n = len(order)
    adj = np.zeros((n, n), dtype=np.float64)
    for src, dst in edge_list:
        adj[index[src], index[dst]] = 1.0

    auth = np.ones(n) / math.sqrt(n)
    hub = np.ones(n) / math.sqrt(n)
    for _ in range(max_iter):
        new_auth = adj.T @ hub
        norm = np.linalg.norm(new_auth)
        if norm > 0:
            new_auth /= norm
        new_hub = adj @ new_auth
        norm = np.linalg.norm(new_hub)
        if norm > 0:
            new_hub /= norm
        moved = max(np.max(np.abs(new_auth - auth)), np.max(np.abs(new_hub - hub)))
        auth, hub = new_auth, new_hub
        if moved < tol:
            break

    has_edges = (adj.sum(axis=0) > 0) | (adj.sum(axis=1) > 0)
    auth = np.where(has_edges, auth, 0.0)
    hub = np.where(has_edges, hub, 0.0)
    return {
        name: (float(auth[i]), float(hub[i]), float((auth[i] + hub[i]) / 2.0))
        for name, i in index.items()
    }
