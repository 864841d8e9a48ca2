"""Cooperation graph of the BSs: mixing weights and the synchronized exchange.

The mixing matrix must be doubly stochastic on a connected graph for the
tracked averages and the variable copies to reach consensus.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def topology_adjacency(name, n_nodes):
    """Static adjacency (symmetric, no self loops) for the named topology."""
    adj = np.zeros((n_nodes, n_nodes), dtype=bool)
    if n_nodes == 1:
        return adj
    if name == "complete":
        adj[:] = True
        np.fill_diagonal(adj, False)
    elif name == "ring":
        for b in range(n_nodes):
            adj[b, (b + 1) % n_nodes] = True
        adj |= adj.T
    elif name == "path":
        for b in range(n_nodes - 1):
            adj[b, b + 1] = True
        adj |= adj.T
    else:
        raise ConfigError(f"unknown static topology {name!r}")
    return adj


def is_connected(adj):
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        node = stack.pop()
        for peer in np.nonzero(adj[node])[0]:
            if not seen[peer]:
                seen[peer] = True
                stack.append(peer)
    return bool(seen.all())


def metropolis_weights(adj):
    """Metropolis-Hastings weights: V[b,i] = 1/(1 + max(deg_b, deg_i)) on
    edges, diagonal fills the row to 1. Doubly stochastic by symmetry."""
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    if np.any(np.diag(adj)):
        raise ConfigError("adjacency must not contain self loops")
    if not np.array_equal(adj, adj.T):
        raise ConfigError("adjacency must be symmetric")
    if not is_connected(adj):
        raise ConfigError("cooperation graph must be connected")
    deg = adj.sum(axis=1)
    v = np.zeros((n, n))
    for b in range(n):
        for i in np.nonzero(adj[b])[0]:
            v[b, i] = 1.0 / (1.0 + max(deg[b], deg[i]))
        v[b, b] = 1.0 - v[b].sum()
    return v


def adaptive_adjacency(eff, rng):
    """Channel-driven adjacency: average the composite maps over subcarriers,
    pick one UE column per BS at random, and keep the (b, b') pairs whose gain
    clears half the observed range. OR-symmetrized; a ring backbone is added if
    the threshold rule leaves the graph disconnected.

    eff: (B, U, K, N_r, N_t) composite channels.
    """
    n_bs, n_ue = eff.shape[0], eff.shape[1]
    if n_ue < n_bs:
        raise ConfigError("adaptive weights require n_ue >= n_bs")
    hbar = eff.mean(axis=2)
    selected = rng.choice(n_ue, size=n_bs, replace=False)
    omega = np.linalg.norm(hbar[:, selected].reshape(n_bs, n_bs, -1), axis=2)
    thr = 0.5 * (omega.max() - omega.min())
    adj = omega >= thr
    adj |= adj.T
    np.fill_diagonal(adj, False)
    if not is_connected(adj):
        adj |= topology_adjacency("ring", n_bs)
    return adj


def mix(values, v_net):
    """Synchronized exchange: out_b = sum_i V[b,i] * in_i (read-all-then-write).
    Linear; preserves the stack average when V is doubly stochastic."""
    return np.einsum("bi,i...->b...", v_net, np.asarray(values), optimize=False)


def gradient_tracking_step(y_all, v_net, grad_new, grad_old):
    """Dynamic-average-consensus recursion: each agent mixes the neighbors'
    trackers and adds its local gradient increment."""
    return mix(y_all, v_net) + np.asarray(grad_new) - np.asarray(grad_old)
