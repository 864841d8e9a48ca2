"""Regrouping-permutation block: rate gradient on the continuous relaxation,
linear-assignment solves for the subproblem and for the consensus projection.

Permutations are stored as integer vectors p with Q[p[i], i] = 1: position i of
the sequential group layout is realized by physical element p[i].
"""
from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.optimize

from .rate import LN2
from .scattering import permutation_matrix

LEXICOGRAPHIC_AUTO_LIMIT = 12


def grad_perm_agent(ls, chan, w, responses, b, r):
    """Gradient of the agent's sum rate w.r.t. its regrouping permutation for
    surface r, entries treated as real free variables (continuous relaxation),
    standard layout grad[i, j] = d rate / d Q[i, j]. Shape (M, M).

    Valid at the current (feasible) permutation point; only the agent's own
    transmit links carry the dependence.
    """
    n_ue = chan.n_ue
    n_sc = chan.n_subcarriers
    m = chan.f_bs_ris.shape[3]
    q_mat = permutation_matrix(responses[r][0].perm)
    tinv_h = np.conj(np.swapaxes(ls.tinv_s, -1, -2))
    pinv_h = np.conj(np.swapaxes(ls.pinv_s, -1, -2))
    grad = np.zeros((m, m))
    for k in range(n_sc):
        phi_block = scipy.linalg.block_diag(*responses[r][k].blocks)
        f_k = chan.f_bs_ris[b, r, k]
        fw = np.matmul(f_k, w[b, :, k])
        core = np.zeros((m, m), dtype=complex)
        for u in range(n_ue):
            g_k = chan.g_ris_ue[r, u, k]
            sig = fw[u] @ (tinv_h[u, k] @ g_k)
            core += sig + sig.T
            tail = pinv_h[u, k] @ g_k
            for q in range(n_ue):
                if q == u:
                    continue
                mid = np.conj(ls.s[u, q, k].T) @ ls.tinv_s[u, k]
                psi = fw[q] @ (mid @ tail)
                core -= psi + psi.T
        grad += (2.0 / LN2) * np.real(core @ q_mat @ phi_block)
    return grad


def _assignment_value(cost, perm):
    return float(cost[perm, np.arange(perm.size)].sum())


def _raw_lsap(cost):
    """Permutation p maximizing sum_i cost[p[i], i] via the assignment solver."""
    rows, cols = scipy.optimize.linear_sum_assignment(cost, maximize=True)
    p = np.empty(cost.shape[0], dtype=int)
    p[cols] = rows
    return p


def lsap_solve(cost, lexicographic=None):
    """Maximize tr(cost^T Q) over permutation matrices; returns the vector p.

    lexicographic=True refines ties to the lexicographically smallest p
    (deterministic tie-break); default: enabled for M <= 12, where the
    refinement cost is negligible. Without it the solver is still
    deterministic, just with an unspecified tie rule.
    """
    cost = np.asarray(cost, dtype=float)
    if not np.all(np.isfinite(cost)):
        raise ValueError("assignment cost must be finite")
    m = cost.shape[0]
    p = _raw_lsap(cost)
    if lexicographic is None:
        lexicographic = m <= LEXICOGRAPHIC_AUTO_LIMIT
    if not lexicographic or m == 1:
        return p
    best = _assignment_value(cost, p)
    tol = 1e-9 * max(1.0, abs(best))
    fixed = np.empty(m, dtype=int)
    free_rows = list(range(m))
    prefix = 0.0
    for i in range(m):
        for row in free_rows:
            rest_rows = [x for x in free_rows if x != row]
            if rest_rows:
                sub = cost[np.ix_(rest_rows, range(i + 1, m))]
                rr, cc = scipy.optimize.linear_sum_assignment(sub, maximize=True)
                rest = float(sub[rr, cc].sum())
            else:
                rest = 0.0
            if prefix + cost[row, i] + rest >= best - tol:
                fixed[i] = row
                prefix += cost[row, i]
                free_rows.remove(row)
                break
        else:
            raise AssertionError("lexicographic refinement lost the optimum")
    return fixed


def project_permutation(candidate, lexicographic=None):
    """argmin_Q ||Q - candidate||_F^2 over permutations == LSAP on the
    candidate itself (||Q||_F^2 is constant), returned as a vector p."""
    return lsap_solve(np.asarray(candidate, dtype=float), lexicographic)


def perm_objective_cost(perm_t, gamma, pi, d, tau, rho):
    """LSAP cost of the permutation subproblem: tau*Q^t + rho*(Gamma + Pi)
    + (1-rho)*D (the quadratic term is constant on the permutation set)."""
    return tau * permutation_matrix(perm_t) + rho * (gamma + pi) + (1.0 - rho) * d
