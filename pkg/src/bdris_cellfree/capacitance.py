"""Capacitance block of the per-BS subproblem: analytic gradient of the sum
rate through the circuit response, the closed-form candidate of the concave
quadratic, and the alternating-projection onto {symmetric} ∩ {box}.

Optimizer-facing capacitances are in picofarads (entries O(1)); conversion to
farads happens at the physics boundary, and gradients returned here are per
picofarad.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse

from .errors import ProjectionError
from .rate import LN2

PF = 1e-12
DYKSTRA_TOL = 1e-9
DYKSTRA_MAX_ITER = 10_000


def branch_admittance_derivative(caps_f, f_hz, circuit):
    """d/dC of the series-branch admittance y(C) = beta*C / (beta*delta*C + 1),
    with beta = j*2*pi*f and delta = R0 + j*2*pi*f*L2:  beta / (beta*delta*C + 1)^2."""
    beta = 1j * 2.0 * np.pi * f_hz
    delta = circuit.r0_ohm + 1j * 2.0 * np.pi * f_hz * circuit.l2_h
    return beta / (beta * delta * np.asarray(caps_f) + 1.0) ** 2


def lambda_jacobian(caps_f, f_hz, circuit):
    """Sparse Jacobian of vec(A) w.r.t. vec(C) for one group (column-major vec).

    Entry (i, j) holds d[vec A]_i / d[vec C]_j. Nonzeros follow the two-case
    index rule of the admittance build: each diagonal A[n,n] depends on the
    whole row n of C (through the branch sum), and each off-diagonal A[n,n']
    depends only on C[n,n'] with a sign flip. C entries are treated as
    independent variables (no symmetry coupling).
    """
    caps_f = np.asarray(caps_f, dtype=float)
    mt = caps_f.shape[0]
    dy = branch_admittance_derivative(caps_f, f_hz, circuit)
    rows = []
    cols = []
    vals = []
    for n in range(mt):
        i_diag = n * mt + n
        for m in range(mt):
            rows.append(i_diag)
            cols.append(m * mt + n)
            vals.append(dy[n, m])
    for n in range(mt):
        for np_ in range(mt):
            if n == np_:
                continue
            ij = np_ * mt + n
            rows.append(ij)
            cols.append(ij)
            vals.append(-dy[n, np_])
    return scipy.sparse.csr_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(mt * mt, mt * mt))


def grad_caps_agent(ls, chan, w, responses, caps_pf, freqs_hz, circuit, b, groups):
    """Gradient of the agent's sum rate w.r.t. its capacitance copies, in
    bits/s/Hz per picofarad, shape (R, G, mt, mt).

    ls/chan are the agent's link state and (noisy) channel sample; responses is
    the agent's own response set (list [r][k] of SurfaceResponse). Only the
    agent's own transmit links carry the dependence (other BSs' composite
    channels are built from their own copies), so the chain runs through
    S[u,q,k] via G[:, G_g] Phi_g F[G_g, :] with G_g the permuted group indices.

    The output is generally not symmetric: entries are independent partials.
    """
    n_ris = chan.n_ris
    n_ue = chan.n_ue
    n_sc = chan.n_subcarriers
    mt = groups.m_per_group
    caps_f = np.asarray(caps_pf) * PF
    # response differential: Phi = I - 2*psi0*X^-1, so dPhi = +2*psi0 X^-1 dA X^-1
    scale = 4.0 * circuit.psi0_s / LN2
    grad = np.zeros((n_ris, groups.n_groups, mt, mt))
    pinv_s_h = np.conj(np.swapaxes(ls.pinv_s, -1, -2))
    for r in range(n_ris):
        perm = responses[r][0].perm
        for k in range(n_sc):
            resp = responses[r][k]
            f_all = chan.f_bs_ris[b, r, k]
            for g in range(groups.n_groups):
                idx = perm[g * mt:(g + 1) * mt]
                f_sl = f_all[idx, :]
                # delta[q] = W[b,q,k]^H F_sl^H, stacked over q
                delta = np.conj(np.swapaxes(w[b, :, k], -1, -2)) @ np.conj(f_sl.T)
                core = np.zeros((mt, mt), dtype=complex)
                for u in range(n_ue):
                    g_sl = chan.g_ris_ue[r, u, k][:, idx]
                    s_delta = np.matmul(ls.s[u, :, k], delta).sum(axis=0)
                    interf = s_delta - ls.s[u, u, k] @ delta[u]
                    inner = delta[u] - pinv_s_h[u, k] @ interf
                    core += np.conj(g_sl.T) @ (ls.tinv_s[u, k] @ inner)
                x_conj = resp.x_blocks[g].conj()
                theta = np.linalg.solve(x_conj, core)
                theta = np.linalg.solve(x_conj, theta.T).T
                dy = branch_admittance_derivative(caps_f[r, g], freqs_hz[k],
                                                  circuit)
                grad[r, g] += scale * _contract_jacobian(dy, theta)
    return grad * PF


def _contract_jacobian(dy, theta):
    """Closed form of Re{Lambda^H vec(Theta)} unvectorized: column (n, m) of
    Lambda touches A[n,n] (weight dy[n,m]) and, off the diagonal, A[n,m]
    (weight -dy[n,m]), so grad[n,m] = Re{conj(dy[n,m]) (Theta[n,n] - Theta[n,m])}
    with the second term dropped when n = m."""
    theta_diag = np.diagonal(theta)
    term = theta_diag[:, None] - (theta - np.diag(theta_diag))
    return np.real(np.conj(dy) * term)


def candidate_caps(caps_t, gamma, pi, d, tau, rho):
    """Unconstrained maximizer of the concave quadratic subproblem:
    C* = C^t + (rho*(Gamma + Pi) + (1-rho)*D) / tau."""
    return caps_t + (rho * (gamma + pi) + (1.0 - rho) * d) / tau


def _symmetrize(a):
    return 0.5 * (a + a.T)


def mirror_upper(a):
    """Exact structural symmetry: copy the upper triangle onto the lower."""
    out = np.triu(a)
    return out + np.triu(a, 1).T


def dykstra_project(candidate, lo, hi, tol=DYKSTRA_TOL, max_iter=DYKSTRA_MAX_ITER):
    """Euclidean projection onto {X = X^T} ∩ {lo <= X_ij <= hi} by Dykstra's
    alternating projections with increment corrections.

    Converges to the true projection of the candidate (both sets are convex).
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    c = np.asarray(candidate, dtype=float)
    v = np.zeros_like(c)
    incr = np.zeros_like(c)
    for _ in range(max_iter):
        a = _symmetrize(c + v)
        v = c + v - a
        c_next = np.clip(a + incr, lo, hi)
        incr = a + incr - c_next
        if np.linalg.norm(c_next - c) <= tol:
            return mirror_upper(c_next)
        c = c_next
    raise ProjectionError(
        f"alternating projections did not settle within {max_iter} iterations")
