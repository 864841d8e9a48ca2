"""Per-BS precoder subproblem: concave surrogate, pricing, closed form, and
the bisection on the power multiplier.

Complex gradient convention used throughout: gradients are with respect to the
conjugate variable, so a first-order expansion reads df = 2 Re<grad, dW> with
<A, B> = Re tr(A^H B). Finite-difference checks encode the same convention.
"""
from __future__ import annotations

import numpy as np

from .errors import BracketError
from .rate import LN2, _logdet2

BISECTION_DOUBLINGS = 60
BISECTION_STEPS = 80
POWER_REL_TOL = 1e-6


def pricing_w(ls, eff, b):
    """Pricing matrices of BS b for all (u, k): conjugate gradient of the other
    users' rates with respect to W[b,u,k].

    Pi[u,k] = (-1/ln2) sum_{q != u} Heff[b,q,k]^H P_q^-1 S_qq K_q^-1 S_qq^H P_q^-1 S_qu
    """
    n_ue = ls.s.shape[0]
    eff_bh = np.conj(np.swapaxes(eff[b], -1, -2))
    kinv_sp = np.linalg.solve(ls.k_mat, np.conj(np.swapaxes(ls.pinv_s, -1, -2)))
    a_qk = np.einsum("qkrs,qksz->qkrz", ls.pinv_s, kinv_sp, optimize=False)
    core = np.einsum("qkrz,qukzs->qukrs", a_qk, ls.s, optimize=False)
    contrib = np.einsum("qktr,qukrs->qukts", eff_bh, core, optimize=False)
    total = contrib.sum(axis=0)
    own = contrib[np.arange(n_ue), np.arange(n_ue)]
    return (-1.0 / LN2) * (total - own)


def grad_rate_w(ls, eff, b):
    """Conjugate gradient of user u's own rate w.r.t. W[b,u,k] for all (u, k):
    (1/ln2) Heff^H P^-1 S_uu K^-1, computed as Heff^H (T^-1 S_uu)."""
    eff_bh = np.conj(np.swapaxes(eff[b], -1, -2))
    return (1.0 / LN2) * np.einsum("uktr,ukrs->ukts", eff_bh, ls.tinv_s,
                                   optimize=False)


def precoder_blocks(ls, eff, b, w_b, pi_w, d_w, rho, tau):
    """Quadratic-form blocks of the closed-form precoder: W(lam) solves
    (E + lam I) W = J per (u, k)."""
    eff_b = eff[b]
    eff_bh = np.conj(np.swapaxes(eff_b, -1, -2))
    e_mat = (rho / LN2) * np.einsum("uktr,ukrz,ukzp->uktp", eff_bh, ls.n_mat,
                                    eff_b, optimize=False)
    n_tx = eff_b.shape[-1]
    e_mat = 0.5 * (e_mat + np.conj(np.swapaxes(e_mat, -1, -2))) \
        + (tau / 2.0) * np.eye(n_tx)
    r_other = ls.s_uu - np.einsum("ukrt,ukts->ukrs", eff_b, w_b, optimize=False)
    m_h = np.conj(np.swapaxes(ls.m_mat, -1, -2))
    inner = m_h - np.einsum("ukrz,ukzs->ukrs", ls.n_mat, r_other, optimize=False)
    j_mat = (rho / LN2) * np.einsum("uktr,ukrs->ukts", eff_bh, inner, optimize=False) \
        + (rho / 2.0) * pi_w + ((1.0 - rho) / 2.0) * d_w + (tau / 2.0) * w_b
    return e_mat, j_mat


def solve_precoder(e_mat, j_mat, lam):
    """W(lam) = (E + lam I)^-1 J, batched over leading axes."""
    n_tx = e_mat.shape[-1]
    return np.linalg.solve(e_mat + lam * np.eye(n_tx), j_mat)


def transmit_power(w_b):
    return float(np.sum(np.abs(w_b) ** 2))


def precoder_update(e_mat, j_mat, p_max):
    """Maximize the per-BS surrogate subject to the total power budget.

    Eigendecomposes each E once, so the power curve
    pow(lam) = sum |V^H J|^2 / (eig + lam)^2 is exact and strictly decreasing;
    lam = 0 if the budget is slack, otherwise bisection drives
    |pow(lam) - p_max| <= 1e-6 * p_max (complementary slackness).
    """
    evals, evecs = np.linalg.eigh(e_mat)
    z = np.einsum("...ij,...ik->...jk", evecs.conj(), j_mat, optimize=False)
    z2 = np.sum(np.abs(z) ** 2, axis=-1)

    def power_at(lam):
        return float(np.sum(z2 / (evals + lam) ** 2))

    def precoders_at(lam):
        scaled = z / (evals + lam)[..., None]
        return np.einsum("...ij,...jk->...ik", evecs, scaled, optimize=False)

    if power_at(0.0) <= p_max:
        return 0.0, precoders_at(0.0)
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_DOUBLINGS):
        if power_at(hi) <= p_max:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise BracketError("power multiplier bracket expansion failed")
    lam = hi
    for _ in range(BISECTION_STEPS):
        lam = 0.5 * (lo + hi)
        pw = power_at(lam)
        if abs(pw - p_max) <= POWER_REL_TOL * p_max:
            break
        if pw > p_max:
            lo = lam
        else:
            hi = lam
    return lam, precoders_at(lam)


def surrogate_rate(ls_ref, eff, b, u, k, w_new, w_ref_buk):
    """Concave minorant of user u's rate at subcarrier k as a function of
    W[b,u,k]: first-order expansion of -log2 det(I - S^H T^-1 S) in (S, T)
    around the reference point, with T(W) = S(W) S(W)^H + P_ref.

    Equals the true rate (value and conjugate gradient) at w_ref_buk and lower
    bounds it everywhere else.
    """
    h_b = eff[b, u, k]
    s_ref = ls_ref.s_uu[u, k]
    s_new = s_ref + h_b @ (w_new - w_ref_buk)
    t_new = s_new @ np.conj(s_new.T) + ls_ref.p_mat[u, k]
    rate_ref = float(_logdet2(ls_ref.k_mat[u, k]))
    m_term = 2.0 * np.real(np.trace(ls_ref.m_mat[u, k] @ (s_new - s_ref)))
    t_term = np.real(np.trace(ls_ref.n_mat[u, k] @ (t_new - ls_ref.t_mat[u, k])))
    return rate_ref + (m_term - t_term) / LN2
