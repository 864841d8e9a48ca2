"""Per-user rates and the shared auxiliary matrices of the optimizers.

For user u at subcarrier k, with S[u,q,k] = sum_b Heff[b,u,k] W[b,q,k]:

    P = sum_{q != u} S_uq S_uq^H + noise*I      (interference + noise)
    K = I + S_uu^H P^-1 S_uu                    (rate = sum_k log2 det K)
    T = S_uu S_uu^H + P
    L = I - S_uu^H T^-1 S_uu                    (log2 det K = -log2 det L)
    M = L^-1 S_uu^H T^-1,  N = T^-1 S_uu M

T^-1 S_uu equals P^-1 S_uu K^-1 (matrix inversion lemma); it is kept because
both the precoder pricing and the surface gradients consume it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError

LN2 = float(np.log(2.0))


def _hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _logdet2(a):
    """Batched log2 det of Hermitian positive-definite matrices via Cholesky."""
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(
            "Hermitian form is not positive definite; upstream inputs are broken"
        ) from exc
    diag = np.real(np.diagonal(chol, axis1=-2, axis2=-1))
    return 2.0 * np.sum(np.log(diag), axis=-1) / LN2


@dataclass
class LinkState:
    """Auxiliary matrices for every (user, subcarrier), batched over (U, K)."""

    s: np.ndarray        # (U, U, K, N_r, N_s)   S[u, q, k]
    s_uu: np.ndarray     # (U, K, N_r, N_s)
    p_mat: np.ndarray    # (U, K, N_r, N_r)
    t_mat: np.ndarray    # (U, K, N_r, N_r)
    k_mat: np.ndarray    # (U, K, N_s, N_s)
    l_mat: np.ndarray    # (U, K, N_s, N_s)
    m_mat: np.ndarray    # (U, K, N_s, N_r)   L^-1 S_uu^H T^-1
    n_mat: np.ndarray    # (U, K, N_r, N_r)   T^-1 S_uu M
    pinv_s: np.ndarray   # (U, K, N_r, N_s)   P^-1 S_uu
    tinv_s: np.ndarray   # (U, K, N_r, N_s)   T^-1 S_uu = P^-1 S_uu K^-1
    noise_w: float


def link_state(eff, w, noise_w):
    """Build the LinkState from effective channels (B,U,K,N_r,N_t) and
    precoders (B,U,K,N_t,N_s)."""
    if noise_w <= 0:
        raise ValueError("noise_w must be > 0")
    if not (np.all(np.isfinite(eff)) and np.all(np.isfinite(w))):
        raise ValueError("non-finite entries in channels or precoders")
    n_ue = eff.shape[1]
    n_rx = eff.shape[3]
    n_streams = w.shape[4]
    s = np.einsum("bukrt,bqkts->uqkrs", eff, w, optimize=False)
    ss_h = np.einsum("uqkrs,uqkzs->uqkrz", s, s.conj(), optimize=False)
    own = ss_h[np.arange(n_ue), np.arange(n_ue)]
    eye_r = np.eye(n_rx)
    p_mat = _hermitize(ss_h.sum(axis=1) - own) + noise_w * eye_r
    t_mat = _hermitize(p_mat + own)
    s_uu = s[np.arange(n_ue), np.arange(n_ue)]
    pinv_s = np.linalg.solve(p_mat, s_uu)
    tinv_s = np.linalg.solve(t_mat, s_uu)
    eye_s = np.eye(n_streams)
    k_mat = _hermitize(eye_s + np.einsum("ukrs,ukrz->uksz", s_uu.conj(), pinv_s))
    l_mat = _hermitize(eye_s - np.einsum("ukrs,ukrz->uksz", s_uu.conj(), tinv_s))
    m_mat = np.linalg.solve(l_mat, np.conj(np.swapaxes(tinv_s, -1, -2)))
    n_mat = np.einsum("ukrs,uksz->ukrz", tinv_s, m_mat, optimize=False)
    return LinkState(s=s, s_uu=s_uu, p_mat=p_mat, t_mat=t_mat, k_mat=k_mat,
                     l_mat=l_mat, m_mat=m_mat, n_mat=n_mat, pinv_s=pinv_s,
                     tinv_s=tinv_s, noise_w=noise_w)


def user_rate(ls, u):
    """Achievable rate of user u in bits/s/Hz (sum over subcarriers)."""
    return float(np.sum(_logdet2(ls.k_mat[u])))


def sum_rate(ls):
    return float(np.sum(_logdet2(ls.k_mat)))


def user_rate_l_form(ls, u):
    """Same rate through the -log2 det L identity (cross-check path)."""
    return float(-np.sum(_logdet2(ls.l_mat[u])))


def sum_rate_from(eff, w, noise_w):
    """Sum rate without building the full LinkState (cheap path for repeated
    evaluations, e.g. finite-difference probes and trace logging)."""
    n_ue = eff.shape[1]
    n_rx = eff.shape[3]
    s = np.einsum("bukrt,bqkts->uqkrs", eff, w, optimize=False)
    ss_h = np.einsum("uqkrs,uqkzs->uqkrz", s, s.conj(), optimize=False)
    own = ss_h[np.arange(n_ue), np.arange(n_ue)]
    p_mat = _hermitize(ss_h.sum(axis=1) - own) + noise_w * np.eye(n_rx)
    s_uu = s[np.arange(n_ue), np.arange(n_ue)]
    pinv_s = np.linalg.solve(p_mat, s_uu)
    k_mat = _hermitize(np.eye(w.shape[4])
                       + np.einsum("ukrs,ukrz->uksz", s_uu.conj(), pinv_s))
    return float(np.sum(_logdet2(k_mat)))
