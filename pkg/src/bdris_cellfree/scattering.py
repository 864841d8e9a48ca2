"""Frequency-dependent scattering of group-connected reconfigurable surfaces.

Each group of m elements is a multiport network: the admittance matrix A
collects the series R0-L2-C branch admittances plus the parallel-L1 term, and
the scattering block is Phi = (A + psi0 I)^-1 (A - psi0 I). A regrouping
permutation p rearranges which elements form each group; the full M x M
response is Q Phi_blockdiag Q^T with Q[:, i] = e_{p(i)}.

All inputs here are SI (farads, henries, ohms, hertz).
"""
from __future__ import annotations

import numpy as np

from .errors import SingularMatrixError


def branch_admittance(caps_f, f_hz, circuit):
    """Admittance of one tunable branch: series R0 + jwL2 + 1/(jwC), plus the
    parallel inductor 1/(jwL1). Vectorized over the capacitance array."""
    w = 2.0 * np.pi * f_hz
    series = circuit.r0_ohm + 1j * w * circuit.l2_h + 1.0 / (1j * w * np.asarray(caps_f))
    return 1.0 / series + 1.0 / (1j * w * circuit.l1_h)


def admittance_matrix(caps_f, f_hz, circuit, require_symmetric=True):
    """Group admittance matrix from the capacitance matrix of one group.

    Diagonal n sums the branch admittances of row n (the element's own tunable
    capacitor plus every interconnection it participates in); off-diagonal
    (n, n') is the negated single branch admittance.
    """
    c = np.asarray(caps_f, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"capacitance matrix must be square, got {c.shape}")
    if require_symmetric and not np.array_equal(c, c.T):
        raise ValueError("capacitance matrix must be symmetric")
    if f_hz <= 0:
        raise ValueError("frequency must be > 0")
    y = branch_admittance(c, f_hz, circuit)
    a = -y
    np.fill_diagonal(a, y.sum(axis=1))
    return a


def group_scattering(a, psi0_s):
    """Scattering block of one group: solve (A + psi0 I) Phi = (A - psi0 I)."""
    a = np.asarray(a)
    m = a.shape[0]
    x = a + psi0_s * np.eye(m)
    try:
        phi = np.linalg.solve(x, a - psi0_s * np.eye(m))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("admittance shift A + psi0*I is singular",
                                  cond=np.linalg.cond(x)) from exc
    if not np.all(np.isfinite(phi)):
        raise SingularMatrixError("admittance shift A + psi0*I is numerically singular",
                                  cond=np.linalg.cond(x))
    return phi


def identity_permutation(m):
    return np.arange(m, dtype=int)


def permutation_matrix(perm):
    """Dense 0/1 matrix Q with Q[perm[i], i] = 1."""
    perm = np.asarray(perm, dtype=int)
    m = perm.size
    q = np.zeros((m, m))
    q[perm, np.arange(m)] = 1.0
    return q


def matrix_to_permutation(q):
    """Inverse of permutation_matrix; validates the row/column sums."""
    q = np.asarray(q)
    m = q.shape[0]
    if not (np.array_equal(q.sum(axis=0), np.ones(m)) and
            np.array_equal(q.sum(axis=1), np.ones(m)) and
            np.all((q == 0) | (q == 1))):
        raise ValueError("not a permutation matrix")
    return np.argmax(q, axis=0)


def is_permutation(perm, m):
    perm = np.asarray(perm)
    return perm.shape == (m,) and np.array_equal(np.sort(perm), np.arange(m))


def grouping_sets(perm, groups):
    """Element index sets of each group under the regrouping permutation.

    Group g collects perm[g*mt:(g+1)*mt], order preserved.
    """
    perm = np.asarray(perm, dtype=int)
    if not is_permutation(perm, groups.m_total):
        raise ValueError("perm is not a permutation of 0..M-1")
    mt = groups.m_per_group
    return [perm[g * mt:(g + 1) * mt].copy() for g in range(groups.n_groups)]


def assemble_response(blocks, perm):
    """Full M x M response from per-group blocks: Q blockdiag(blocks) Q^T.

    Entry-wise this scatters block value [i, j] to [perm[i], perm[j]].
    """
    mt = blocks[0].shape[0]
    m = mt * len(blocks)
    perm = np.asarray(perm, dtype=int)
    if perm.size != m:
        raise ValueError(f"permutation length {perm.size} does not match M={m}")
    full = np.zeros((m, m), dtype=complex)
    for g, blk in enumerate(blocks):
        if blk.shape != (mt, mt):
            raise ValueError("all blocks must share the same square shape")
        idx = perm[g * mt:(g + 1) * mt]
        full[np.ix_(idx, idx)] = blk
    return full


def assemble_response_dense(blocks, q):
    """Continuous-relaxation assembly Q blockdiag(blocks) Q^T for a dense real Q
    (used by gradient checks; the physics path always uses a true permutation)."""
    import scipy.linalg

    phi = scipy.linalg.block_diag(*blocks)
    return q @ phi @ q.T


class SurfaceResponse:
    """Response of one surface at one frequency: assembled matrix, per-group
    blocks, and the shifted admittances X = A + psi0 I kept for gradients."""

    __slots__ = ("full", "blocks", "x_blocks", "perm")

    def __init__(self, full, blocks, x_blocks, perm):
        self.full = full
        self.blocks = blocks
        self.x_blocks = x_blocks
        self.perm = perm


def surface_response(caps_f, perm, f_hz, circuit, require_symmetric=True):
    """Build the response of one surface at one frequency.

    caps_f: (G, mt, mt) symmetric capacitance blocks in farads.
    require_symmetric=False admits asymmetric blocks (the admittance map is
    well defined entry-wise; gradient probes perturb single entries).
    """
    caps_f = np.asarray(caps_f)
    n_groups = caps_f.shape[0]
    mt = caps_f.shape[1]
    blocks = []
    x_blocks = []
    for g in range(n_groups):
        a = admittance_matrix(caps_f[g], f_hz, circuit,
                              require_symmetric=require_symmetric)
        x_blocks.append(a + circuit.psi0_s * np.eye(mt))
        blocks.append(group_scattering(a, circuit.psi0_s))
    full = assemble_response(blocks, perm)
    return SurfaceResponse(full, blocks, x_blocks, np.asarray(perm, dtype=int))


def response_set(caps_pf, perms, freqs_hz, circuit, require_symmetric=True):
    """Responses of all surfaces on the subcarrier grid.

    caps_pf: (R, G, mt, mt) in picofarads (the optimizer-facing unit; converted
    to farads here, at the physics boundary).
    Returns a list indexed [r][k] of SurfaceResponse.
    """
    caps_pf = np.asarray(caps_pf)
    n_ris = caps_pf.shape[0]
    out = []
    for r in range(n_ris):
        caps_f = caps_pf[r] * 1e-12
        out.append([surface_response(caps_f, perms[r], f, circuit,
                                     require_symmetric=require_symmetric)
                    for f in freqs_hz])
    return out


def full_response_array(responses):
    """Stack a response_set into an (R, K, M, M) array for channel composition."""
    n_ris = len(responses)
    n_sc = len(responses[0])
    m = responses[0][0].full.shape[0]
    arr = np.empty((n_ris, n_sc, m, m), dtype=complex)
    for r in range(n_ris):
        for k in range(n_sc):
            arr[r, k] = responses[r][k].full
    return arr
