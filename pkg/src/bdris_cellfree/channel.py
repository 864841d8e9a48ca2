"""Wideband Rayleigh channels with distance pathloss for the cell-free layout.

Shape convention (used everywhere in this package): a channel matrix maps
transmit to receive, rows = receive antennas, columns = transmit antennas.

    h_direct  (B, U, K, N_r, N_t)   BS -> UE
    f_bs_ris  (B, R, K, M,   N_t)   BS -> surface
    g_ris_ue  (R, U, K, N_r, M)     surface -> UE

Fading is i.i.d. circularly-symmetric complex Gaussian per entry and per
subcarrier with variance equal to the pathloss of the link.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def subcarrier_frequencies(fc_hz, bw_hz, n_subcarriers):
    """Center frequency of each subcarrier: fc + (k - (K+1)/2) * BW/K, k=1..K."""
    if n_subcarriers < 1:
        raise ValueError("n_subcarriers must be >= 1")
    if bw_hz <= 0:
        raise ValueError("bw_hz must be > 0")
    k = np.arange(1, n_subcarriers + 1, dtype=float)
    return fc_hz + (k - (n_subcarriers + 1) / 2.0) * (bw_hz / n_subcarriers)


def place_users(geometry, n_ue, rng):
    """Draw user positions uniformly on discs around the cluster centers,
    splitting the users round-robin over the clusters."""
    centers = np.asarray(geometry.cluster_xy, dtype=float)
    n_cl = centers.shape[0]
    pos = np.empty((n_ue, 3))
    for u in range(n_ue):
        cx, cy = centers[u % n_cl]
        radius = geometry.cluster_radius_m * np.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2.0 * np.pi)
        pos[u] = (cx + radius * np.cos(angle), cy + radius * np.sin(angle),
                  geometry.ue_height_m)
    return pos


@dataclass
class ChannelSet:
    """One realization of every wireless link plus the receiver noise power."""

    h_direct: np.ndarray
    f_bs_ris: np.ndarray
    g_ris_ue: np.ndarray
    noise_w: float
    ue_xyz: np.ndarray | None = None

    @property
    def n_bs(self):
        return self.h_direct.shape[0]

    @property
    def n_ue(self):
        return self.h_direct.shape[1]

    @property
    def n_ris(self):
        return self.f_bs_ris.shape[1]

    @property
    def n_subcarriers(self):
        return self.h_direct.shape[2]

    def copy(self):
        return ChannelSet(self.h_direct.copy(), self.f_bs_ris.copy(),
                          self.g_ris_ue.copy(), self.noise_w,
                          None if self.ue_xyz is None else self.ue_xyz.copy())


def _rayleigh(rng, shape, var):
    """i.i.d. CN(0, var) entries; var must broadcast against shape."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(np.asarray(var) / 2.0) * (re + 1j * im)


def generate_channels(scenario, rng, ue_xyz=None):
    """Draw one full channel realization for the scenario.

    User positions are re-drawn from the same rng unless given explicitly.
    Deterministic for a given generator state; draws happen in a fixed order
    (positions, direct, BS->RIS, RIS->UE).
    """
    geo = scenario.resolved_geometry()
    if ue_xyz is None:
        ue_xyz = place_users(geo, scenario.n_ue, rng)
    bs = geo.bs_array()
    ris = geo.ris_array()
    pl = scenario.pathloss

    d_bu = np.linalg.norm(bs[:, None, :] - ue_xyz[None, :, :], axis=-1)
    d_br = np.linalg.norm(bs[:, None, :] - ris[None, :, :], axis=-1)
    d_ru = np.linalg.norm(ris[:, None, :] - ue_xyz[None, :, :], axis=-1)

    b, u, r = scenario.n_bs, scenario.n_ue, scenario.n_ris
    k, m = scenario.n_subcarriers, scenario.n_elements
    nt, nr = scenario.n_tx, scenario.n_rx

    h = _rayleigh(rng, (b, u, k, nr, nt),
                  pl.gain(d_bu, pl.exp_bs_ue)[:, :, None, None, None])
    f = _rayleigh(rng, (b, r, k, m, nt),
                  pl.gain(d_br, pl.exp_bs_ris)[:, :, None, None, None])
    g = _rayleigh(rng, (r, u, k, nr, m),
                  pl.gain(d_ru, pl.exp_ris_ue)[:, :, None, None, None])
    return ChannelSet(h, f, g, scenario.noise_w, ue_xyz)


def perturb_csi(channels, delta, rng):
    """Per-entry noisy copy: g_hat = g + e with e ~ CN(0, delta*|g|^2).

    delta = 0 returns an exact copy. Draws happen in a fixed order (direct,
    BS->RIS, RIS->UE) so a given generator state maps to one perturbation.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    out = channels.copy()
    if delta == 0:
        return out
    for arr in (out.h_direct, out.f_bs_ris, out.g_ris_ue):
        scale = np.sqrt(delta / 2.0) * np.abs(arr)
        arr += scale * (rng.standard_normal(arr.shape)
                        + 1j * rng.standard_normal(arr.shape))
    return out


def effective_channel(channels, resp_full, b, u, k):
    """Composite BS b -> UE u map at subcarrier k: direct path plus every
    surface reflection. resp_full: (R, K, M, M) assembled responses."""
    h = channels.h_direct[b, u, k].copy()
    for r in range(channels.n_ris):
        h += channels.g_ris_ue[r, u, k] @ resp_full[r, k] @ channels.f_bs_ris[b, r, k]
    return h


def effective_channels(channels, resp_full):
    """All composite maps at once -> (B, U, K, N_r, N_t).

    resp_full is either (R, K, M, M) (one response applies to every BS link) or
    (B, R, K, M, M) (each BS link composed with that BS's own response copy).
    """
    resp_full = np.asarray(resp_full)
    if resp_full.ndim == 4:
        reflect = np.einsum("ruknm,rkmp,brkpt->buknt", channels.g_ris_ue,
                            resp_full, channels.f_bs_ris, optimize=True)
    elif resp_full.ndim == 5:
        reflect = np.einsum("ruknm,brkmp,brkpt->buknt", channels.g_ris_ue,
                            resp_full, channels.f_bs_ris, optimize=True)
    else:
        raise ValueError("resp_full must have 4 or 5 dimensions")
    return channels.h_direct + reflect


def save_channels(path, channels):
    """Regression-fixture dump (.npz with keys h_direct, f_bs_ris, g_ris_ue,
    noise_w, ue_xyz)."""
    np.savez(path, h_direct=channels.h_direct, f_bs_ris=channels.f_bs_ris,
             g_ris_ue=channels.g_ris_ue, noise_w=np.float64(channels.noise_w),
             ue_xyz=np.empty(0) if channels.ue_xyz is None else channels.ue_xyz)


def load_channels(path):
    data = np.load(path)
    ue = data["ue_xyz"]
    return ChannelSet(data["h_direct"], data["f_bs_ris"], data["g_ris_ue"],
                      float(data["noise_w"]), None if ue.size == 0 else ue)
