"""Shared builders for the test suite: small random instances of the full
evaluation pipeline plus finite-difference probes.

Relative errors are matrix-level: max |a - b| / max(max|a|, max|b|).
"""
import numpy as np

from bdris_cellfree import channel, precoding, rate, scattering
from bdris_cellfree.config import Geometry, Scenario, ScheduleParams


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def small_scenario(n_bs=2, n_ue=2, n_ris=1, m=4, g=2, k=2, n=2, **overrides):
    geometry = Geometry(
        bs_xyz=tuple((40.0 * b, 0.0, 5.0) for b in range(n_bs)),
        ris_xyz=tuple((60.0 + 20.0 * r, 55.0, 6.0) for r in range(n_ris)),
        cluster_xy=((62.5, 52.5), (77.5, 52.5)),
    )
    base = dict(n_bs=n_bs, n_ue=n_ue, n_ris=n_ris, n_elements=m, n_groups=g,
                n_tx=n, n_rx=n, n_streams=n, n_subcarriers=k,
                architecture="DGC", realizations=1, geometry=geometry,
                schedule=ScheduleParams(t_max=30))
    base.update(overrides)
    return Scenario(**base).validate()


class Instance:
    """A random feasible point of the full pipeline for one scenario:
    channels, per-agent surface copies and responses, precoders, link states."""

    def __init__(self, scenario, seed=0, power_fill=1.0):
        self.sc = scenario
        self.groups = scenario.group_structure()
        self.freqs = scenario.frequencies()
        rng = np.random.default_rng(seed)
        self.rng = rng
        self.chan = channel.generate_channels(scenario, rng)
        lo, hi = scenario.circuit.c_min_pf, scenario.circuit.c_max_pf
        mt, n_g = self.groups.m_per_group, self.groups.n_groups
        self.caps = np.empty((scenario.n_bs, scenario.n_ris, n_g, mt, mt))
        self.perms = np.empty((scenario.n_bs, scenario.n_ris, scenario.n_elements),
                              dtype=int)
        for b in range(scenario.n_bs):
            for r in range(scenario.n_ris):
                for g in range(n_g):
                    draw = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo),
                                       size=(mt, mt))
                    self.caps[b, r, g] = 0.5 * (draw + draw.T)
                if scenario.optimize_permutation:
                    self.perms[b, r] = rng.permutation(scenario.n_elements)
                else:
                    self.perms[b, r] = np.arange(scenario.n_elements)
        shape = (scenario.n_bs, scenario.n_ue, scenario.n_subcarriers,
                 scenario.n_tx, scenario.n_streams)
        w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        for b in range(scenario.n_bs):
            w[b] *= np.sqrt(power_fill * scenario.p_max_w
                            / precoding.transmit_power(w[b]))
        self.w = w
        self.responses = [scattering.response_set(self.caps[b], self.perms[b],
                                                  self.freqs, scenario.circuit)
                          for b in range(scenario.n_bs)]
        self.refresh()

    def refresh(self):
        self.resp_by_owner = np.stack(
            [scattering.full_response_array(resp) for resp in self.responses])
        self.eff = channel.effective_channels(self.chan, self.resp_by_owner)
        self.ls = rate.link_state(self.eff, self.w, self.sc.noise_w)

    # --- evaluation closures for finite differences -------------------------

    def rate_for_caps(self, b, caps_b):
        """Agent b's sum rate as a function of its capacitance copy (others'
        links keep their own responses). Entries are independent variables, so
        asymmetric probe points are admitted."""
        responses_b = scattering.response_set(caps_b, self.perms[b], self.freqs,
                                              self.sc.circuit,
                                              require_symmetric=False)
        resp = self.resp_by_owner.copy()
        resp[b] = scattering.full_response_array(responses_b)
        eff = channel.effective_channels(self.chan, resp)
        return rate.sum_rate_from(eff, self.w, self.sc.noise_w)

    def rate_for_qmat(self, b, r, q_mat):
        """Agent b's sum rate with surface r's regrouping relaxed to a dense
        real matrix (continuous relaxation used by the permutation gradient)."""
        resp = self.resp_by_owner.copy()
        for k in range(self.sc.n_subcarriers):
            blocks = self.responses[b][r][k].blocks
            resp[b, r, k] = scattering.assemble_response_dense(blocks, q_mat)
        eff = channel.effective_channels(self.chan, resp)
        return rate.sum_rate_from(eff, self.w, self.sc.noise_w)

    def rate_for_w(self, w):
        return rate.sum_rate_from(self.eff, w, self.sc.noise_w)


def fd_gradient(fun, x, step, relative=False):
    """Central finite differences of a scalar function of a real array.

    relative=True scales the step by each entry's magnitude (spec'd probes use
    a relative step of the entry value).
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        h = step * abs(x[idx]) if relative and x[idx] != 0 else step
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (fun(xp) - fun(xm)) / (2.0 * h)
        it.iternext()
    return grad


def fd_gradient_complex(fun, x, step):
    """Central differences of a real function of a complex array, packed as
    (d/dRe + j d/dIm); equals twice the conjugate gradient."""
    grad = np.zeros_like(x, dtype=complex)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        for unit in (1.0, 1.0j):
            xp = x.copy()
            xm = x.copy()
            xp[idx] += step * unit
            xm[idx] -= step * unit
            d = (fun(xp) - fun(xm)) / (2.0 * step)
            grad[idx] += d * unit
        it.iternext()
    return grad
