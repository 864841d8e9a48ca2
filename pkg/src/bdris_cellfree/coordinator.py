"""Decentralized consensus-based stochastic SCA loop.

One iteration, executed by every BS agent on its local copies:

  S.1  per-agent best responses from the iteration-t snapshot: closed-form
       precoders under the power budget, capacitance candidate + alternating
       projections, permutation assignment solve; convex-combination updates
       with step alpha^t.
  (fresh noisy channel samples are drawn per agent)
  S.2  consensus mixing of the surface variables, permutation re-projection,
       gradient-tracker (Y, Pi) refresh at the new state.
  S.3  smoothed gradient accumulators D with step rho^{t+1}.

Stops when the relative change of the consensus-averaged sum rate (evaluated
on the true channels) drops below epsilon, or at t_max.

Everything is sequential and reduction order is fixed, so a (scenario, seed,
realization) triple fully determines the trace.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import capacitance, channel, network, permutation, precoding, rate, scattering

TRACE_SCHEMA_VERSION = 1
TRACE_COLUMNS = ("t", "sum_rate", "consensus_error", "alpha", "rho")

# rng substream tags (scenario.seed, realization, tag, ...)
_RNG_CHANNELS = 0
_RNG_CSI = 1
_RNG_INIT = 2
_RNG_ADAPTIVE = 3


def step_sizes(schedule, t):
    """(alpha^t, rho^t) of the outer loop; rho^0 = 1 overrides the power law."""
    return schedule.alpha(t), schedule.rho(t)


def convergence_check(prev_value, new_value, epsilon):
    """Relative-change stop rule; a zero new value counts as converged only if
    the previous value was zero too."""
    if new_value == 0.0:
        return prev_value == 0.0
    return abs((new_value - prev_value) / new_value) <= epsilon


@dataclass
class AgentState:
    """One BS's copies of the shared surface variables plus tracker state."""

    caps: np.ndarray            # (R, G, mt, mt) picofarads, symmetric, boxed
    perms: np.ndarray           # (R, M) int, Q[p[i], i] = 1
    y_c: np.ndarray
    pi_c: np.ndarray
    d_c: np.ndarray
    grad_c: np.ndarray          # local gradient at the current state/sample
    y_q: np.ndarray | None
    pi_q: np.ndarray | None
    d_q: np.ndarray | None
    grad_q: np.ndarray | None
    d_w: np.ndarray | None = None
    # caches at the current (state, sample) point
    responses: list = field(default_factory=list)
    chan: object = None
    eff: np.ndarray | None = None
    ls: object = None


@dataclass
class RunTrace:
    """Per-iteration log; row t describes the state after t iterations."""

    t: list = field(default_factory=list)
    sum_rate: list = field(default_factory=list)
    consensus_error: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    sum_rate_per_agent: list = field(default_factory=list)
    audit_power_ratio: list = field(default_factory=list)
    audit_box_violation_pf: list = field(default_factory=list)
    audit_symmetry_error_pf: list = field(default_factory=list)
    audit_perm_valid: list = field(default_factory=list)
    phase_seconds: dict = field(default_factory=lambda: {
        "sca": 0.0, "consensus": 0.0, "averaging": 0.0, "logging": 0.0})
    converged_at: int | None = None

    def n_rows(self):
        return len(self.t)

    def csv_lines(self):
        yield ",".join(TRACE_COLUMNS)
        for i in range(self.n_rows()):
            yield "%d,%.17g,%.17g,%.17g,%.17g" % (
                self.t[i], self.sum_rate[i], self.consensus_error[i],
                self.alpha[i], self.rho[i])

    def write_csv(self, path):
        with open(path, "w") as fh:
            for line in self.csv_lines():
                fh.write(line + "\n")


@dataclass
class RunResult:
    trace: RunTrace
    w: np.ndarray
    agents: list
    channels: channel.ChannelSet
    scenario: object

    @property
    def final_sum_rate(self):
        return self.trace.sum_rate[-1]


def consensus_error(agents):
    """Norm of the stacked deviation of the agents' shared-variable copies
    (capacitances in pF, permutation-matrix entries) from their mean."""
    rows = []
    for ag in agents:
        parts = [ag.caps.ravel()]
        parts.extend(scattering.permutation_matrix(p).ravel() for p in ag.perms)
        rows.append(np.concatenate(parts))
    stacked = np.asarray(rows)
    # deviations relative to row 0: identical copies give an exact zero
    rel = stacked - stacked[0]
    return float(np.linalg.norm(rel - rel.mean(axis=0)))


class DecentralizedDriver:
    """Runs the full loop for one channel realization."""

    def __init__(self, scenario, realization=0):
        scenario.validate()
        self.sc = scenario
        self.realization = int(realization)
        self.groups = scenario.group_structure()
        self.freqs = scenario.frequencies()
        self.cooperate = scenario.cooperation == "coop"
        rng = self._rng(_RNG_CHANNELS)
        self.channels = channel.generate_channels(scenario, rng)
        if scenario.topology == "adaptive":
            self.static_v = None
        else:
            adj = network.topology_adjacency(scenario.topology, scenario.n_bs)
            self.static_v = network.metropolis_weights(adj)
        self.trace = RunTrace()
        self._init_state()

    # ----- helpers -----------------------------------------------------------

    def _rng(self, tag, *extra):
        return np.random.default_rng([self.sc.seed, self.realization, tag, *extra])

    def _noisy(self, t, b):
        return channel.perturb_csi(self.channels, self.sc.csi_delta,
                                   self._rng(_RNG_CSI, t, b))

    def _owner_responses(self, agents):
        """(B, R, K, M, M) stack: link b' composed with owner b''s copy."""
        return np.stack([scattering.full_response_array(ag.responses)
                         for ag in agents])

    def _refresh_agent_eval(self, ag, resp_by_owner):
        ag.eff = channel.effective_channels(ag.chan, resp_by_owner)
        ag.ls = rate.link_state(ag.eff, self.w, self.sc.noise_w)

    def _local_gradients(self, ag, b):
        grad_c = capacitance.grad_caps_agent(
            ag.ls, ag.chan, self.w, ag.responses, ag.caps, self.freqs,
            self.sc.circuit, b, self.groups)
        if self.sc.optimize_permutation:
            grad_q = np.stack([
                permutation.grad_perm_agent(ag.ls, ag.chan, self.w, ag.responses, b, r)
                for r in range(self.sc.n_ris)])
        else:
            grad_q = None
        return grad_c, grad_q

    def _true_rate(self, ag):
        """Sum rate on the true channels if the network deployed this agent's
        surface configuration for every link."""
        resp = scattering.full_response_array(ag.responses)
        eff = channel.effective_channels(self.channels, resp)
        return rate.sum_rate_from(eff, self.w, self.sc.noise_w)

    # ----- initialization -----------------------------------------------------

    def _init_state(self):
        sc = self.sc
        rng = self._rng(_RNG_INIT)
        shape = (sc.n_bs, sc.n_ue, sc.n_subcarriers, sc.n_tx, sc.n_streams)
        w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        for b in range(sc.n_bs):
            w[b] *= np.sqrt(sc.p_max_w / precoding.transmit_power(w[b]))
        self.w = w

        lo, hi = sc.circuit.c_min_pf, sc.circuit.c_max_pf
        mid, width = 0.5 * (lo + hi), hi - lo
        mt, n_g = self.groups.m_per_group, self.groups.n_groups
        self.agents = []
        for b in range(sc.n_bs):
            caps = np.empty((sc.n_ris, n_g, mt, mt))
            for r in range(sc.n_ris):
                for g in range(n_g):
                    bump = rng.uniform(-0.1, 0.1, size=(mt, mt)) * width
                    caps[r, g] = mid + capacitance.mirror_upper(bump)
            perms = np.empty((sc.n_ris, sc.n_elements), dtype=int)
            for r in range(sc.n_ris):
                if sc.optimize_permutation:
                    perms[r] = rng.permutation(sc.n_elements)
                else:
                    perms[r] = scattering.identity_permutation(sc.n_elements)
            self.agents.append(AgentState(
                caps=caps, perms=perms, y_c=None, pi_c=None, d_c=None,
                grad_c=None, y_q=None, pi_q=None, d_q=None, grad_q=None))

        n_bs = sc.n_bs
        for b, ag in enumerate(self.agents):
            ag.responses = scattering.response_set(ag.caps, ag.perms, self.freqs,
                                                   sc.circuit)
            ag.chan = self._noisy(0, b)
        resp_by_owner = self._owner_responses(self.agents)
        for b, ag in enumerate(self.agents):
            self._refresh_agent_eval(ag, resp_by_owner)
            grad_c, grad_q = self._local_gradients(ag, b)
            ag.grad_c = grad_c
            ag.y_c = grad_c.copy()
            ag.pi_c = (n_bs - 1) * grad_c if self.cooperate else np.zeros_like(grad_c)
            ag.d_c = n_bs * grad_c if self.cooperate else grad_c.copy()
            if grad_q is not None:
                ag.grad_q = grad_q
                ag.y_q = grad_q.copy()
                ag.pi_q = (n_bs - 1) * grad_q if self.cooperate \
                    else np.zeros_like(grad_q)
                ag.d_q = n_bs * grad_q if self.cooperate else grad_q.copy()
        self._log_row(0, *step_sizes(sc.schedule, 0))

    # ----- one iteration -------------------------------------------------------

    def iterate(self, t):
        sc = self.sc
        agents = self.agents
        n_bs = sc.n_bs
        alpha, rho = step_sizes(sc.schedule, t)
        tau = sc.tau
        lo, hi = sc.circuit.c_min_pf, sc.circuit.c_max_pf

        tic = time.perf_counter()
        # --- S.1: per-agent best responses from the t-snapshot
        w_next = self.w.copy()
        c_breve = np.empty((n_bs,) + agents[0].caps.shape)
        if sc.optimize_permutation:
            q_breve = np.empty((n_bs, sc.n_ris, sc.n_elements, sc.n_elements))
        for b, ag in enumerate(agents):
            if self.cooperate:
                pi_w = precoding.pricing_w(ag.ls, ag.eff, b)
            else:
                pi_w = np.zeros_like(self.w[b])
            gw = precoding.grad_rate_w(ag.ls, ag.eff, b)
            prev_dw = ag.d_w if ag.d_w is not None else 0.0
            ag.d_w = (1.0 - rho) * prev_dw + rho * (pi_w + gw)
            e_mat, j_mat = precoding.precoder_blocks(
                ag.ls, ag.eff, b, self.w[b], pi_w, ag.d_w, rho, tau)
            _, w_hat = precoding.precoder_update(e_mat, j_mat, sc.p_max_w)
            w_new = (1.0 - alpha) * self.w[b] + alpha * w_hat
            pw = precoding.transmit_power(w_new)
            if pw > sc.p_max_w:  # floating dust only; the ball is convex
                w_new *= np.sqrt(sc.p_max_w / pw)
            w_next[b] = w_new

            cand = capacitance.candidate_caps(ag.caps, ag.grad_c, ag.pi_c,
                                              ag.d_c, tau, rho)
            c_hat = np.empty_like(cand)
            for r in range(sc.n_ris):
                for g in range(self.groups.n_groups):
                    c_hat[r, g] = capacitance.dykstra_project(cand[r, g], lo, hi)
            c_breve[b] = (1.0 - alpha) * ag.caps + alpha * c_hat

            if sc.optimize_permutation:
                for r in range(sc.n_ris):
                    cost = permutation.perm_objective_cost(
                        ag.perms[r], ag.grad_q[r], ag.pi_q[r], ag.d_q[r], tau, rho)
                    p_hat = permutation.lsap_solve(cost)
                    q_breve[b, r] = ((1.0 - alpha)
                                     * scattering.permutation_matrix(ag.perms[r])
                                     + alpha * scattering.permutation_matrix(p_hat))
        self.trace.phase_seconds["sca"] += time.perf_counter() - tic

        # fresh noisy samples for the next state
        for b, ag in enumerate(agents):
            ag.chan = self._noisy(t + 1, b)

        tic = time.perf_counter()
        # --- mixing matrix for this exchange
        if self.static_v is not None:
            v_net = self.static_v
        else:
            resp_by_owner = self._owner_responses(agents)
            eff_true = channel.effective_channels(self.channels, resp_by_owner)
            adj = network.adaptive_adjacency(eff_true, self._rng(_RNG_ADAPTIVE, t))
            v_net = network.metropolis_weights(adj)

        # --- S.2: consensus mixing + permutation re-projection
        c_mixed = network.mix(c_breve, v_net)
        for b, ag in enumerate(agents):
            caps = np.clip(c_mixed[b], lo, hi)  # convex hull; clip removes dust
            for r in range(sc.n_ris):
                for g in range(self.groups.n_groups):
                    caps[r, g] = capacitance.mirror_upper(caps[r, g])
            ag.caps = caps
        if sc.optimize_permutation:
            q_mixed = network.mix(q_breve, v_net)
            for b, ag in enumerate(agents):
                for r in range(sc.n_ris):
                    ag.perms[r] = permutation.project_permutation(q_mixed[b, r])

        # --- state refresh at (W^{t+1}, C^{t+1}, Q^{t+1}) with eta^{t+1}
        self.w = w_next
        for ag in agents:
            ag.responses = scattering.response_set(ag.caps, ag.perms, self.freqs,
                                                   sc.circuit)
        resp_by_owner = self._owner_responses(agents)
        for ag in agents:
            self._refresh_agent_eval(ag, resp_by_owner)

        grad_c_new = []
        grad_q_new = []
        for b, ag in enumerate(agents):
            gc, gq = self._local_gradients(ag, b)
            grad_c_new.append(gc)
            grad_q_new.append(gq)

        rho_next = sc.schedule.rho(t + 1)
        if self.cooperate:
            y_c = network.gradient_tracking_step(
                np.stack([ag.y_c for ag in agents]), v_net,
                np.stack(grad_c_new), np.stack([ag.grad_c for ag in agents]))
            for b, ag in enumerate(agents):
                ag.y_c = y_c[b]
                ag.pi_c = n_bs * y_c[b] - grad_c_new[b]
                ag.d_c = (1.0 - rho_next) * ag.d_c + rho_next * n_bs * y_c[b]
            if sc.optimize_permutation:
                y_q = network.gradient_tracking_step(
                    np.stack([ag.y_q for ag in agents]), v_net,
                    np.stack(grad_q_new), np.stack([ag.grad_q for ag in agents]))
                for b, ag in enumerate(agents):
                    ag.y_q = y_q[b]
                    ag.pi_q = n_bs * y_q[b] - grad_q_new[b]
                    ag.d_q = (1.0 - rho_next) * ag.d_q + rho_next * n_bs * y_q[b]
        else:
            for b, ag in enumerate(agents):
                ag.d_c = (1.0 - rho_next) * ag.d_c + rho_next * grad_c_new[b]
                if sc.optimize_permutation:
                    ag.d_q = (1.0 - rho_next) * ag.d_q + rho_next * grad_q_new[b]
        for b, ag in enumerate(agents):
            ag.grad_c = grad_c_new[b]
            if sc.optimize_permutation:
                ag.grad_q = grad_q_new[b]
        self.trace.phase_seconds["consensus"] += time.perf_counter() - tic

        self._log_row(t + 1, alpha, rho)

    # ----- logging -------------------------------------------------------------

    def _log_row(self, t, alpha, rho):
        tic = time.perf_counter()
        sc = self.sc
        per_agent = tuple(self._true_rate(ag) for ag in self.agents)
        tr = self.trace
        tr.t.append(t)
        tr.sum_rate.append(float(np.mean(per_agent)))
        tr.sum_rate_per_agent.append(per_agent)
        tr.consensus_error.append(consensus_error(self.agents))
        tr.alpha.append(alpha)
        tr.rho.append(rho)
        lo, hi = sc.circuit.c_min_pf, sc.circuit.c_max_pf
        power_ratio = max(precoding.transmit_power(self.w[b]) / sc.p_max_w
                          for b in range(sc.n_bs))
        box = 0.0
        sym = 0.0
        perm_ok = True
        for ag in self.agents:
            box = max(box, float(np.maximum(lo - ag.caps, 0.0).max()),
                      float(np.maximum(ag.caps - hi, 0.0).max()))
            sym = max(sym, float(np.abs(ag.caps - np.swapaxes(ag.caps, -1, -2)).max()))
            perm_ok = perm_ok and all(
                scattering.is_permutation(p, sc.n_elements) for p in ag.perms)
        tr.audit_power_ratio.append(power_ratio)
        tr.audit_box_violation_pf.append(box)
        tr.audit_symmetry_error_pf.append(sym)
        tr.audit_perm_valid.append(perm_ok)
        tr.phase_seconds["logging"] += time.perf_counter() - tic

    # ----- main loop -------------------------------------------------------------

    def run(self):
        sched = self.sc.schedule
        for t in range(sched.t_max):
            self.iterate(t)
            if convergence_check(self.trace.sum_rate[-2], self.trace.sum_rate[-1],
                                 sched.epsilon):
                self.trace.converged_at = t + 1
                break
        return RunResult(trace=self.trace, w=self.w, agents=self.agents,
                         channels=self.channels, scenario=self.sc)


def run_realization(scenario, realization=0):
    """Run the full loop for one channel realization; deterministic in
    (scenario, scenario.seed, realization)."""
    return DecentralizedDriver(scenario, realization).run()
