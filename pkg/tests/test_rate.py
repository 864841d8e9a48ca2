"""Rate model: link matrices, per-user rates, identities, invariances."""
import numpy as np
import pytest

from bdris_cellfree import rate
from bdris_cellfree.errors import ConditioningError
from support import Instance, small_scenario


def naive_link_matrices(eff, w, noise_w, u, k):
    """Independent plain-loop reimplementation (inv instead of solves)."""
    n_bs, n_ue = eff.shape[0], eff.shape[1]
    n_rx, n_streams = eff.shape[3], w.shape[4]
    s = {}
    for q in range(n_ue):
        acc = np.zeros((n_rx, n_streams), dtype=complex)
        for b in range(n_bs):
            acc = acc + eff[b, u, k] @ w[b, q, k]
        s[q] = acc
    p = noise_w * np.eye(n_rx, dtype=complex)
    for q in range(n_ue):
        if q != u:
            p = p + s[q] @ s[q].conj().T
    k_mat = np.eye(n_streams) + s[u].conj().T @ np.linalg.inv(p) @ s[u]
    t_mat = s[u] @ s[u].conj().T + p
    l_mat = np.eye(n_streams) - s[u].conj().T @ np.linalg.inv(t_mat) @ s[u]
    return s, p, k_mat, t_mat, l_mat


@pytest.fixture(scope="module")
def inst():
    return Instance(small_scenario(), seed=5)


class TestLinkState:
    def test_matches_naive_reimplementation(self, inst):
        ls = inst.ls
        for u in range(inst.sc.n_ue):
            for k in range(inst.sc.n_subcarriers):
                s, p, k_mat, t_mat, l_mat = naive_link_matrices(
                    inst.eff, inst.w, inst.sc.noise_w, u, k)
                scale = np.max(np.abs(k_mat))
                assert np.max(np.abs(ls.p_mat[u, k] - p)) < 1e-10 * np.max(np.abs(p))
                assert np.max(np.abs(ls.k_mat[u, k] - k_mat)) < 1e-10 * scale
                assert np.max(np.abs(ls.t_mat[u, k] - t_mat)) < 1e-10 * np.max(np.abs(t_mat))
                assert np.max(np.abs(ls.l_mat[u, k] - l_mat)) < 1e-10

    def test_single_user_interference_free(self):
        inst1 = Instance(small_scenario(n_ue=1), seed=1)
        p = inst1.ls.p_mat
        eye = inst1.sc.noise_w * np.eye(inst1.sc.n_rx)
        assert np.max(np.abs(p - eye)) < 1e-20

    def test_zero_precoders(self, inst):
        w0 = np.zeros_like(inst.w)
        ls = rate.link_state(inst.eff, w0, inst.sc.noise_w)
        assert np.max(np.abs(ls.s)) == 0
        assert np.allclose(ls.k_mat, np.eye(inst.sc.n_streams), atol=1e-15)
        assert np.allclose(ls.l_mat, np.eye(inst.sc.n_streams), atol=1e-15)
        assert rate.sum_rate(ls) == 0

    def test_rejects_nonfinite(self, inst):
        bad = inst.w.copy()
        bad[0, 0, 0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            rate.link_state(inst.eff, bad, inst.sc.noise_w)

    def test_hermitian_positive_definite(self, inst):
        ls = inst.ls
        for mat in (ls.p_mat, ls.t_mat, ls.k_mat, ls.l_mat):
            assert np.allclose(mat, np.conj(np.swapaxes(mat, -1, -2)), atol=1e-14)
            assert np.all(np.linalg.eigvalsh(mat.reshape(-1, *mat.shape[-2:])) > 0)


class TestRates:
    def test_logdet_identity(self, inst):
        for u in range(inst.sc.n_ue):
            ru = rate.user_rate(inst.ls, u)
            assert abs(ru - rate.user_rate_l_form(inst.ls, u)) < 1e-9

    def test_scalar_unit_snr_is_one_bit(self):
        # N_r = N_s = 1, single user, |s|^2 / noise = 1 -> log2(2) per subcarrier
        eff = np.ones((1, 1, 1, 1, 1), dtype=complex)
        w = np.ones((1, 1, 1, 1, 1), dtype=complex)
        ls = rate.link_state(eff, w, 1.0)
        assert rate.user_rate(ls, 0) == pytest.approx(1.0, abs=1e-12)

    def test_sum_rate_is_sum_of_users(self, inst):
        total = sum(rate.user_rate(inst.ls, u) for u in range(inst.sc.n_ue))
        assert rate.sum_rate(inst.ls) == pytest.approx(total, rel=1e-12)

    def test_symmetric_users_equal_share(self):
        # duplicate the same channel for both users: equal rates by symmetry
        inst1 = Instance(small_scenario(), seed=9)
        eff = inst1.eff.copy()
        eff[:, 1] = eff[:, 0]
        w = inst1.w.copy()
        w[:, 1] = w[:, 0]
        ls = rate.link_state(eff, w, inst1.sc.noise_w)
        assert rate.user_rate(ls, 0) == pytest.approx(rate.user_rate(ls, 1),
                                                      rel=1e-9)

    def test_noise_increase_decreases_rate(self, inst):
        low = rate.sum_rate_from(inst.eff, inst.w, inst.sc.noise_w)
        high = rate.sum_rate_from(inst.eff, inst.w, 2 * inst.sc.noise_w)
        assert high < low

    def test_nonnegative(self, inst):
        assert rate.sum_rate(inst.ls) >= 0

    def test_unitary_stream_rotation_invariance(self, inst):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        v_unitary, _ = np.linalg.qr(z)
        w2 = inst.w.copy()
        for b in range(inst.sc.n_bs):
            for k in range(inst.sc.n_subcarriers):
                w2[b, 0, k] = w2[b, 0, k] @ v_unitary
        ls2 = rate.link_state(inst.eff, w2, inst.sc.noise_w)
        for u in range(inst.sc.n_ue):
            assert rate.user_rate(ls2, u) == pytest.approx(
                rate.user_rate(inst.ls, u), abs=1e-9)

    def test_cheap_path_matches_link_state(self, inst):
        assert rate.sum_rate_from(inst.eff, inst.w, inst.sc.noise_w) == \
            pytest.approx(rate.sum_rate(inst.ls), rel=1e-12)

    def test_cholesky_failure_raises(self):
        with pytest.raises(ConditioningError):
            rate._logdet2(np.array([[-1.0 + 0j]]))
