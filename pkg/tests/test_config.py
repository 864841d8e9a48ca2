"""Scenario validation, defaults, serialization roundtrip."""
import numpy as np
import pytest

from bdris_cellfree.config import (CircuitParams, Scenario, ScheduleParams,
                                   dbm_to_watt, desk_scenario)
from bdris_cellfree.errors import ConfigError


class TestDefaults:
    def test_reference_parameter_set(self):
        sc = Scenario()
        assert (sc.n_bs, sc.n_ue, sc.n_ris) == (4, 4, 2)
        assert (sc.n_elements, sc.n_groups) == (64, 4)
        assert (sc.n_tx, sc.n_rx) == (2, 2)
        assert sc.n_subcarriers == 32
        assert sc.fc_hz == 2.4e9 and sc.bw_hz == 300e6
        assert sc.noise_dbm == -80.0
        assert sc.csi_delta == 0.2
        assert sc.realizations == 100
        c = sc.circuit
        assert (c.l1_h, c.l2_h, c.r0_ohm) == (2.5e-9, 0.7e-9, 1.0)
        assert c.psi0_s == 1.0 / 50.0
        assert (c.c_min_f, c.c_max_f) == (0.2e-12, 3.0e-12)
        p = sc.pathloss
        assert (p.pl0_db, p.d0_m) == (-30.0, 1.0)
        assert (p.exp_bs_ue, p.exp_bs_ris, p.exp_ris_ue) == (3.8, 2.4, 2.2)
        s = sc.schedule
        assert (s.alpha_exponent, s.rho_exponent) == (0.61, 0.60)
        assert (s.epsilon, s.t_max) == (1e-3, 100)
        sc.validate()

    def test_power_conversions(self):
        assert dbm_to_watt(35.0) == pytest.approx(10 ** 0.5)
        assert Scenario(noise_dbm=-80.0).noise_w == pytest.approx(1e-11)

    def test_tau_per_architecture(self):
        assert Scenario(architecture="FC", n_groups=4).tau == 1e-2
        assert Scenario(architecture="DGC").tau == 1e-2
        assert Scenario(architecture="GC").tau == 4e-2
        assert Scenario(architecture="D").tau == 5e-2
        explicit = Scenario(schedule=ScheduleParams(tau=7e-2))
        assert explicit.tau == 7e-2

    def test_group_resolution(self):
        assert Scenario(architecture="FC").group_structure().n_groups == 1
        assert Scenario(architecture="D").group_structure().n_groups == 64
        assert Scenario(architecture="DGC").group_structure().n_groups == 4


class TestValidation:
    def test_divisibility_error_names_field(self):
        with pytest.raises(ConfigError, match="n_groups"):
            desk_scenario(n_elements=8, n_groups=3).validate()

    def test_schedule_exponent_ordering(self):
        with pytest.raises(ConfigError, match="alpha_exponent"):
            ScheduleParams(alpha_exponent=0.5, rho_exponent=0.6).validate()

    def test_circuit_bounds(self):
        with pytest.raises(ConfigError):
            CircuitParams(c_min_f=3e-12, c_max_f=0.2e-12).validate()

    def test_adaptive_needs_users(self):
        with pytest.raises(ConfigError, match="n_ue >= n_bs"):
            desk_scenario(n_bs=2, n_ue=1, topology="adaptive").validate()

    def test_streams_bound(self):
        with pytest.raises(ConfigError, match="n_streams"):
            desk_scenario(n_streams=3).validate()

    def test_gc_group_count_range(self):
        with pytest.raises(ConfigError):
            desk_scenario(architecture="GC", n_groups=8).validate()


class TestSchedule:
    def test_rho_zero_override(self):
        s = ScheduleParams()
        assert s.rho(0) == 1.0
        assert s.rho(1) == pytest.approx(3 ** -0.6)

    def test_alpha_frozen_value(self):
        # alpha at t = 2: 4^-0.61, frozen from a 50-digit evaluation
        assert ScheduleParams().alpha(2) == pytest.approx(
            0.42928271821887688417, rel=1e-15)

    def test_ratio_vanishes(self):
        s = ScheduleParams()
        ratios = [s.alpha(t) / s.rho(t) for t in (1, 10, 100, 1000)]
        assert all(a > b for a, b in zip(ratios, ratios[1:]))


class TestSerialization:
    def test_roundtrip_semantic_equality(self, tmp_path):
        sc = desk_scenario(seed=7, architecture="GC", topology="ring")
        path = tmp_path / "scenario.json"
        sc.save(path)
        loaded = Scenario.load(path)
        assert loaded == sc

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n_bs": 2, "bogus_field": 1}')
        with pytest.raises(ConfigError, match="bogus_field"):
            Scenario.load(path)

    def test_unparseable_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            Scenario.load(path)
