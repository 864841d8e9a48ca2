"""Scenario configuration.

All physical quantities are stored in SI units and the field names carry the
unit suffix (``fc_hz``, ``p_max_dbm``, ``l1_h``, ...) so that no silent unit
conversion can creep in. dBm -> watt conversions happen once, at access time,
through the ``*_w`` properties.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

ARCHITECTURES = ("FC", "GC", "DGC", "D")
COOPERATION_MODES = ("coop", "pi_zero")
TOPOLOGIES = ("complete", "ring", "path", "adaptive")

CONFIG_SCHEMA_VERSION = 1


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class CircuitParams:
    """Per-element resonant circuit of a surface: series R0-L2-C tunable branch
    with an L1 inductor in parallel, shared by intra-group interconnections."""

    r0_ohm: float = 1.0
    l1_h: float = 2.5e-9
    l2_h: float = 0.7e-9
    psi0_s: float = 1.0 / 50.0
    c_min_f: float = 0.2e-12
    c_max_f: float = 3.0e-12

    def validate(self):
        if self.r0_ohm < 0:
            raise ConfigError("r0_ohm must be >= 0")
        if self.l1_h <= 0 or self.l2_h <= 0:
            raise ConfigError("l1_h and l2_h must be > 0")
        if self.psi0_s <= 0:
            raise ConfigError("psi0_s must be > 0")
        if not (0 < self.c_min_f < self.c_max_f):
            raise ConfigError("require 0 < c_min_f < c_max_f")

    @property
    def c_min_pf(self):
        return self.c_min_f * 1e12

    @property
    def c_max_pf(self):
        return self.c_max_f * 1e12


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the M surface elements into G equally sized groups."""

    m_total: int
    n_groups: int

    def validate(self):
        if self.m_total < 1 or self.n_groups < 1:
            raise ConfigError("m_total and n_groups must be >= 1")
        if self.m_total % self.n_groups != 0:
            raise ConfigError(
                f"m_total ({self.m_total}) must be divisible by n_groups ({self.n_groups})"
            )

    @property
    def m_per_group(self):
        return self.m_total // self.n_groups

    def block(self, g):
        """Sequential index range of group g (before any regrouping permutation)."""
        mt = self.m_per_group
        return np.arange(g * mt, (g + 1) * mt)


@dataclass(frozen=True)
class PathlossModel:
    """Distance pathloss PL(d) = PL0 * (d/d0)^(-alpha), PL0 given in dB."""

    pl0_db: float = -30.0
    d0_m: float = 1.0
    exp_bs_ue: float = 3.8
    exp_bs_ris: float = 2.4
    exp_ris_ue: float = 2.2

    def validate(self):
        for name in ("exp_bs_ue", "exp_bs_ris", "exp_ris_ue"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.d0_m <= 0:
            raise ConfigError("d0_m must be > 0")

    def gain(self, dist_m, exponent):
        """Linear power gain (= per-entry channel variance) at distance dist_m."""
        pl0 = 10.0 ** (self.pl0_db / 10.0)
        return pl0 * (np.asarray(dist_m) / self.d0_m) ** (-exponent)


@dataclass(frozen=True)
class Geometry:
    """3D node placement; user positions are re-drawn per realization from
    uniform discs around the cluster centers."""

    bs_xyz: tuple
    ris_xyz: tuple
    cluster_xy: tuple
    cluster_radius_m: float = 2.0
    ue_height_m: float = 1.5

    def validate(self, n_bs, n_ris):
        if len(self.bs_xyz) != n_bs:
            raise ConfigError(f"bs_xyz must list {n_bs} positions, got {len(self.bs_xyz)}")
        if len(self.ris_xyz) != n_ris:
            raise ConfigError(f"ris_xyz must list {n_ris} positions, got {len(self.ris_xyz)}")
        if len(self.cluster_xy) < 1:
            raise ConfigError("cluster_xy must list at least one cluster center")
        if self.cluster_radius_m <= 0:
            raise ConfigError("cluster_radius_m must be > 0")

    def bs_array(self):
        return np.asarray(self.bs_xyz, dtype=float)

    def ris_array(self):
        return np.asarray(self.ris_xyz, dtype=float)


def default_geometry(n_bs, n_ris):
    """Reference layout: BSs on a 50 m grid along the x-axis at 5 m height,
    surfaces elevated near the two user clusters."""
    bs = tuple((50.0 * b, 0.0, 5.0) for b in range(n_bs))
    ris = tuple((65.0 + 20.0 * r, 60.0, 6.0) for r in range(n_ris))
    clusters = ((67.5, 57.5), (82.5, 57.5))
    return Geometry(bs_xyz=bs, ris_xyz=ris, cluster_xy=clusters)


@dataclass(frozen=True)
class ScheduleParams:
    """Step-size schedules and stopping rule of the outer loop.

    alpha^t = (t+2)^-alpha_exponent, rho^t = (t+2)^-rho_exponent with rho^0 = 1.
    tau = None defers to the per-architecture default.
    """

    alpha_exponent: float = 0.61
    rho_exponent: float = 0.60
    tau: float | None = None
    epsilon: float = 1e-3
    t_max: int = 100

    def validate(self):
        if not (0 < self.alpha_exponent <= 1) or not (0 < self.rho_exponent <= 1):
            raise ConfigError("alpha_exponent and rho_exponent must lie in (0, 1]")
        if self.alpha_exponent <= self.rho_exponent:
            raise ConfigError(
                "alpha_exponent must exceed rho_exponent (alpha^t/rho^t must vanish)"
            )
        if self.tau is not None and self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")

    def alpha(self, t):
        return float((t + 2) ** (-self.alpha_exponent))

    def rho(self, t):
        if t == 0:
            return 1.0
        return float((t + 2) ** (-self.rho_exponent))


# Proximal weight per interconnection architecture (tau for DGC/FC is the base value).
TAU_BY_ARCHITECTURE = {"FC": 1e-2, "DGC": 1e-2, "GC": 4e-2, "D": 5e-2}


@dataclass(frozen=True)
class Scenario:
    """One full experiment description. Defaults reproduce the reference
    4-BS / 4-UE / 2-surface wideband setup."""

    n_bs: int = 4
    n_ue: int = 4
    n_ris: int = 2
    n_elements: int = 64
    n_groups: int = 4
    n_tx: int = 2
    n_rx: int = 2
    n_streams: int = 2
    n_subcarriers: int = 32
    fc_hz: float = 2.4e9
    bw_hz: float = 300e6
    p_max_dbm: float = 35.0
    noise_dbm: float = -80.0
    csi_delta: float = 0.2
    architecture: str = "DGC"
    cooperation: str = "coop"
    topology: str = "complete"
    realizations: int = 100
    seed: int = 0
    circuit: CircuitParams = field(default_factory=CircuitParams)
    pathloss: PathlossModel = field(default_factory=PathlossModel)
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    geometry: Geometry | None = None

    # ----- derived quantities -------------------------------------------------

    @property
    def p_max_w(self):
        return dbm_to_watt(self.p_max_dbm)

    @property
    def noise_w(self):
        return dbm_to_watt(self.noise_dbm)

    @property
    def optimize_permutation(self):
        """Only the dynamic grouping architecture tunes the regrouping permutation."""
        return self.architecture == "DGC"

    @property
    def tau(self):
        if self.schedule.tau is not None:
            return self.schedule.tau
        return TAU_BY_ARCHITECTURE[self.architecture]

    def group_structure(self):
        """G resolved by architecture: FC is one full group, D is all 1x1 groups."""
        if self.architecture == "FC":
            g = 1
        elif self.architecture == "D":
            g = self.n_elements
        else:
            g = self.n_groups
        return GroupStructure(m_total=self.n_elements, n_groups=g)

    def frequencies(self):
        from .channel import subcarrier_frequencies

        return subcarrier_frequencies(self.fc_hz, self.bw_hz, self.n_subcarriers)

    def resolved_geometry(self):
        if self.geometry is not None:
            return self.geometry
        return default_geometry(self.n_bs, self.n_ris)

    # ----- validation ---------------------------------------------------------

    def validate(self):
        for name in ("n_bs", "n_ue", "n_ris", "n_tx", "n_rx", "n_streams",
                     "n_subcarriers", "realizations"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_streams > min(self.n_tx, self.n_rx):
            raise ConfigError("n_streams must not exceed min(n_tx, n_rx)")
        if self.bw_hz <= 0 or self.fc_hz <= 0:
            raise ConfigError("fc_hz and bw_hz must be > 0")
        if self.csi_delta < 0:
            raise ConfigError("csi_delta must be >= 0")
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        if self.cooperation not in COOPERATION_MODES:
            raise ConfigError(f"cooperation must be one of {COOPERATION_MODES}")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology must be one of {TOPOLOGIES}")
        if self.topology == "adaptive" and self.n_ue < self.n_bs:
            raise ConfigError("adaptive topology requires n_ue >= n_bs")
        gs = self.group_structure()
        gs.validate()
        if self.architecture in ("GC", "DGC") and not (1 < gs.n_groups < gs.m_total):
            raise ConfigError(
                "n_groups must satisfy 1 < n_groups < n_elements for GC/DGC"
            )
        self.circuit.validate()
        self.pathloss.validate()
        self.schedule.validate()
        self.resolved_geometry().validate(self.n_bs, self.n_ris)
        if self.fc_hz - self.bw_hz / 2 <= 0:
            raise ConfigError("bw_hz too large: non-positive subcarrier frequencies")
        return self

    # ----- (de)serialization ----------------------------------------------------

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["schema_version"] = CONFIG_SCHEMA_VERSION
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("schema_version", None)
        try:
            for key, sub in (("circuit", CircuitParams), ("pathloss", PathlossModel),
                             ("schedule", ScheduleParams)):
                if key in d and isinstance(d[key], dict):
                    d[key] = sub(**d[key])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        geo = d.get("geometry")
        if isinstance(geo, dict):
            geo = dict(geo)
            for key in ("bs_xyz", "ris_xyz", "cluster_xy"):
                if key in geo:
                    geo[key] = tuple(tuple(p) for p in geo[key])
            try:
                d["geometry"] = Geometry(**geo)
            except TypeError as exc:
                raise ConfigError(f"geometry: {exc}") from exc
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"unparseable config file {path}: {exc}") from exc
        return cls.from_dict(data)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def desk_scenario(**overrides):
    """Small configuration that exercises every code path in seconds."""
    base = dict(
        n_bs=2, n_ue=2, n_ris=1, n_elements=8, n_groups=2,
        n_tx=2, n_rx=2, n_streams=2, n_subcarriers=4,
        realizations=10,
        geometry=Geometry(
            bs_xyz=((0.0, 0.0, 5.0), (50.0, 0.0, 5.0)),
            ris_xyz=((65.0, 60.0, 6.0),),
            cluster_xy=((67.5, 57.5), (82.5, 57.5)),
        ),
    )
    base.update(overrides)
    return Scenario(**base)
