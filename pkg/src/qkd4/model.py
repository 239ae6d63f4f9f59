"""Probability model of a polarization + transverse-spatial hyperentangled pair.

The polarization part is the state |phi-> = (|HH> - |VV>)/sqrt(2) mixed with
the classically correlated HV mixture; the spatial part is a pair of
two-outcome correlations (position X, momentum P) with independent
visibilities. The two degrees of freedom factorize, and a background fraction
mixes the resulting 16-entry table with uniform noise.

Conventions used everywhere in the package:

==========  =========================================================
pol bit 0   first analyzer port (H for HV, + i.e. 45 deg for DA)
pol bit 1   second port (V, or - i.e. 135 deg)
spa bit 0   detector index 1 (X1 or P1)
spa bit 1   detector index 2 (X2 or P2)
==========  =========================================================

Momentum is physically anti-correlated. Detector labels are assigned so that
matched indices coincide (A_p1 sits opposite B_p1), so in outcome space both
spatial bases show correlations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

PHI_MINUS = "phi-"


class PolBasis(enum.Enum):
    HV = "HV"
    DA = "DA"

    @property
    def angle(self) -> float:
        """Orientation of the first analyzer port, in degrees."""
        return 0.0 if self is PolBasis.HV else 45.0


class SpatialBasis(enum.Enum):
    X = "X"
    P = "P"


@dataclass(frozen=True)
class AnalyzerAngle:
    """Linear polarization analyzer orientation, normalized to [0, 180)."""

    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise DomainError(f"analyzer angle must be finite, got {self.theta}")
        object.__setattr__(self, "theta", float(self.theta) % 180.0)

    def port(self, bit: int) -> float:
        return self.theta + 90.0 * bit


def _deg(theta) -> float:
    if isinstance(theta, AnalyzerAngle):
        return theta.theta
    theta = float(theta)
    if not math.isfinite(theta):
        raise DomainError(f"analyzer angle must be finite, got {theta}")
    return theta


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_bit(name: str, value: int) -> int:
    if value not in (0, 1):
        raise DomainError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class PolarizationModel:
    v_pol: float = 1.0
    state_id: str = field(default=PHI_MINUS, init=False)

    def __post_init__(self):
        object.__setattr__(self, "v_pol", _check_unit("v_pol", self.v_pol))

    def density_matrix(self) -> np.ndarray:
        """4x4 density operator in the |HH>, |HV>, |VH>, |VV> basis."""
        v = self.v_pol
        phi = np.array([1.0, 0.0, 0.0, -1.0]) / math.sqrt(2.0)
        mixed = np.diag([0.5, 0.0, 0.0, 0.5])
        return v * np.outer(phi, phi) + (1.0 - v) * mixed


@dataclass(frozen=True)
class SpatialModel:
    # 0.95 is a placeholder; no numeric spatial visibility is measured.
    v_x: float = 0.95
    v_p: float = 0.95
    label_convention: str = field(default="matched-indices-coincide", init=False)

    def __post_init__(self):
        object.__setattr__(self, "v_x", _check_unit("v_x", self.v_x))
        object.__setattr__(self, "v_p", _check_unit("v_p", self.v_p))

    def visibility(self, basis: SpatialBasis) -> float:
        return self.v_x if basis is SpatialBasis.X else self.v_p


@dataclass(frozen=True)
class PairSource:
    pol: PolarizationModel = field(default_factory=PolarizationModel)
    spatial: SpatialModel = field(default_factory=SpatialModel)
    bg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bg", _check_unit("bg", self.bg))

    @classmethod
    def ideal(cls) -> "PairSource":
        return cls(PolarizationModel(1.0), SpatialModel(1.0, 1.0), 0.0)

    @classmethod
    def from_params(cls, v_pol=1.0, v_x=0.95, v_p=0.95, bg=0.0) -> "PairSource":
        return cls(PolarizationModel(v_pol), SpatialModel(v_x, v_p), bg)


@dataclass(frozen=True)
class MeasurementSetting:
    """One party's basis choice in both degrees of freedom."""

    pol_basis: PolBasis
    spatial_basis: SpatialBasis

    @property
    def angles(self) -> tuple[AnalyzerAngle, AnalyzerAngle]:
        a = self.pol_basis.angle
        return AnalyzerAngle(a), AnalyzerAngle(a + 90.0)

    @property
    def index(self) -> int:
        return 2 * (self.pol_basis is PolBasis.DA) + (self.spatial_basis is SpatialBasis.P)

    @property
    def code(self) -> str:
        return ("H" if self.pol_basis is PolBasis.HV else "D") + self.spatial_basis.value

    @classmethod
    def from_code(cls, code: str) -> "MeasurementSetting":
        try:
            return _BY_CODE[code]
        except KeyError:
            raise DomainError(f"unknown setting code {code!r}") from None

    @classmethod
    def from_index(cls, index: int) -> "MeasurementSetting":
        return ALL_SETTINGS[index]

    def __str__(self):
        return f"{self.pol_basis.value}x{self.spatial_basis.value}"


# Index order: pol basis is the high bit, spatial basis the low bit.
ALL_SETTINGS = tuple(
    MeasurementSetting(p, s) for p in (PolBasis.HV, PolBasis.DA) for s in (SpatialBasis.X, SpatialBasis.P)
)
_BY_CODE = {s.code: s for s in ALL_SETTINGS}
HX, HP, DX, DP = ALL_SETTINGS
ROMAN, GREEK = HX, DP


@dataclass(frozen=True)
class OutcomeDistribution:
    """Joint outcome probabilities, indexed ``table[a_pol, a_spa, b_pol, b_spa]``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float).reshape(2, 2, 2, 2)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __getitem__(self, key) -> float:
        return float(self.table[key])

    @property
    def flat(self) -> np.ndarray:
        """16 probabilities, outcome code ``4*alice + bob`` with code = 2*pol + spa."""
        return self.table.reshape(16)

    def alice_marginal(self) -> np.ndarray:
        return self.table.sum(axis=(2, 3))

    def bob_marginal(self) -> np.ndarray:
        return self.table.sum(axis=(0, 1))

    def pol_table(self) -> np.ndarray:
        return self.table.sum(axis=(1, 3))

    def spatial_table(self) -> np.ndarray:
        return self.table.sum(axis=(0, 2))

    def transposed(self) -> "OutcomeDistribution":
        return OutcomeDistribution(self.table.transpose(2, 3, 0, 1))


def pol_coincidence_prob(pol: PolarizationModel, thetaA, thetaB, a: int, b: int) -> float:
    """Probability that analyzer A fires port ``a`` and analyzer B fires port ``b``.

    Port 1 of an analyzer at theta is port 0 of one at theta + 90.
    """
    v = _check_unit("v_pol", pol.v_pol)
    ta = math.radians(_deg(thetaA) + 90.0 * _check_bit("a", a))
    tb = math.radians(_deg(thetaB) + 90.0 * _check_bit("b", b))
    ent = math.cos(ta + tb) ** 2
    mix = (math.cos(ta) * math.cos(tb)) ** 2 + (math.sin(ta) * math.sin(tb)) ** 2
    return (v * ent + (1.0 - v) * mix) / 2.0


def pol_table(pol: PolarizationModel, thetaA, thetaB) -> np.ndarray:
    return np.array([[pol_coincidence_prob(pol, thetaA, thetaB, a, b) for b in (0, 1)] for a in (0, 1)])


def _check_index(name: str, value: int) -> int:
    if value not in (1, 2):
        raise DomainError(f"{name} must be 1 or 2, got {value!r}")
    return int(value)


def spatial_joint_prob(spatial: SpatialModel, basisA: SpatialBasis, basisB: SpatialBasis, sA: int, sB: int) -> float:
    _check_index("sA", sA)
    _check_index("sB", sB)
    if basisA is not basisB:
        return 0.25
    v = spatial.visibility(basisA)
    return (1.0 + v) / 4.0 if sA == sB else (1.0 - v) / 4.0


def spatial_table(spatial: SpatialModel, basisA: SpatialBasis, basisB: SpatialBasis) -> np.ndarray:
    return np.array([[spatial_joint_prob(spatial, basisA, basisB, i, j) for j in (1, 2)] for i in (1, 2)])


def joint_outcome_distribution(
    source: PairSource, setA: MeasurementSetting, setB: MeasurementSetting
) -> OutcomeDistribution:
    pt = pol_table(source.pol, setA.pol_basis.angle, setB.pol_basis.angle)
    st = spatial_table(source.spatial, setA.spatial_basis, setB.spatial_basis)
    # axes (a_pol, b_pol) x (a_spa, b_spa) -> (a_pol, a_spa, b_pol, b_spa)
    table = np.einsum("ac,bd->abcd", pt, st)
    table = (1.0 - source.bg) * table + source.bg / 16.0
    return OutcomeDistribution(table)


@dataclass(frozen=True)
class ResentState:
    """Photon prepared by the eavesdropper: a pure linear polarization and a definite spatial index."""

    pol_angle: float
    spatial_basis: SpatialBasis
    spatial_index: int


@dataclass(frozen=True)
class AliceConditional:
    """Alice's photon after the partner photon was measured with ``eve_setting``."""

    source: PairSource
    eve_setting: MeasurementSetting
    eve_outcome: tuple[int, int]

    def distribution(self, setA: MeasurementSetting) -> np.ndarray:
        """2x2 table over Alice's (pol bit, spa bit) for her setting ``setA``."""
        joint = joint_outcome_distribution(self.source, setA, self.eve_setting).table
        cond = joint[:, :, self.eve_outcome[0], self.eve_outcome[1]]
        return cond / cond.sum()


@dataclass(frozen=True)
class Interception:
    eve_outcome: tuple[int, int]
    resent: ResentState
    alice_conditional: AliceConditional


def resend_state(eve_setting: MeasurementSetting, eve_outcome: tuple[int, int]) -> ResentState:
    pol_bit, spa_bit = eve_outcome
    return ResentState(
        pol_angle=eve_setting.pol_basis.angle + 90.0 * pol_bit,
        spatial_basis=eve_setting.spatial_basis,
        spatial_index=spa_bit + 1,
    )


def collapse_and_resend(source: PairSource, eve_setting: MeasurementSetting, rng: np.random.Generator) -> Interception:
    """Measure Bob's photon in ``eve_setting`` and prepare the eigenstate found.

    Eve's outcome follows Bob's single-party marginal; Alice's photon is left
    in the corresponding conditional state.
    """
    joint = joint_outcome_distribution(source, eve_setting, eve_setting)
    marginal = joint.bob_marginal().reshape(4)
    code = int(rng.choice(4, p=marginal / marginal.sum()))
    outcome = (code >> 1, code & 1)
    return Interception(
        eve_outcome=outcome,
        resent=resend_state(eve_setting, outcome),
        alice_conditional=AliceConditional(source, eve_setting, outcome),
    )


def measure_resent(resent: ResentState, setB: MeasurementSetting) -> np.ndarray:
    """2x2 table over Bob's (pol bit, spa bit) when measuring a resent photon."""
    delta = math.radians(setB.pol_basis.angle - resent.pol_angle)
    p0 = math.cos(delta) ** 2
    pol = np.array([p0, 1.0 - p0])
    if setB.spatial_basis is resent.spatial_basis:
        spa = np.zeros(2)
        spa[resent.spatial_index - 1] = 1.0
    else:
        spa = np.array([0.5, 0.5])
    return np.outer(pol, spa)
