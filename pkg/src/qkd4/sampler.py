"""Seeded sampling from the exact model, and figure-level reproductions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .adversary import NO_EVE, EveStrategy
from .errors import DomainError, FitError
from .model import (
    ALL_SETTINGS,
    AnalyzerAngle,
    MeasurementSetting,
    PairSource,
    SpatialBasis,
    joint_outcome_distribution,
    measure_resent,
    pol_table,
    resend_state,
)
from .protocols import ProtocolSpec


@dataclass(frozen=True)
class RoundRecord:
    round_id: int
    setA: MeasurementSetting
    setB: MeasurementSetting
    outcomeA: tuple[int, int]
    outcomeB: tuple[int, int]
    eve_touched: bool = False


def _cdf(probs) -> np.ndarray:
    cdf = np.cumsum(np.asarray(probs, dtype=float), axis=-1)
    cdf[..., -1] = 1.0
    return cdf


def _code_to_bits(code: int) -> tuple[int, int]:
    return (code >> 1) & 1, code & 1


def sample_round(source: PairSource, setA, setB, rng: np.random.Generator, round_id: int = 0) -> RoundRecord:
    dist = joint_outcome_distribution(source, setA, setB)
    k = int(np.searchsorted(_cdf(dist.flat), rng.random(), side="right"))
    return RoundRecord(round_id, setA, setB, _code_to_bits(k >> 2), _code_to_bits(k & 3))


@dataclass(frozen=True)
class RoundBatch:
    """Columnar record of many rounds.

    Settings are ``MeasurementSetting.index`` values and outcomes are codes
    ``2*pol_bit + spa_bit``; ``out_e`` is -1 where Eve did not intercept.
    """

    set_a: np.ndarray
    set_b: np.ndarray
    set_e: np.ndarray
    touched: np.ndarray
    out_a: np.ndarray
    out_b: np.ndarray
    out_e: np.ndarray

    def __len__(self):
        return len(self.set_a)

    def record(self, i: int) -> RoundRecord:
        return RoundRecord(
            i,
            ALL_SETTINGS[self.set_a[i]],
            ALL_SETTINGS[self.set_b[i]],
            _code_to_bits(int(self.out_a[i])),
            _code_to_bits(int(self.out_b[i])),
            bool(self.touched[i]),
        )

    def records(self):
        return (self.record(i) for i in range(len(self)))


def outcome_tables(source: PairSource) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative tables consumed by the sampling kernel.

    ``joint[i, j]``: 16-cell table for settings i (Alice) and j (Bob or Eve).
    ``resent[e, o, j]``: Bob's 4-cell table for a photon resent by Eve after
    measuring setting e with outcome code o.
    """
    joint = np.empty((4, 4, 16))
    for sa in ALL_SETTINGS:
        for sb in ALL_SETTINGS:
            joint[sa.index, sb.index] = joint_outcome_distribution(source, sa, sb).flat
    resent = np.empty((4, 4, 4, 4))
    for se in ALL_SETTINGS:
        for o in range(4):
            state = resend_state(se, _code_to_bits(o))
            for sb in ALL_SETTINGS:
                resent[se.index, o, sb.index] = measure_resent(state, sb).reshape(4)
    return _cdf(joint), _cdf(resent)


def simulate_rounds(
    source: PairSource,
    spec: ProtocolSpec,
    n: int,
    rngs: dict[str, np.random.Generator],
    eve: EveStrategy = NO_EVE,
    backend=None,
) -> RoundBatch:
    """Draw basis choices and outcomes for ``n`` rounds.

    Uses the ``alice``, ``bob``, ``eve`` and ``source`` streams of ``rngs``.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    sample = backend or kernels.sample_rounds
    set_a = rngs["alice"].choice(4, size=n, p=spec.probability_vector("A"))
    set_b = rngs["bob"].choice(4, size=n, p=spec.probability_vector("B"))
    eve_rng = rngs["eve"]
    touched = eve_rng.random(n) < eve.intercept_fraction
    set_e = eve_rng.choice(4, size=n, p=eve.policy_vector(spec))
    u_src = rngs["source"].random(n)
    u_bob = rngs["source"].random(n)
    joint, resent = outcome_tables(source)
    out_a, out_b, out_e = sample(set_a, set_b, set_e, touched, u_src, u_bob, joint, resent)
    return RoundBatch(set_a, set_b, np.where(touched, set_e, -1), touched, out_a, out_b, out_e)


# --- interference curves ----------------------------------------------------


@dataclass(frozen=True)
class ScanPoint:
    theta: float
    coincidences: float
    total: float

    def __post_init__(self):
        if self.coincidences > self.total:
            raise DomainError("coincidences exceed total")


@dataclass(frozen=True)
class ScanCurve:
    points: tuple[ScanPoint, ...]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.coincidences / p.total for p in self.points])

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_deg", "coincidences", "total", "rate"])
        for p in self.points:
            w.writerow([_num(p.theta), _num(p.coincidences), _num(p.total), repr(p.coincidences / p.total)])
        return _emit(buf.getvalue(), dest)


def default_thetas(n_angles: int = 13, start: float = 0.0, span: float = 180.0) -> list[float]:
    return list(np.linspace(start, start + span, n_angles))


def interference_scan(
    source: PairSource,
    fixed_theta,
    thetas,
    n_per_point: int,
    rng: np.random.Generator | None,
) -> ScanCurve:
    """Coincidences at port 0 of both analyzers, A fixed and B rotated.

    With ``rng=None`` the exact expected rates are returned (``total=1``).
    """
    if n_per_point < 1:
        raise DomainError("n_per_point must be at least 1")
    fixed = AnalyzerAngle(float(getattr(fixed_theta, "theta", fixed_theta)))
    points = []
    for theta in thetas:
        p = float(pol_table(source.pol, fixed, float(theta))[0, 0])
        # background mixes the full table with uniform noise
        p = (1.0 - source.bg) * p + source.bg / 4.0
        if rng is None:
            points.append(ScanPoint(float(theta), p, 1.0))
        else:
            points.append(ScanPoint(float(theta), int(rng.binomial(n_per_point, p)), n_per_point))
    return ScanCurve(tuple(points))


def fit_visibility(curve: ScanCurve) -> tuple[float, float]:
    """Least-squares fit of ``A * (1 - v cos(2(theta - theta0)))``.

    Returns ``(v, theta0)`` with theta0, the curve minimum, in [0, 180).
    The model is linear in (c0, c1, c2) after expanding the cosine.
    """
    thetas = curve.thetas
    if len(np.unique(np.round(thetas % 360.0, 9))) < 4:
        raise FitError("need at least 4 distinct angles")
    if np.ptp(thetas) < 90.0:
        raise FitError("angles must span at least 90 degrees")
    y = curve.rates
    if not np.any(y > 0):
        raise FitError("curve is identically zero")
    t = np.radians(2.0 * thetas)
    design = np.column_stack([np.ones_like(t), np.cos(t), np.sin(t)])
    (c0, c1, c2), *_ = np.linalg.lstsq(design, y, rcond=None)
    if c0 <= 0:
        raise FitError("fitted mean rate is not positive")
    v = min(1.0, math.hypot(c1, c2) / c0)
    theta_max = math.degrees(math.atan2(c2, c1)) / 2.0
    return float(v), float((theta_max + 90.0) % 180.0)


# --- spatial correlation tables ---------------------------------------------


def correlation_table(
    source: PairSource, basisA: SpatialBasis, basisB: SpatialBasis, n: int, rng: np.random.Generator
) -> np.ndarray:
    """2x2 coincidence counts, rows Alice index 1/2, columns Bob index 1/2."""
    if n < 1:
        raise DomainError("n must be at least 1")
    setA = MeasurementSetting(ALL_SETTINGS[0].pol_basis, basisA)
    setB = MeasurementSetting(ALL_SETTINGS[0].pol_basis, basisB)
    probs = joint_outcome_distribution(source, setA, setB).spatial_table().reshape(4)
    return rng.multinomial(n, probs / probs.sum()).reshape(2, 2)


def tables_to_csv(tables: dict, dest=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["basis_a", "basis_b", "index_a", "index_b", "count"])
    for (ba, bb), counts in tables.items():
        for i in range(2):
            for j in range(2):
                w.writerow([ba.value, bb.value, i + 1, j + 1, int(counts[i, j])])
    return _emit(buf.getvalue(), dest)


def _num(x):
    return int(x) if float(x).is_integer() else repr(float(x))


def _emit(text: str, dest) -> str:
    if dest is not None:
        Path(dest).write_text(text, encoding="utf-8")
    return text
