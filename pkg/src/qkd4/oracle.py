"""Exact rational rates and error rates by brute-force enumeration.

Every basis choice (Alice, Bob, Eve), every intercept/passthrough branch and
every measurement outcome is enumerated with :class:`fractions.Fraction`
weights. Polarization probabilities are computed here from the rational
density matrix and integer analyzer vectors, not from the closed form in
:mod:`qkd4.model`, so the Monte Carlo path and this oracle share only the
sifting and bit-extraction rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .adversary import EveStrategy
from .errors import DomainError
from .model import MeasurementSetting, PairSource, PolBasis, SpatialBasis
from .protocols import ProtocolKind, ProtocolSpec, extract_bits, sift

# Port vectors (unnormalized) for analyzer orientations that are multiples of 45 deg.
_PORT_VEC = {0: (1, 0), 45: (1, 1), 90: (0, 1), 135: (-1, 1)}


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # float inputs are decimal parameters (0.87) or simple ratios (1/3)
    return Fraction(float(x)).limit_denominator(1_000_000)


def _port(angle: float) -> tuple[int, int]:
    a = int(round(angle)) % 180
    if a not in _PORT_VEC or abs(angle - round(angle)) > 1e-9:
        raise DomainError(f"exact oracle supports multiples of 45 deg only, got {angle}")
    return _PORT_VEC[a]


def _norm2(vec) -> int:
    return sum(c * c for c in vec)


@dataclass(frozen=True)
class ExactSource:
    v_pol: Fraction
    v_x: Fraction
    v_p: Fraction
    bg: Fraction

    @classmethod
    def of(cls, source: "PairSource | ExactSource | None") -> "ExactSource":
        if isinstance(source, ExactSource):
            return source
        if source is None:
            source = PairSource.ideal()
        return cls(_frac(source.pol.v_pol), _frac(source.spatial.v_x), _frac(source.spatial.v_p), _frac(source.bg))

    def density(self) -> list[list[Fraction]]:
        """Rational 4x4 polarization density matrix over |HH>,|HV>,|VH>,|VV>."""
        v, half = self.v_pol, Fraction(1, 2)
        rho = [[Fraction(0)] * 4 for _ in range(4)]
        rho[0][0] = rho[3][3] = v * half + (1 - v) * half
        rho[0][3] = rho[3][0] = -v * half
        return rho

    def pol_prob(self, angle_a: float, angle_b: float) -> Fraction:
        va, vb = _port(angle_a), _port(angle_b)
        psi = [va[i] * vb[j] for i in (0, 1) for j in (0, 1)]
        rho = self.density()
        num = sum(psi[i] * rho[i][j] * psi[j] for i in range(4) for j in range(4))
        return num / (_norm2(va) * _norm2(vb))

    def spatial_prob(self, basis_a: SpatialBasis, basis_b: SpatialBasis, bit_a: int, bit_b: int) -> Fraction:
        if basis_a is not basis_b:
            return Fraction(1, 4)
        v = self.v_x if basis_a is SpatialBasis.X else self.v_p
        return (1 + v) / 4 if bit_a == bit_b else (1 - v) / 4

    def joint(self, set_a: MeasurementSetting, set_b: MeasurementSetting):
        """Yield ((a_pol, a_spa), (b_pol, b_spa), probability) over all 16 outcomes."""
        for ap, asp, bp, bsp in product((0, 1), repeat=4):
            p = self.pol_prob(set_a.pol_basis.angle + 90 * ap, set_b.pol_basis.angle + 90 * bp)
            p *= self.spatial_prob(set_a.spatial_basis, set_b.spatial_basis, asp, bsp)
            yield (ap, asp), (bp, bsp), (1 - self.bg) * p + self.bg / 16


def _resent_outcomes(eve_setting: MeasurementSetting, eve_outcome, set_b: MeasurementSetting):
    sent = _port(eve_setting.pol_basis.angle + 90 * eve_outcome[0])
    same_spatial = eve_setting.spatial_basis is set_b.spatial_basis
    for bp, bsp in product((0, 1), repeat=2):
        port = _port(set_b.pol_basis.angle + 90 * bp)
        overlap = sent[0] * port[0] + sent[1] * port[1]
        p = Fraction(overlap * overlap, _norm2(sent) * _norm2(port))
        if same_spatial:
            p *= 1 if bsp == eve_outcome[1] else 0
        else:
            p *= Fraction(1, 2)
        if p:
            yield (bp, bsp), p


@dataclass(frozen=True)
class ErrorRates:
    rate: Fraction
    rate_variance: Fraction
    per_bit_qber: Fraction | None
    pol_qber: Fraction | None
    spa_qber: Fraction | None
    symbol_error: Fraction | None
    eve_knowledge: Fraction | None

    def as_dict(self) -> dict:
        return {k: (None if v is None else str(v)) for k, v in self.__dict__.items()}


def _ratio(num: Fraction, den: Fraction) -> Fraction | None:
    return num / den if den else None


def analytic_error_rates(
    spec: ProtocolSpec, eve: EveStrategy | None = None, source: PairSource | ExactSource | None = None
) -> ErrorRates:
    """Exact sifted rate and error rates for ``spec`` under ``eve`` (default: full interception).

    ``symbol_error`` is the probability that a round contributing at least one
    key bit has any kept bit wrong; for the qu-quart protocol this is the
    probability that Bob's quart differs from Alice's. ``per_bit_qber`` pools
    all kept bits.
    """
    eve = EveStrategy(1.0) if eve is None else eve
    src = ExactSource.of(source)
    f = _frac(eve.intercept_fraction)
    policy = {s: _frac(p) for s, p in eve.policy(spec).items() if p}

    zero = Fraction(0)
    rate = rate2 = zero
    bits = {"pol": zero, "spa": zero}
    errs = {"pol": zero, "spa": zero}
    rounds_kept = sym_err = eve_known = zero

    for (set_a, pa), (set_b, pb) in product(spec.alice.items(), spec.bob.items()):
        w_set = _frac(pa) * _frac(pb)
        if not w_set:
            continue
        decision = sift(spec, set_a, set_b)
        k = decision.bits_kept
        rate += w_set * k
        rate2 += w_set * k * k
        if not k:
            continue
        dofs = [d for d, keep in (("pol", decision.keep_pol), ("spa", decision.keep_spa)) if keep]
        bits["pol"] += w_set * decision.keep_pol
        bits["spa"] += w_set * decision.keep_spa
        rounds_kept += w_set

        branches = []
        if f < 1:
            branches += [((1 - f), None, oa, None, ob, p) for oa, ob, p in src.joint(set_a, set_b)]
        if f > 0:
            for set_e, pe in policy.items():
                for oa, oe, p in src.joint(set_a, set_e):
                    if not p:
                        continue
                    for ob, q in _resent_outcomes(set_e, oe, set_b):
                        branches.append((f * pe, set_e, oa, oe, ob, p * q))

        for w_branch, set_e, oa, oe, ob, p in branches:
            w = w_set * w_branch * p
            if not w:
                continue
            bits_a, bits_b = extract_bits(spec, decision, oa, ob, set_a, set_b)
            wrong = False
            for dof, x, y in zip(dofs, bits_a, bits_b):
                if x != y:
                    errs[dof] += w
                    wrong = True
            sym_err += w * wrong
            if set_e is not None:
                eve_bits = _eve_bits(set_e, oe, set_a, decision)
                eve_known += w * sum(1 for e, x in zip(eve_bits, bits_a) if e is not None and e == x)

    total_bits = bits["pol"] + bits["spa"]
    return ErrorRates(
        rate=rate,
        rate_variance=rate2 - rate * rate,
        per_bit_qber=_ratio(errs["pol"] + errs["spa"], total_bits),
        pol_qber=_ratio(errs["pol"], bits["pol"]),
        spa_qber=_ratio(errs["spa"], bits["spa"]),
        symbol_error=_ratio(sym_err, rounds_kept),
        eve_knowledge=_ratio(eve_known, total_bits),
    )


def _eve_bits(set_e, oe, set_a, decision):
    """Eve's guess of each kept bit, or None where her basis differs from the sifted one."""
    out = []
    if decision.keep_pol:
        if set_e.pol_basis is set_a.pol_basis:
            out.append(oe[0] ^ (1 if set_e.pol_basis is PolBasis.DA else 0))
        else:
            out.append(None)
    if decision.keep_spa:
        out.append(oe[1] if set_e.spatial_basis is set_a.spatial_basis else None)
    return out


def analytic_rate(spec: ProtocolSpec) -> Fraction:
    """Expected sifted key bits per photon pair, exactly."""
    total = Fraction(0)
    for (set_a, pa), (set_b, pb) in product(spec.alice.items(), spec.bob.items()):
        total += _frac(pa) * _frac(pb) * sift(spec, set_a, set_b).bits_kept
    return total


def is_ququart(spec: ProtocolSpec) -> bool:
    return spec.kind is ProtocolKind.QUQUART
