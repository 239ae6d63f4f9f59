"""Basis choice, sifting and bit extraction for the three four-dimensional protocols.

Bit-value conventions (all tests refer to this table):

=============  ======================  ===========================
DOF / basis    Alice's key bit          Bob's key bit
=============  ======================  ===========================
pol, HV        port bit (H=0, V=1)      port bit
pol, DA        port bit (+=0, -=1)      port bit XOR 1
spatial, X/P   index - 1                index - 1
=============  ======================  ===========================

Bob flips in DA because |phi-> = (|+-> + |-+>)/sqrt(2) anti-correlates the
diagonal outcomes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidSettingError
from .model import ALL_SETTINGS, DP, DX, HP, HX, MeasurementSetting, PolBasis


class ProtocolKind(enum.Enum):
    PARALLEL_BBM = "ParallelBBM"
    QUQUART = "QuQuart"
    SKEWED_QUQUART = "SkewedQuQuart"


# Allowed settings for (Alice, Bob).
_ALLOWED = {
    ProtocolKind.PARALLEL_BBM: (ALL_SETTINGS, ALL_SETTINGS),
    ProtocolKind.QUQUART: ((HX, DP), (HX, DP)),
    ProtocolKind.SKEWED_QUQUART: ((HX, DP), (HP, DX)),
}

PARTIES = ("A", "B")


def _uniform(settings) -> dict[MeasurementSetting, float]:
    return {s: 1.0 / len(settings) for s in settings}


@dataclass(frozen=True)
class ProtocolSpec:
    kind: ProtocolKind
    alice: dict = field(default=None)
    bob: dict = field(default=None)

    def __post_init__(self):
        kind = ProtocolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        allowed_a, allowed_b = _ALLOWED[kind]
        for party, allowed in (("alice", allowed_a), ("bob", allowed_b)):
            probs = getattr(self, party)
            if probs is None:
                probs = _uniform(allowed)
            probs = {_as_setting(s): float(p) for s, p in probs.items()}
            for s, p in probs.items():
                if s not in allowed:
                    raise InvalidSettingError(f"{kind.value} does not allow {party} setting {s}")
                if p < 0:
                    raise DomainError(f"negative basis probability for {s}")
            if abs(sum(probs.values()) - 1.0) > 1e-9:
                raise DomainError(f"{party} basis probabilities sum to {sum(probs.values())}, not 1")
            object.__setattr__(self, party, probs)

    @classmethod
    def standard(cls, kind) -> "ProtocolSpec":
        return cls(ProtocolKind(kind))

    def probabilities(self, party: str) -> dict[MeasurementSetting, float]:
        return self.alice if party == "A" else self.bob

    def allowed(self, party: str) -> tuple[MeasurementSetting, ...]:
        return _ALLOWED[self.kind][PARTIES.index(party)]

    def probability_vector(self, party: str) -> np.ndarray:
        """Choice probabilities indexed by ``MeasurementSetting.index``."""
        probs = self.probabilities(party)
        return np.array([probs.get(s, 0.0) for s in ALL_SETTINGS])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "basis_probabilities": {
                "A": {s.code: p for s, p in self.alice.items()},
                "B": {s.code: p for s, p in self.bob.items()},
            },
        }

    @classmethod
    def from_dict(cls, data) -> "ProtocolSpec":
        if isinstance(data, str):
            return cls.standard(data)
        probs = data.get("basis_probabilities") or {}
        return cls(ProtocolKind(data["kind"]), probs.get("A"), probs.get("B"))


def _as_setting(s) -> MeasurementSetting:
    return s if isinstance(s, MeasurementSetting) else MeasurementSetting.from_code(s)


def choose_setting(spec: ProtocolSpec, party: str, rng: np.random.Generator) -> MeasurementSetting:
    probs = spec.probabilities(party)
    settings = list(probs)
    k = rng.choice(len(settings), p=np.array([probs[s] for s in settings]))
    return settings[int(k)]


@dataclass(frozen=True)
class SiftDecision:
    keep_pol: bool
    keep_spa: bool

    @property
    def bits_kept(self) -> int:
        return int(self.keep_pol) + int(self.keep_spa)


def _check_allowed(spec: ProtocolSpec, party: str, setting: MeasurementSetting):
    if setting not in spec.allowed(party):
        raise InvalidSettingError(f"setting {setting} not allowed for party {party} in {spec.kind.value}")


def sift(spec: ProtocolSpec, setA: MeasurementSetting, setB: MeasurementSetting) -> SiftDecision:
    _check_allowed(spec, "A", setA)
    _check_allowed(spec, "B", setB)
    keep_pol = setA.pol_basis is setB.pol_basis
    keep_spa = setA.spatial_basis is setB.spatial_basis
    if spec.kind is ProtocolKind.QUQUART:
        both = keep_pol and keep_spa
        return SiftDecision(both, both)
    return SiftDecision(keep_pol, keep_spa)


def _bob_flip(setB: MeasurementSetting) -> int:
    return 1 if setB.pol_basis is PolBasis.DA else 0


def extract_bits(spec, decision: SiftDecision, outcomeA, outcomeB, setA, setB) -> tuple[tuple, tuple]:
    """Key bits kept this round, in (pol, spa) order."""
    bits_a, bits_b = [], []
    if decision.keep_pol:
        bits_a.append(outcomeA[0])
        bits_b.append(outcomeB[0] ^ _bob_flip(setB))
    if decision.keep_spa:
        bits_a.append(outcomeA[1])
        bits_b.append(outcomeB[1])
    return tuple(bits_a), tuple(bits_b)


# --- batched forms over setting / outcome-code arrays ----------------------


def sift_batch(spec: ProtocolSpec, set_a: np.ndarray, set_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``sift`` over setting-index arrays; returns (keep_pol, keep_spa)."""
    for party, arr in (("A", set_a), ("B", set_b)):
        allowed = np.zeros(4, dtype=bool)
        allowed[[s.index for s in spec.allowed(party)]] = True
        if not allowed[arr].all():
            bad = MeasurementSetting.from_index(int(arr[~allowed[arr]][0]))
            raise InvalidSettingError(f"setting {bad} not allowed for party {party} in {spec.kind.value}")
    keep_pol = (set_a >> 1) == (set_b >> 1)
    keep_spa = (set_a & 1) == (set_b & 1)
    if spec.kind is ProtocolKind.QUQUART:
        both = keep_pol & keep_spa
        return both, both.copy()
    return keep_pol, keep_spa


def bits_batch(set_b, out_a, out_b) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Raw (pre-sifting) key bits: Alice pol, Alice spa, Bob pol, Bob spa."""
    a_pol = (out_a >> 1) & 1
    a_spa = out_a & 1
    b_pol = ((out_b >> 1) & 1) ^ (set_b >> 1)
    b_spa = out_b & 1
    return a_pol, a_spa, b_pol, b_spa


# --- qu-quart alphabets ----------------------------------------------------

ROMAN_LETTERS = ("a", "b", "c", "d")
GREEK_LETTERS = ("α", "β", "γ", "δ")
ALPHABETS = {"roman": ROMAN_LETTERS, "greek": GREEK_LETTERS}


@dataclass(frozen=True)
class QuartSymbol:
    alphabet: str
    symbol: str

    def __post_init__(self):
        if self.alphabet not in ALPHABETS or self.symbol not in ALPHABETS[self.alphabet]:
            raise DomainError(f"{self.symbol!r} is not in the {self.alphabet!r} alphabet")


def quart_encode(pol_bit: int, spa_bit: int, alphabet: str) -> QuartSymbol:
    """a=(H,X1) b=(H,X2) c=(V,X1) d=(V,X2); greek uses +/- and P1/P2 likewise."""
    if alphabet not in ALPHABETS:
        raise DomainError(f"unknown alphabet {alphabet!r}")
    if pol_bit not in (0, 1) or spa_bit not in (0, 1):
        raise DomainError("quart bits must be 0 or 1")
    return QuartSymbol(alphabet, ALPHABETS[alphabet][2 * pol_bit + spa_bit])


def quart_decode(sym: QuartSymbol) -> tuple[int, int, str]:
    k = ALPHABETS[sym.alphabet].index(sym.symbol)
    return k >> 1, k & 1, sym.alphabet


def alphabet_of(setting: MeasurementSetting) -> str:
    if setting == HX:
        return "roman"
    if setting == DP:
        return "greek"
    raise DomainError(f"{setting} is not a qu-quart basis")

