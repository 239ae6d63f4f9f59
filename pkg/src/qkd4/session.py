"""Alice/Bob session orchestration over a classical channel.

The quantum stage is simulated once from the master seed; each party then
sees only its own settings and outcomes and runs the public discussion:

1. Alice -> BasisAnnounce, Bob -> BasisAnnounce (batched, all rounds)
2. Alice -> SiftIndices (kept key slots; Bob checks them against his own)
3. Alice -> SampleDisclosure (every kept bit of a random subset of sifted rounds)
4. Bob -> QberReport, then Abort if the estimate exceeds the threshold

A key slot is ``2 * round + dof`` with dof 0 = polarization, 1 = spatial.
Disclosed bits never enter the final key.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .adversary import NO_EVE, EveStrategy
from .errors import ChannelClosedError, DomainError, QKDError
from .model import ALL_SETTINGS, MeasurementSetting, PairSource
from .protocols import ProtocolKind, ProtocolSpec, bits_batch, sift_batch
from .sampler import RoundBatch, simulate_rounds
from .transport import ClassicalMessage, Endpoint, MessageType, loopback_pair, memory_pair

SPEC_VERSION = "qkd4.report.v1"


@dataclass(frozen=True)
class SessionConfig:
    protocol: ProtocolSpec
    source: PairSource = field(default_factory=PairSource)
    eve: EveStrategy = NO_EVE
    n_pairs: int = 10_000
    disclose_fraction: float = 0.1
    abort_threshold: float | None = None
    master_seed: int = 0

    def __post_init__(self):
        if int(self.n_pairs) < 1:
            raise DomainError("n_pairs must be at least 1")
        if not 0.0 <= self.disclose_fraction < 1.0:
            raise DomainError("disclose_fraction must lie in [0, 1)")


class SiftMismatch(QKDError):
    """The parties computed different sifted index sets."""


@dataclass
class RunReport:
    party: str
    protocol: str
    n_pairs: int
    sifted_rounds: int
    sifted_bits: int
    bits_per_pair: float
    disclosed_bits: int
    final_key_bits: int
    qber_estimated: dict
    symbol_error_estimated: float | None
    messages_sent: int
    messages_received: int
    aborted: bool
    transcript_sha256: str
    sifted_sha256: str
    # filled in by run_session, which sees both parties
    qber_true: dict = field(default_factory=dict)
    symbol_error_true: float | None = None
    # simulation-side diagnostic: share of sifted bits Eve learned exactly
    eve_knowledge_fraction: float | None = None
    key: np.ndarray = field(default=None, repr=False)
    sifted_slots: np.ndarray = field(default=None, repr=False)
    sifted_values: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "party": self.party,
            "protocol": self.protocol,
            "n_pairs": self.n_pairs,
            "sifted_rounds": self.sifted_rounds,
            "sifted_bits": self.sifted_bits,
            "bits_per_pair": self.bits_per_pair,
            "disclosed_bits": self.disclosed_bits,
            "final_key_bits": self.final_key_bits,
            "qber_estimated": self.qber_estimated,
            "symbol_error_estimated": self.symbol_error_estimated,
            "qber_true": self.qber_true,
            "symbol_error_true": self.symbol_error_true,
            "eve_knowledge_fraction": self.eve_knowledge_fraction,
            "messages_sent": self.messages_sent,
            "messages_received": self.messages_received,
            "aborted": self.aborted,
            "transcript_sha256": self.transcript_sha256,
            "sifted_sha256": self.sifted_sha256,
        }


# --- shared helpers ------------------------------------------------------------


def _codes(settings: np.ndarray) -> list[str]:
    return [ALL_SETTINGS[i].code for i in settings]


def _indices(codes) -> np.ndarray:
    return np.array([MeasurementSetting.from_code(c).index for c in codes], dtype=np.int64)


def _kept_slots(keep_pol: np.ndarray, keep_spa: np.ndarray) -> np.ndarray:
    slots = np.stack([keep_pol, keep_spa], axis=1).reshape(-1)
    return np.flatnonzero(slots)


def _slot_values(slots: np.ndarray, pol_bits: np.ndarray, spa_bits: np.ndarray) -> np.ndarray:
    bits = np.stack([pol_bits, spa_bits], axis=1).reshape(-1)
    return bits[slots].astype(np.int8)


def error_summary(slots: np.ndarray, mismatch: np.ndarray, ququart: bool) -> tuple[dict, float | None]:
    """Per-DOF and pooled error fractions over ``slots``; symbol error by round for qu-quarts."""

    def frac(mask):
        n = int(mask.sum())
        return float(mismatch[mask].sum()) / n if n else None

    dof = slots & 1
    qber = {"pol": frac(dof == 0), "spa": frac(dof == 1), "overall": frac(np.ones_like(dof, dtype=bool))}
    symbol = None
    if ququart:
        rounds = slots >> 1
        uniq, inv = np.unique(rounds, return_inverse=True)
        if len(uniq):
            bad = np.zeros(len(uniq), dtype=bool)
            np.logical_or.at(bad, inv, mismatch.astype(bool))
            symbol = float(bad.mean())
    return qber, symbol


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _exceeds(threshold, qber: dict) -> bool:
    return threshold is not None and qber.get("overall") is not None and qber["overall"] > threshold


# --- parties -------------------------------------------------------------------


def _finish(party, config, ep, slots, values, disclosed_slots, qber, symbol, aborted) -> RunReport:
    keep = ~np.isin(slots, disclosed_slots)
    key = np.zeros(0, dtype=np.int8) if aborted else values[keep]
    n = int(config.n_pairs)
    return RunReport(
        party=party,
        protocol=config.protocol.kind.value,
        n_pairs=n,
        sifted_rounds=int(len(np.unique(slots >> 1))),
        sifted_bits=int(len(slots)),
        bits_per_pair=len(slots) / n,
        disclosed_bits=int(len(disclosed_slots)),
        final_key_bits=int(len(key)),
        qber_estimated=qber,
        symbol_error_estimated=symbol,
        messages_sent=ep.sent,
        messages_received=ep.received,
        aborted=aborted,
        transcript_sha256=_digest(ep.transcript_bytes()),
        sifted_sha256=_digest(slots.astype(">i8").tobytes()),
        key=key,
        sifted_slots=slots,
        sifted_values=values,
    )


def _expect(ep: Endpoint, mtype: MessageType) -> ClassicalMessage:
    msg = ep.recv()
    if msg.type is MessageType.ABORT and mtype is not MessageType.ABORT:
        raise ChannelClosedError(f"peer aborted: {msg.reason}")
    if msg.type is not mtype:
        raise QKDError(f"expected {mtype.value}, got {msg.type.value}")
    return msg


def run_alice(config: SessionConfig, ep: Endpoint, settings: np.ndarray, outcomes: np.ndarray) -> RunReport:
    n = int(config.n_pairs)
    rr = (0, n)
    spec = config.protocol
    ep.send(ClassicalMessage(MessageType.BASIS_ANNOUNCE, rr, bases=_codes(settings)))
    set_b = _indices(_expect(ep, MessageType.BASIS_ANNOUNCE).bases)
    keep_pol, keep_spa = sift_batch(spec, settings, set_b)
    slots = _kept_slots(keep_pol, keep_spa)
    ep.send(ClassicalMessage(MessageType.SIFT_INDICES, rr, indices=slots.tolist()))

    values = _slot_values(slots, (outcomes >> 1) & 1, outcomes & 1)
    sifted_rounds = np.unique(slots >> 1)
    n_disclose = int(round(config.disclose_fraction * len(sifted_rounds)))
    drng = rngmod.stream(config.master_seed, "disclosure")
    chosen = np.sort(drng.choice(sifted_rounds, size=n_disclose, replace=False)) if n_disclose else sifted_rounds[:0]
    disclosed_mask = np.isin(slots >> 1, chosen)
    disclosed = list(zip(slots[disclosed_mask].tolist(), values[disclosed_mask].tolist()))
    ep.send(ClassicalMessage(MessageType.SAMPLE_DISCLOSURE, rr, disclosed=disclosed))

    report = _expect(ep, MessageType.QBER_REPORT).qber
    qber = {k: report.get(k) for k in ("pol", "spa", "overall")}
    symbol = report.get("symbol")
    aborted = False
    if _exceeds(config.abort_threshold, qber):
        _expect(ep, MessageType.ABORT)
        aborted = True
    return _finish("alice", config, ep, slots, values, slots[disclosed_mask], qber, symbol, aborted)


def run_bob(config: SessionConfig, ep: Endpoint, settings: np.ndarray, outcomes: np.ndarray) -> RunReport:
    n = int(config.n_pairs)
    rr = (0, n)
    spec = config.protocol
    set_a = _indices(_expect(ep, MessageType.BASIS_ANNOUNCE).bases)
    ep.send(ClassicalMessage(MessageType.BASIS_ANNOUNCE, rr, bases=_codes(settings)))
    keep_pol, keep_spa = sift_batch(spec, set_a, settings)
    slots = _kept_slots(keep_pol, keep_spa)
    announced = np.array(_expect(ep, MessageType.SIFT_INDICES).indices, dtype=np.int64)
    if not np.array_equal(announced, slots):
        ep.send(ClassicalMessage(MessageType.ABORT, rr, reason="sifted index mismatch"))
        raise SiftMismatch("Alice's sifted indices differ from Bob's")

    _, _, b_pol, b_spa = bits_batch(settings, np.zeros_like(outcomes), outcomes)
    values = _slot_values(slots, b_pol, b_spa)
    disclosed = _expect(ep, MessageType.SAMPLE_DISCLOSURE).disclosed
    d_slots = np.array([s for s, _ in disclosed], dtype=np.int64)
    d_bits = np.array([b for _, b in disclosed], dtype=np.int8)
    pos = np.searchsorted(slots, d_slots)
    if len(d_slots) and (np.any(pos >= len(slots)) or np.any(slots[np.minimum(pos, len(slots) - 1)] != d_slots)):
        ep.send(ClassicalMessage(MessageType.ABORT, rr, reason="disclosed index not sifted"))
        raise QKDError("disclosed indices are not a subset of the sifted indices")
    mismatch = values[pos] != d_bits
    qber, symbol = error_summary(d_slots, mismatch, spec.kind is ProtocolKind.QUQUART)
    payload = dict(qber)
    if symbol is not None:
        payload["symbol"] = symbol
    ep.send(ClassicalMessage(MessageType.QBER_REPORT, rr, qber=payload))
    aborted = _exceeds(config.abort_threshold, qber)
    if aborted:
        ep.send(ClassicalMessage(MessageType.ABORT, rr, reason=f"estimated QBER {qber['overall']:.4f} above threshold"))
    return _finish("bob", config, ep, slots, values, d_slots, qber, symbol, aborted)


# --- orchestration ---------------------------------------------------------------


def simulate_quantum_stage(config: SessionConfig, backend=None) -> RoundBatch:
    rngs = rngmod.streams(config.master_seed)
    return simulate_rounds(config.source, config.protocol, int(config.n_pairs), rngs, config.eve, backend=backend)


def _eve_knowledge(batch: RoundBatch, report: RunReport) -> float | None:
    slots = report.sifted_slots
    if not len(slots):
        return None
    rounds, dof = slots >> 1, slots & 1
    touched = batch.touched[rounds]
    set_e = np.where(batch.set_e[rounds] < 0, 0, batch.set_e[rounds])
    out_e = np.where(batch.out_e[rounds] < 0, 0, batch.out_e[rounds])
    set_a = batch.set_a[rounds]
    same_basis = np.where(dof == 0, (set_e >> 1) == (set_a >> 1), (set_e & 1) == (set_a & 1))
    eve_bit = np.where(dof == 0, ((out_e >> 1) & 1) ^ (set_e >> 1), out_e & 1)
    knows = touched & same_basis & (eve_bit == report.sifted_values)
    return float(knows.mean())


def run_session(config: SessionConfig, channel="memory", backend=None) -> tuple[RunReport, RunReport]:
    """Run both parties to completion and return (Alice's report, Bob's report).

    ``channel`` is ``"memory"``, ``"tcp"`` (loopback socket) or a connected
    ``(alice_endpoint, bob_endpoint)`` pair.
    """
    batch = simulate_quantum_stage(config, backend=backend)
    if channel == "memory":
        ep_a, ep_b = memory_pair()
    elif channel == "tcp":
        ep_a, ep_b = loopback_pair()
    else:
        ep_a, ep_b = channel

    box: dict = {}

    def bob():
        try:
            box["bob"] = run_bob(config, ep_b, batch.set_b, batch.out_b)
        except BaseException as exc:  # re-raised in the caller's thread
            box["error"] = exc
            ep_b.close()

    t = threading.Thread(target=bob, name="qkd4-bob", daemon=True)
    t.start()
    try:
        rep_a = run_alice(config, ep_a, batch.set_a, batch.out_a)
    except BaseException:
        ep_a.close()
        t.join(timeout=5)
        if "error" in box:
            raise box["error"]
        raise
    t.join()
    ep_a.close()
    ep_b.close()
    if "error" in box:
        raise box["error"]
    rep_b = box["bob"]

    mismatch = rep_a.sifted_values != rep_b.sifted_values
    qber, symbol = error_summary(rep_a.sifted_slots, mismatch, config.protocol.kind is ProtocolKind.QUQUART)
    eve_k = _eve_knowledge(batch, rep_a)
    for rep in (rep_a, rep_b):
        rep.qber_true = qber
        rep.symbol_error_true = symbol
        rep.eve_knowledge_fraction = eve_k
    return rep_a, rep_b
