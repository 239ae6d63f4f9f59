import numpy as np
import pytest

from qkd4.adversary import EveStrategy
from qkd4.errors import ChannelClosedError, DomainError
from qkd4.model import PairSource
from qkd4.oracle import analytic_error_rates
from qkd4.protocols import ProtocolSpec
from qkd4.session import SessionConfig, run_session, simulate_quantum_stage
from qkd4.transport import memory_pair


def config(kind, n=10_000, f=0.0, source=None, **kw):
    return SessionConfig(ProtocolSpec.standard(kind), source or PairSource.ideal(), EveStrategy(f), n, **kw)


def test_config_validation():
    with pytest.raises(DomainError):
        config("QuQuart", n=0)
    with pytest.raises(DomainError):
        config("QuQuart", disclose_fraction=1.0)


def test_ideal_parallel_rate_and_zero_qber():
    a, b = run_session(config("ParallelBBM", master_seed=1))
    assert a.bits_per_pair == pytest.approx(1.0, abs=0.03)
    assert a.qber_estimated["overall"] == 0 and a.qber_true["overall"] == 0
    assert np.array_equal(a.key, b.key)
    assert a.sifted_sha256 == b.sifted_sha256
    assert a.qber_estimated == b.qber_estimated


def test_disclosed_bits_removed_from_key():
    a, b = run_session(config("SkewedQuQuart", n=2000, master_seed=3, disclose_fraction=0.25))
    assert a.disclosed_bits == 500
    assert a.final_key_bits == a.sifted_bits - a.disclosed_bits == len(b.key)


def test_ququart_full_attack_symbol_error():
    a, b = run_session(config("QuQuart", n=100_000, f=1.0, master_seed=8, disclose_fraction=0.5))
    assert a.symbol_error_estimated == pytest.approx(0.375, abs=0.01)
    assert a.symbol_error_true == pytest.approx(0.375, abs=0.01)
    assert b.symbol_error_estimated == a.symbol_error_estimated


def test_ququart_full_attack_estimate_at_default_disclosure():
    # sigma of the estimate is about 0.005 here, so +-0.01 holds for roughly 95% of seeds
    a, _ = run_session(config("QuQuart", n=100_000, f=1.0, master_seed=8))
    assert a.symbol_error_estimated == pytest.approx(0.375, abs=0.01)


def test_skewed_intrinsic_qber_matches_oracle():
    src = PairSource.from_params(0.87, 0.95, 0.95)
    cfg = config("SkewedQuQuart", n=50_000, source=src, master_seed=4)
    a, _ = run_session(cfg)
    exact = float(analytic_error_rates(cfg.protocol, cfg.eve, src).per_bit_qber)
    sigma = np.sqrt(exact * (1 - exact) / a.sifted_bits)
    assert abs(a.qber_true["overall"] - exact) <= 3 * sigma


def test_abort_threshold():
    a, b = run_session(config("ParallelBBM", n=5000, f=1.0, master_seed=2, abort_threshold=0.11))
    assert a.aborted and b.aborted
    assert a.final_key_bits == 0 and b.final_key_bits == 0
    assert a.messages_received == 3 and b.messages_sent == 3
    ok, _ = run_session(config("ParallelBBM", n=5000, master_seed=2, abort_threshold=0.11))
    assert not ok.aborted


def test_memory_and_tcp_transcripts_identical():
    cfg = config("QuQuart", n=3000, f=0.3, source=PairSource.from_params(0.9), master_seed=77)
    mem = run_session(cfg, "memory")
    tcp = run_session(cfg, "tcp")
    for m, t in zip(mem, tcp):
        assert m.to_dict() == t.to_dict()
        assert np.array_equal(m.key, t.key)


def test_same_seed_same_reports_different_seed_differs():
    cfg = config("ParallelBBM", n=3000, f=0.5, master_seed=10)
    assert run_session(cfg)[0].to_dict() == run_session(cfg)[0].to_dict()
    other = config("ParallelBBM", n=3000, f=0.5, master_seed=11)
    assert run_session(other)[0].transcript_sha256 != run_session(cfg)[0].transcript_sha256


def test_sifting_agreement_all_protocols():
    for kind in ("ParallelBBM", "QuQuart", "SkewedQuQuart"):
        a, b = run_session(config(kind, n=4000, f=0.5, master_seed=6))
        assert np.array_equal(a.sifted_slots, b.sifted_slots)


def test_estimate_error_shrinks_with_disclosure():
    src = PairSource.from_params(0.8, 0.9, 0.9)
    gaps = {}
    for frac in (0.02, 0.5):
        errs = []
        for seed in range(8):
            a, _ = run_session(config("ParallelBBM", n=5000, f=0.3, source=src, master_seed=seed, disclose_fraction=frac))
            errs.append(abs(a.qber_estimated["overall"] - a.qber_true["overall"]))
        gaps[frac] = np.mean(errs)
    assert gaps[0.5] < gaps[0.02]


def test_channel_closed_propagates():
    cfg = config("ParallelBBM", n=100)
    ep_a, ep_b = memory_pair()
    ep_b.close()
    with pytest.raises(ChannelClosedError):
        run_session(cfg, (ep_a, ep_b))


def test_eve_knowledge_bounds():
    a, _ = run_session(config("ParallelBBM", n=20_000, f=1.0, master_seed=9))
    # Eve shares the sifted basis half the time and then knows the bit
    assert a.eve_knowledge_fraction == pytest.approx(0.5, abs=0.02)
    none, _ = run_session(config("ParallelBBM", n=2000, master_seed=9))
    assert none.eve_knowledge_fraction == 0


def test_quantum_stage_deterministic():
    cfg = config("QuQuart", n=1000, f=0.5, master_seed=5)
    x, y = simulate_quantum_stage(cfg), simulate_quantum_stage(cfg)
    assert all(np.array_equal(getattr(x, f), getattr(y, f)) for f in ("set_a", "set_b", "out_a", "out_b", "out_e"))
