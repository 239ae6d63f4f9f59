from fractions import Fraction

import numpy as np
import pytest

from qkd4 import rng as rngmod
from qkd4.adversary import EveStrategy, eve_process_round
from qkd4.errors import DomainError
from qkd4.model import ALL_SETTINGS, DP, HX, AliceConditional, PairSource, joint_outcome_distribution, measure_resent
from qkd4.oracle import analytic_error_rates
from qkd4.protocols import ProtocolSpec, bits_batch, choose_setting, extract_bits, sift, sift_batch
from qkd4.sampler import simulate_rounds

PAR = ProtocolSpec.standard("ParallelBBM")
QQ = ProtocolSpec.standard("QuQuart")


def batch_qber(spec, eve, n=100_000, seed=5, source=None):
    batch = simulate_rounds(source or PairSource.ideal(), spec, n, rngmod.streams(seed), eve)
    kp, ks = sift_batch(spec, batch.set_a, batch.set_b)
    ap, asp, bp, bsp = bits_batch(batch.set_b, batch.out_a, batch.out_b)
    errors = np.sum(kp & (ap != bp)) + np.sum(ks & (asp != bsp))
    bits = kp.sum() + ks.sum()
    return errors / bits, bits


def test_strategy_validation():
    with pytest.raises(DomainError):
        EveStrategy(1.5)
    with pytest.raises(DomainError):
        EveStrategy(1.0, {"HX": 0.3})
    assert EveStrategy(1.0).policy(QQ) == {HX: 0.5, DP: 0.5}
    assert sum(EveStrategy(1.0).policy(PAR).values()) == 1


def test_f_zero_is_passthrough(rng):
    for _ in range(100):
        assert not eve_process_round(PairSource.ideal(), EveStrategy(0.0), rng, PAR).touched
    q0, _ = batch_qber(PAR, EveStrategy(0.0), n=20_000, source=PairSource.from_params(0.9, 0.9, 0.9))
    qn, _ = batch_qber(PAR, EveStrategy(0.0, {"HX": 1.0}), n=20_000, source=PairSource.from_params(0.9, 0.9, 0.9))
    assert q0 == qn


def test_f_one_parallel_quarter():
    q, bits = batch_qber(PAR, EveStrategy(1.0))
    assert abs(q - 0.25) <= 4 * np.sqrt(0.25 * 0.75 / bits)


def test_half_interception_eighth():
    # 1/8 from the enumeration at f=1 and the mixture argument, both checked here
    at_one = analytic_error_rates(PAR, EveStrategy(1.0)).per_bit_qber
    at_zero = analytic_error_rates(PAR, EveStrategy(0.0)).per_bit_qber
    assert (at_one + at_zero) / 2 == Fraction(1, 8)
    assert analytic_error_rates(PAR, EveStrategy(0.5)).per_bit_qber == Fraction(1, 8)
    q, bits = batch_qber(PAR, EveStrategy(0.5))
    assert abs(q - 0.125) <= 4 * np.sqrt(0.125 * 0.875 / bits)


def test_qber_affine_in_f():
    src = PairSource.from_params(0.9, 0.95, 0.95)
    q0 = float(analytic_error_rates(PAR, EveStrategy(0.0), src).per_bit_qber)
    q1 = float(analytic_error_rates(PAR, EveStrategy(1.0), src).per_bit_qber)
    for f in (0.0, 0.25, 0.5, 1.0):
        exact = analytic_error_rates(PAR, EveStrategy(f), src).per_bit_qber
        assert float(exact) == pytest.approx(q0 + f * (q1 - q0), abs=1e-15)
        q, bits = batch_qber(PAR, EveStrategy(f), n=60_000, seed=int(f * 100), source=src)
        # two bits of one round can share an Eve basis draw; 5 sigma absorbs the clustering
        assert abs(q - float(exact)) <= 5 * np.sqrt(float(exact) * (1 - float(exact)) / bits)


def test_alice_marginal_unchanged_by_eve(rng):
    src = PairSource.from_params(0.8, 0.7, 0.9, 0.05)
    for _ in range(50):
        r = eve_process_round(src, EveStrategy(1.0), rng, PAR)
        # average Alice's conditional over Eve's outcome weights: uniform marginals
        for set_a in ALL_SETTINGS:
            joint = joint_outcome_distribution(src, set_a, r.eve_setting)
            total = np.zeros((2, 2))
            for pe in (0, 1):
                for se in (0, 1):
                    w = joint.table[:, :, pe, se].sum()
                    total += w * AliceConditional(src, r.eve_setting, (pe, se)).distribution(set_a)
            assert np.allclose(total, 0.25, atol=1e-12)
            assert r.alice_conditional.distribution(set_a).sum() == pytest.approx(1.0, abs=1e-12)


def test_matching_eve_basis_induces_no_error():
    for set_e in ALL_SETTINGS:
        strat = EveStrategy(1.0, {set_e.code: 1.0})
        spec = ProtocolSpec(PAR.kind, {set_e: 1.0}, {set_e: 1.0})
        assert analytic_error_rates(spec, strat).per_bit_qber == 0
        q, _ = batch_qber(spec, strat, n=5_000)
        assert q == 0


def test_per_round_path_agrees_with_oracle():
    """Build QuQuart rounds from the public per-round operations only."""
    g = np.random.default_rng(2024)
    src = PairSource.ideal()
    n, bad, kept = 12_000, 0, 0
    for _ in range(n):
        a, b = choose_setting(QQ, "A", g), choose_setting(QQ, "B", g)
        d = sift(QQ, a, b)
        r = eve_process_round(src, EveStrategy(1.0), g, QQ)
        ca = r.alice_conditional.distribution(a).reshape(4)
        oa = int(g.choice(4, p=ca / ca.sum()))
        cb = measure_resent(r.resent, b).reshape(4)
        ob = int(g.choice(4, p=cb / cb.sum()))
        if d.bits_kept:
            kept += 1
            ba, bb = extract_bits(QQ, d, (oa >> 1, oa & 1), (ob >> 1, ob & 1), a, b)
            bad += ba != bb
    assert abs(bad / kept - 0.375) <= 4 * np.sqrt(0.375 * 0.625 / kept)
