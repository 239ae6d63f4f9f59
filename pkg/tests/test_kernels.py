import numpy as np
import pytest

from qkd4 import kernels
from qkd4 import rng as rngmod
from qkd4.adversary import EveStrategy
from qkd4.kernels import _pykernels
from qkd4.model import PairSource
from qkd4.protocols import ProtocolSpec
from qkd4.sampler import simulate_rounds

try:
    from qkd4.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernel not built")


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
@pytest.mark.parametrize("kind", ["ParallelBBM", "QuQuart", "SkewedQuQuart"])
@pytest.mark.parametrize("f", [0.0, 0.4, 1.0])
def test_compiled_matches_reference_bit_for_bit(kind, f):
    src = PairSource.from_params(0.83, 0.9, 0.7, 0.05)
    spec = ProtocolSpec.standard(kind)
    fast = simulate_rounds(src, spec, 20_000, rngmod.streams(31), EveStrategy(f), backend=_ckernels.sample_rounds)
    slow = simulate_rounds(src, spec, 20_000, rngmod.streams(31), EveStrategy(f), backend=_pykernels.sample_rounds)
    for name in ("out_a", "out_b", "out_e"):
        assert np.array_equal(getattr(fast, name), getattr(slow, name))


def test_zero_probability_cells_never_drawn():
    cdf = np.array([0.0, 0.5, 0.5, 1.0])
    assert _pykernels._draw(cdf, 0.0) == 1
    assert _pykernels._draw(cdf, 0.5) == 3
    assert _pykernels._draw(cdf, 0.999999) == 3
