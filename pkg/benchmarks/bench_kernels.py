"""Time the compiled round kernel against the pure Python reference.

    python3 benchmarks/bench_kernels.py [--rounds N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from qkd4 import rng as rngmod
from qkd4.adversary import EveStrategy
from qkd4.kernels import _pykernels
from qkd4.model import PairSource
from qkd4.protocols import ProtocolSpec
from qkd4.sampler import simulate_rounds

try:
    from qkd4.kernels import _ckernels
except ImportError:
    _ckernels = None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    src = PairSource.from_params(0.9, 0.95, 0.95, 0.02)
    spec = ProtocolSpec.standard("ParallelBBM")
    eve = EveStrategy(0.5)
    backends = {"python": _pykernels.sample_rounds}
    if _ckernels is not None:
        backends["cython"] = _ckernels.sample_rounds
    else:
        print("compiled kernel not built; timing the Python reference only")

    results, timings = {}, {}
    for name, kernel in backends.items():
        def run():
            return simulate_rounds(src, spec, args.rounds, rngmod.streams(1), eve, backend=kernel)

        results[name] = run()
        timings[name] = min(timeit.repeat(run, number=1, repeat=args.repeat))
        print(f"{name:>7}: {timings[name] * 1e3:8.2f} ms for {args.rounds} rounds")

    if len(results) == 2:
        same = all(np.array_equal(getattr(results["python"], f), getattr(results["cython"], f)) for f in ("out_a", "out_b", "out_e"))
        print(f"speedup: {timings['python'] / timings['cython']:.1f}x, outputs identical: {same}")


if __name__ == "__main__":
    main()
