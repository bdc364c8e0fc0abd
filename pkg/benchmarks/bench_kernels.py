"""Time the compiled kernels against the NumPy fallback.

Run ``python benchmarks/bench_kernels.py``; each line reports the best of
several repeats for both backends and their ratio.
"""
import argparse
import timeit

import numpy as np

from bosehfb import _kernels_py
from bosehfb.kernels import BoseWeights

try:
    from bosehfb import _kernels as compiled
except ImportError:
    compiled = None


def cases(n_modes, n_sites, seed=0):
    rng = np.random.default_rng(seed)
    w = BoseWeights.build(rng.uniform(0.0, 60.0, n_modes), 1.0)
    vdisp = rng.standard_normal(n_sites) + 1j * rng.standard_normal(n_sites)
    alpha = rng.standard_normal((n_sites, n_sites)) + 1j * rng.standard_normal((n_sites, n_sites))
    idx = ((np.arange(n_sites)[:, None] - np.arange(n_sites)[None, :]) % n_sites).astype(np.intp)
    return {
        "bose_sum": (w.q, w.a, 0.01),
        "bose_sum_derivative": (w.q, w.a, 0.01),
        "hadamard_displacement": (vdisp, alpha, idx),
    }


def best_time(fn, args, repeat, number):
    return min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, default=32 ** 3)
    ap.add_argument("--sites", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<24}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, fargs in cases(args.modes, args.sites).items():
        tp = best_time(getattr(_kernels_py, name), fargs, args.repeat, args.number)
        if compiled is None:
            print(f"{name:<24}{1e3 * tp:>14.3f}{'-':>16}{'-':>10}")
            continue
        tc = best_time(getattr(compiled, name), fargs, args.repeat, args.number)
        print(f"{name:<24}{1e3 * tp:>14.3f}{1e3 * tc:>16.3f}{tp / tc:>10.2f}")


if __name__ == "__main__":
    main()
