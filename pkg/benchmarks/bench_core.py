"""Compare the compiled and numpy backends on the two hot loops.

Run with ``python3 benchmarks/bench_core.py [--radius 8] [--repeat 5]``.
Both backends get identical inputs; the script also reports the largest
disagreement between their outputs.
"""

import argparse
import time

import numpy as np
from scipy.special import gammaln

from gefsplit import gef, kernels


def best_time(func, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = func()
        times.append(time.perf_counter() - t)
    return min(times), out


def scaled_problem(radius, seed):
    """The scaled polynomial and starting guesses that zero finding hands to Aberth."""
    coeffs = gef.sample_gef(gef.truncation_order(radius + 2.0), seed, 0)
    zeta = np.asarray(coeffs.zeta, dtype=complex)
    ks = np.arange(zeta.size)
    log_a = np.log(np.abs(zeta)) - 0.5 * gammaln(ks + 1)
    deg = zeta.size - 1
    shift = (log_a[0] - log_a[-1]) / deg
    lb = log_a + ks * shift
    lb -= lb.max()
    b = np.exp(lb) * np.exp(1j * np.angle(zeta))
    return coeffs, np.ascontiguousarray(b), gef._newton_polygon_guesses(lb)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=float, default=8.0)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args(argv)

    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    coeffs, b, guesses = scaled_problem(args.radius, args.seed)
    zeta = np.ascontiguousarray(coeffs.zeta, dtype=complex)
    rng = np.random.default_rng(args.seed)
    z = np.ascontiguousarray(args.radius * np.sqrt(rng.random(args.points)) * np.exp(2j * np.pi * rng.random(args.points)))

    print(f"series order {zeta.size - 1}, {args.points} evaluation points, best of {args.repeat}")
    print(f"{'kernel':<12}{'backend':<10}{'seconds':>12}")
    results = {}
    for name, mod in backends.items():
        t_eval, vals = best_time(lambda: mod.fstar_eval(zeta, z), args.repeat)

        def solve():
            w = guesses.copy()
            mod.aberth(b, w, 500, 1e-14)
            return w

        t_root, roots = best_time(solve, args.repeat)
        results[name] = (vals, np.sort_complex(roots))
        print(f"{'fstar_eval':<12}{name:<10}{t_eval:>12.5f}")
        print(f"{'aberth':<12}{name:<10}{t_root:>12.5f}")

    if len(results) == 2:
        (va, ra), (vb, rb) = results["python"], results["compiled"]
        print(f"max |F* difference|     {np.max(np.abs(va[0] - vb[0])):.2e}")
        print(f"max |root difference|   {np.max(np.abs(ra - rb)):.2e}")


if __name__ == "__main__":
    main()
