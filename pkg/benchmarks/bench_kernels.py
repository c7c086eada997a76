"""Compiled vs pure-numpy kernel timings.

Usage: python3 benchmarks/bench_kernels.py [--n 64] [--block 32] [--moments 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from sdoslab import kernels
from sdoslab.hamiltonian import assemble
from sdoslab.lattice import BoxSpec, LatticeSpec
from sdoslab.potential import demo_potential


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64, help="sites per axis")
    ap.add_argument("--block", type=int, default=32, help="columns per block")
    ap.add_argument("--moments", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    half = args.n / 2
    ham = assemble(LatticeSpec(1, 1, 1.0), BoxSpec(half, half, 0), demo_potential())
    diag, hop, _, _ = ham.rescaled()
    X = np.random.default_rng(0).standard_normal((ham.n, args.block))
    coeffs = np.random.default_rng(1).standard_normal(args.moments)

    cases = {
        "matvec": lambda: kernels.matvec(ham.nbr, diag, hop, X),
        "cheb_moments": lambda: kernels.cheb_moments(ham.nbr, diag, hop, X, args.moments),
        "cheb_series": lambda: kernels.cheb_series(ham.nbr, diag, hop, X, coeffs),
    }
    print(f"{ham.n} sites, block {args.block}, {args.moments} moments; best of {args.repeat}")
    results = {}
    prev = kernels.BACKEND
    for name in kernels.available_backends():
        kernels.set_backend(name)
        results[name] = {case: best_of(fn, args.repeat) for case, fn in cases.items()}
    kernels.set_backend(prev)

    names = list(results)
    print(f"{'kernel':<14}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for case in cases:
        row = f"{case:<14}" + "".join(f"{results[n][case] * 1e3:>10.2f}ms" for n in names)
        if "compiled" in results and "python" in results:
            row += f"{results['python'][case] / results['compiled'][case]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
