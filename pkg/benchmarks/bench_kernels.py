"""
Compiled vs fallback kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per call for each kernel and
backend, the speedup, and the largest difference between the outputs.
"""

import argparse
import timeit

import numpy as np

from oqslab import _kernels, linalg
from oqslab._kernels import fallback


def supermatrix_case(d_S, d_E, seed=0):
    rng = np.random.default_rng(seed)
    U = linalg.expm_hermitian(linalg.random_hermitian(rng, d_S * d_E), 1.0)
    d = linalg.random_density(rng, d_E)
    return (U, d, d_S, d_E)


def chain_case(S, order, length, seed=0):
    rng = np.random.default_rng(seed)
    P = rng.random((S,) * (order + 1))
    P /= P.sum(axis=-1, keepdims=True)
    cum = np.cumsum(P.reshape(-1, S), axis=1)
    return (cum, rng.random(length), np.zeros(order, dtype=np.int64), order)


def best_time(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    if _kernels.compiled is None:
        print("compiled extension not available; timing the fallback only")
    cases = [
        ("supermatrix d_S=2 d_E=2", "supermatrix", supermatrix_case(2, 2)),
        ("supermatrix d_S=4 d_E=4", "supermatrix", supermatrix_case(4, 4)),
        ("supermatrix d_S=4 d_E=16", "supermatrix", supermatrix_case(4, 16)),
        ("sample_chain S=3 order=2 n=1e5", "sample_chain", chain_case(3, 2, 100_000)),
    ]
    seq = np.asarray(fallback.sample_chain(*chain_case(3, 2, 100_000)))
    cases.append(("count_transitions S=3 order=2 n=1e5", "count_transitions", (seq, 3, 2)))

    print(f"{'kernel':38s} {'python':>12s} {'cython':>12s} {'speedup':>8s} {'max diff':>9s}")
    for label, name, case in cases:
        t_py = best_time(getattr(fallback, name), case, args.repeat)
        if _kernels.compiled is None:
            print(f"{label:38s} {t_py * 1e6:10.1f}us")
            continue
        t_cy = best_time(getattr(_kernels.compiled, name), case, args.repeat)
        diff = np.max(np.abs(np.asarray(getattr(fallback, name)(*case))
                             - np.asarray(getattr(_kernels.compiled, name)(*case))))
        print(f"{label:38s} {t_py * 1e6:10.1f}us {t_cy * 1e6:10.1f}us "
              f"{t_py / t_cy:7.1f}x {diff:9.1e}")


if __name__ == "__main__":
    main()
