"""Compare the numba and numpy ladder-index kernels used in Fock assembly.

    python benchmarks/bench_assembly.py [--modes 32 64 128] [--repeat 5]

Both backends must return identical entries; the script checks that before
timing. Numba compilation is excluded by a warm-up call.
"""
import argparse
import time

import numpy as np

from hydrofine import _accel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--modes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        print("numba unavailable (or disabled via HYDROFINE_NUMBA); timing numpy only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<10} {'M':>5} {'n_max':>5} {'numpy [s]':>11} {'numba [s]':>11} {'speed-up':>9}")
    for M in args.modes:
        C = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
        C = C + C.conj().T
        for n_max in (1, 2):
            cases = {
                "creation": lambda b: _accel.creation_transitions(M, n_max, backend=b),
                "hop": lambda b: _accel.hop_entries(M, n_max, C, backend=b),
            }
            for name, fn in cases.items():
                ref = fn("numpy")
                t_np = best_of(lambda: fn("numpy"), args.repeat)
                if _accel.HAVE_NUMBA:
                    out = fn("numba")  # warm-up / compile
                    for a, b in zip(ref, out):
                        if not np.array_equal(a, b):
                            raise SystemExit(f"backend mismatch in {name} (M={M}, n_max={n_max})")
                    t_nb = best_of(lambda: fn("numba"), args.repeat)
                    print(f"{name:<10} {M:>5} {n_max:>5} {t_np:>11.4g} {t_nb:>11.4g} {t_np / t_nb:>8.1f}x")
                else:
                    print(f"{name:<10} {M:>5} {n_max:>5} {t_np:>11.4g} {'-':>11} {'-':>9}")


if __name__ == "__main__":
    main()
