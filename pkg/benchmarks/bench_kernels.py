"""Time each hot kernel under the numba and numpy backends.

Run with ``python3 benchmarks/bench_kernels.py``.  The first numba call of
each kernel is excluded (compilation and cache load).
"""

import timeit

import numpy as np

from durlab import _kernels


def cases(rng):
    y = rng.standard_normal(2000) * 0.1 + 0.05
    u = rng.standard_normal((5000, 3))
    starts = rng.integers(0, 5000, 5000 // 18 + 1)
    shocks = rng.standard_normal(100_000)
    return {
        "ar1_filter n=1e5": lambda k: k.ar1_filter(0.9, shocks, 0.0),
        "kalman_loglik n=2000": lambda k: k.kalman_loglik(y, 0.05, 0.3, 0.1, 0.05, 0.2),
        "ma1_loglik n=2000": lambda k: k.ma1_loglik(y, 0.05, 0.4, 0.1),
        "bartlett_meat 5000x3 L=18": lambda k: k.bartlett_meat(u, 18),
        "block_indices n=5000": lambda k: k.block_indices(5000, 18, starts),
    }


def main(repeat: int = 5, number: int = 20) -> None:
    rng = np.random.default_rng(0)
    impls = {"numpy": _kernels.numpy_impl}
    if _kernels.numba_impl is not None:
        impls["numba"] = _kernels.numba_impl
    print(f"{'kernel':<28}" + "".join(f"{name:>14}" for name in impls) + f"{'speedup':>10}")
    for label, fn in cases(rng).items():
        times = {}
        for name, impl in impls.items():
            fn(impl)
            times[name] = min(timeit.repeat(lambda: fn(impl), repeat=repeat, number=number)) / number
        line = f"{label:<28}" + "".join(f"{times[n] * 1e3:>11.3f} ms" for n in impls)
        if "numba" in times:
            line += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
