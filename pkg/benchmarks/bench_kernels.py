#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Run from the repository root after building the extension:

    python benchmarks/bench_kernels.py

Times the random-variate kernels at data-generation scale and the tree
kernels at boosting scale, then an end-to-end boosting fit under each
flavour (the fallback fit is driven through GENCAL_PURE_PYTHON in a
subprocess so the import-time selection is exercised for real).
"""

import subprocess
import sys
import time

import numpy as np

from gencal._kernels import compiled, fallback


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, t_compiled, t_fallback):
    speedup = t_fallback / t_compiled if t_compiled > 0 else float("inf")
    print(f"{name:<34} {t_compiled * 1e3:>10.2f} ms {t_fallback * 1e3:>12.2f} ms "
          f"{speedup:>8.1f}x")


def main():
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return 1

    print(f"{'kernel':<34} {'compiled':>13} {'fallback':>15} {'speedup':>8}")

    n = 5_000_000
    row("normals (5e6)",
        timeit(lambda: compiled.normals(1, 0, n)),
        timeit(lambda: fallback.normals(1, 0, n)))

    lam = np.ascontiguousarray(np.exp(np.random.default_rng(0).uniform(-2.5, 1.2, 1_000_000)))
    pexp, loglam = np.exp(-lam), np.log(lam)
    row("poisson inversion (1e6, lam<10)",
        timeit(lambda: compiled.poisson(2, 0, lam, pexp, loglam)),
        timeit(lambda: fallback.poisson(2, 0, lam, pexp, loglam)))

    lam_big = np.ascontiguousarray(np.full(100_000, 40.0))
    pb, lb = np.exp(-lam_big), np.log(lam_big)
    row("poisson rejection (1e5, lam=40)",
        timeit(lambda: compiled.poisson(3, 0, lam_big, pb, lb)),
        timeit(lambda: fallback.poisson(3, 0, lam_big, pb, lb)))

    row("fisher-yates take (5k of 1e6)",
        timeit(lambda: compiled.fisher_yates_take(4, 0, 1_000_000, 5000)),
        timeit(lambda: fallback.fisher_yates_take(4, 0, 1_000_000, 5000)))

    rng = np.random.default_rng(7)
    x = np.ascontiguousarray(rng.uniform(-1, 1, (3750, 5)))
    g = rng.standard_normal(3750)
    order = np.vstack([np.argsort(x[:, j], kind="stable").astype(np.int32)
                       for j in range(5)])
    for depth in (1, 5):
        row(f"grow_tree (n=3750, depth={depth})",
            timeit(lambda: compiled.grow_tree(x, g, order, depth, 38), repeat=10),
            timeit(lambda: fallback.grow_tree(x, g, order, depth, 38), repeat=10))

    tree = compiled.grow_tree(x, g, order, 5, 38)
    row("apply_tree (n=3750, depth=5)",
        timeit(lambda: compiled.apply_tree(tree[0], tree[1], tree[2], tree[3], x), repeat=10),
        timeit(lambda: fallback.apply_tree(tree[0], tree[1], tree[2], tree[3], x), repeat=10))

    # end-to-end: 200 depth-1 trees on a 5000-row training set, per flavour
    script = (
        "import time, numpy as np\n"
        "from gencal.simdata import SimConfig, generate\n"
        "from gencal.boosting import BoostConfig, boost_fit\n"
        "from gencal import KERNEL_FLAVOR\n"
        "_, train, _ = generate(SimConfig(n_population=100_000, seed=1))\n"
        "t0 = time.perf_counter()\n"
        "boost_fit(train.X, train.y, BoostConfig(n_trees=200, depth=1, seed=3))\n"
        "print(f'{KERNEL_FLAVOR} boost_fit(T=200,d=1,n=5000): "
        "{time.perf_counter() - t0:.2f}s')\n"
    )
    for env_value in ("0", "1"):
        out = subprocess.run(
            [sys.executable, "-c", script],
            env={"GENCAL_PURE_PYTHON": env_value, "PATH": "/usr/bin:/bin:/usr/local/bin"},
            capture_output=True, text=True)
        print(out.stdout.strip() or out.stderr.strip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
