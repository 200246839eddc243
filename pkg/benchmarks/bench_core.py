"""Compiled vs NumPy backend for the hot kernels.

    python benchmarks/bench_core.py --nodes 20000 --steps 400

Both backends are imported directly, so the comparison does not depend on
RADKERNEL_PURE_PYTHON. The script also checks that the two agree.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from radkernel._core import _pykernels

try:
    from radkernel._core import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def march_problem(n: int, steps: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    h = np.full(n, 1.0 / n)
    mass = h.copy()
    k = 1.0 / h[:-1]
    diag = np.zeros(n)
    diag[:-1] += k
    diag[1:] += k
    diag[-1] += 1.0 / h[-1]
    # lower[i] couples node i to i-1, upper[i] couples i to i+1
    lower = np.concatenate([[0.0], -k])
    upper = np.concatenate([-k, [0.0]])
    u0 = np.exp(-((np.arange(n) - n / 3) / (n / 20)) ** 2) + 1e-3 * rng.random(n)
    dts = np.full(steps, 1e-4)
    thetas = np.full(steps, 0.5)
    thetas[:2] = 1.0
    save = np.zeros(steps, dtype=np.uint8)
    save[-1] = save[steps // 2] = 1
    return mass, lower, diag, upper, u0, dts, thetas, save, 1.0 / h[-1]


def powerlaw_problem(n: int):
    r = np.geomspace(1e-6, 1e6, n)
    return r**-0.3 * (1 + np.sin(np.log(r))) ** 2 + 1e-12, r, 0.0


def bench(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=20000)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    cases = {
        "theta_march": (march_problem(args.nodes, args.steps), lambda m: m.theta_march),
        "cumulative_powerlaw": (powerlaw_problem(args.nodes * 10), lambda m: m.cumulative_powerlaw),
    }
    print(f"{'kernel':<22}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'max diff':>12}")
    for name, (prob, pick) in cases.items():
        t_py = bench(pick(_pykernels), prob, args.repeat)
        if _ckernels is None:
            print(f"{name:<22}{1e3 * t_py:>14.2f}{'n/a':>14}")
            continue
        t_c = bench(pick(_ckernels), prob, args.repeat)
        a, b = pick(_pykernels)(*prob), pick(_ckernels)(*prob)
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / (np.abs(np.asarray(a)) + 1e-300)))
        print(f"{name:<22}{1e3 * t_py:>14.2f}{1e3 * t_c:>14.2f}{t_py / t_c:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
