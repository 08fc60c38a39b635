"""Time the numba and numpy kernel backends on crystal-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--n-ions 147] [--repeat 5]
"""

import argparse
import time

import numpy as np

from crystalgate import kernels
from crystalgate.crystal import TrapConfig, equilibrium


def _best(fn, repeat):
    fn()  # warm-up (also triggers numba compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-ions", type=int, default=147)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=20000)
    args = ap.parse_args()

    w = 2 * np.pi * 200e3
    trap = TrapConfig(args.n_ions, w, 50 * w)
    u = equilibrium(trap).positions / trap.length_unit
    beta2 = trap.beta**2
    rng = np.random.default_rng(0)
    omegas = rng.uniform(0.1, 4.0, 2 * args.n_ions)
    coup = np.ones_like(omegas)
    drive = np.sin(np.linspace(0, np.pi, 2 * args.steps + 1)) ** 2
    dt = 5.0 / args.steps

    print(f"N={args.n_ions}, modes={len(omegas)}, RK4 steps={args.steps}")
    print(f"{'kernel':<14}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}")
    names = ("energy", "gradient", "hessian", "min_distance", "rk4_modes")
    calls = {
        "energy": lambda k: (lambda: k[0](u, beta2)),
        "gradient": lambda k: (lambda: k[1](u, beta2)),
        "hessian": lambda k: (lambda: k[2](u, beta2)),
        "min_distance": lambda k: (lambda: k[3](u)),
        "rk4_modes": lambda k: (lambda: k[4](omegas, coup, drive, dt)),
    }
    for name in names:
        t_np = _best(calls[name](kernels.kernels("numpy")), args.repeat)
        t_nb = _best(calls[name](kernels.kernels("numba")), args.repeat)
        print(f"{name:<14}{t_np:>12.3e}{t_nb:>12.3e}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
