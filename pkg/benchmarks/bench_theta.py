"""Compare the compiled and numpy theta-series kernels.

Run with ``python benchmarks/bench_theta.py [--points 2000] [--repeat 20]``.
Both kernels are called directly on the same grid; the script prints the
median wall time per call and the largest disagreement between them.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from dynrmat import _theta_py
from dynrmat.elliptic import EllipticContext, _window


def _time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--order", type=int, default=2)
    parser.add_argument("--tau", type=complex, default=complex("0.1+1.2j"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    ctx = EllipticContext(args.tau)
    rng = np.random.default_rng(args.seed)
    z = rng.uniform(-0.5, 0.5, args.points) + 1j * rng.uniform(-0.6, 0.6, args.points)
    m_max = _window(z, ctx, ctx.tau, 1.0)
    call = (z, ctx.tau, 0.5, 1.0, m_max, args.order)

    backends = {"python": _theta_py.lattice_theta}
    try:
        from dynrmat import _theta_core
    except ImportError:
        print("compiled core not built; timing the numpy kernel only")
    else:
        backends["cython"] = _theta_core.lattice_theta

    print(f"points={args.points} order={args.order} m_max={m_max} repeat={args.repeat}")
    results = {}
    for name, fn in backends.items():
        results[name] = fn(*call)
        t = _time(lambda: fn(*call), args.repeat)
        print(f"{name:>7}: {1e3 * t:9.3f} ms/call  {1e9 * t / args.points:9.1f} ns/point")
    if len(results) == 2:
        ref = results["python"]
        diff = np.max(np.abs(results["cython"] - ref) / (np.abs(ref) + 1.0))
        print(f"max relative disagreement: {diff:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
