"""Compare the compiled kernels with the pure-Python reference.

Usage: python benchmarks/bench_kernels.py [--samples 2000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from volmodel import _pykernels as py
from volmodel.distributions import ModelKind

try:
    from volmodel import _kernels as cy
except ImportError:
    cy = None

PARAMS = {ModelKind.GAMMA: (1.3, 1.1), ModelKind.INVERSE_GAMMA: (1.3, 0.9), ModelKind.LOGNORMAL: (0.0, 1.0), ModelKind.WEIBULL: (1.2, 1.6)}


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if cy is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    s = np.sort(rng.lognormal(0.0, 1.0, args.samples))
    f = np.arange(1, args.samples + 1) / args.samples
    backends = (("compiled", cy), ("python", py))

    print(f"{'benchmark':<34}{'compiled':>12}{'python':>12}{'speedup':>10}")

    def row(name, make):
        t = {label: best_of(make(mod), args.repeat) for label, mod in backends}
        print(f"{name:<34}{t['compiled'] * 1e3:>10.3f}ms{t['python'] * 1e3:>10.3f}ms{t['python'] / t['compiled']:>9.0f}x")

    a = rng.uniform(0.2, 20.0, 500)
    x = a * rng.uniform(0.1, 3.0, 500)
    row("gammainc_pair x500", lambda m: lambda: [m.gammainc_pair(ai, xi) for ai, xi in zip(a, x)])
    for kind, (phi, theta) in PARAMS.items():
        row(f"cdf_sse {kind.label} n={args.samples}", lambda m, k=kind, p=phi, t=theta: lambda: m.cdf_sse(int(k), p, t, s, f))
    for kind, (phi, theta) in PARAMS.items():
        x0 = phi if kind == ModelKind.LOGNORMAL else np.log(phi)
        fit = lambda m, k=kind, x0=x0, t=theta: lambda: m.nelder_mead_sse(int(k), x0, np.log(t), 0.1, s, f, 1e-8, 2000)  # noqa: E731
        t_cy = best_of(fit(cy), args.repeat)
        t_py = best_of(fit(py), 1)
        print(f"{'simplex fit ' + kind.label:<34}{t_cy * 1e3:>10.3f}ms{t_py * 1e3:>10.3f}ms{t_py / t_cy:>9.0f}x")


if __name__ == "__main__":
    main()
