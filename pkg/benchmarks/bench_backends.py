"""Steps per second of the compiled core against the pure-Python fallback.

    python benchmarks/bench_backends.py [--steps N] [--dims 20,100]

Both backends consume the same pre-drawn noise, so the timings isolate the
MH loop itself; noise generation is timed separately.
"""
import argparse
import time

import numpy as np

from mpcn import _backend
from mpcn.rand import RngStream
from mpcn.samplers import ProposalKernel, run_chain
from mpcn.targets import make_target

KERNELS = {
    "rwm_gauss": lambda d: ProposalKernel("rwm_gauss", sigma_d=d ** -0.5),
    "pcn": lambda d: ProposalKernel("pcn", rho=0.8),
    "mpcn": lambda d: ProposalKernel("mpcn", rho=0.8),
}


def timed(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--python-steps", type=int, default=20_000)
    p.add_argument("--dims", default="20,100")
    args = p.parse_args()
    if _backend.compiled is None:
        print("compiled core not available; only the Python fallback is timed")
    print(f"{'kernel':<10} {'d':>4} {'backend':<8} {'steps/s':>12} {'speedup':>8}")
    for d in (int(v) for v in args.dims.split(",")):
        target = make_target("student_t", d)
        x0 = np.ones(d)
        for name, make in KERNELS.items():
            kern = make(d)
            rates = {}
            for backend, n in (("python", args.python_steps), ("cython", args.steps)):
                if backend == "cython" and _backend.compiled is None:
                    continue
                t = timed(lambda: run_chain(x0, kern, target, n, RngStream(0), backend=backend))
                rates[backend] = n / t
            noise = timed(lambda: kern.draw_noise(args.steps, d, RngStream(0))) / args.steps
            for backend, r in rates.items():
                speed = r / rates["python"]
                print(f"{name:<10} {d:>4} {backend:<8} {r:>12,.0f} {speed:>7.1f}x")
            print(f"{name:<10} {d:>4} {'noise':<8} {1 / noise:>12,.0f}   (draws only)")


if __name__ == "__main__":
    main()
