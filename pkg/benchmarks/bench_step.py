"""Benchmark the compiled stepping kernels against the pure-Python fallback.

Times the local time-stepping hot path (one coarse product plus the inner
substep sweep) on the locally refined benchmark meshes, by monkeypatching
the kernel triple so both backends drive the identical integrator code.

    python benchmarks/bench_step.py [--steps N]
"""

import argparse
import time

import numpy as np

import ltswaves.kernels as kernels
import ltswaves.stepping as stepping
from ltswaves.coeffs import coefficient_set
from ltswaves.harness.exact import state_sampler
from ltswaves.mesh import build_mesh
from ltswaves.spacedisc import assemble, to_first_order
from ltswaves.stepping import SchemeConfig, lts_ab_step, warm_start

CASES = [
    # family, l, k, p, h
    ("cg", 1, 2, 2, 0.01),
    ("cg", 1, 2, 7, 0.01),
    ("ipdg", 1, 2, 2, 0.01),
    ("ipdg", 2, 3, 5, 0.02),
    ("ndg", 2, 3, 5, 0.02),
    ("ndg", 3, 4, 2, 0.02),
]


def bench_case(family, l, k, p, h, n_steps, backend):
    mesh = build_mesh((0, 6), (2, 4), h, p)
    system = to_first_order(assemble(family, mesh, l, c=1.0, sigma=0.1))
    cs = coefficient_set(k, p)
    dt = 1e-5  # stability is irrelevant for timing
    cfg = SchemeConfig(k, p, dt)
    hist, _ = warm_start(system, cfg, cs, exact=state_sampler(system, 0.1))
    triple = kernels.get_backend(backend)
    saved = kernels.csr_matvec, kernels.axpy, kernels.lts_sweep
    kernels.csr_matvec, kernels.axpy, kernels.lts_sweep = triple
    stepping.kernels = kernels
    try:
        for _ in range(50):  # warm the caches
            lts_ab_step(system, cs, hist, dt)
        t0 = time.perf_counter()
        for _ in range(n_steps):
            lts_ab_step(system, cs, hist, dt)
        elapsed = time.perf_counter() - t0
    finally:
        kernels.csr_matvec, kernels.axpy, kernels.lts_sweep = saved
    return system.dim, elapsed / n_steps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    backends = ["python"]
    try:
        kernels.get_backend("native")
        backends.insert(0, "native")
    except ImportError:
        print("compiled extension not built; timing the fallback only")
    header = f"{'case':>24} {'dim':>7} " + " ".join(f"{b:>12}" for b in backends)
    print(header + ("   speedup" if len(backends) == 2 else ""))
    for case in CASES:
        family, l, k, p, h = case
        label = f"{family} P{l} k={k} p={p} h={h}"
        times = {}
        dim = None
        for b in backends:
            dim, per_step = bench_case(family, l, k, p, h, args.steps, b)
            times[b] = per_step
        row = f"{label:>24} {dim:>7} " + " ".join(
            f"{times[b] * 1e6:>9.1f} us" for b in backends
        )
        if len(backends) == 2:
            row += f"   {times['python'] / times['native']:>6.2f}x"
        print(row)


if __name__ == "__main__":
    main()
