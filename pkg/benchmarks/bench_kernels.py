"""Benchmark the compiled topology kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 256,512,1024] [--repeat 5]
"""
import argparse
import time

import numpy as np

from qskyrm.scenarios import pipeline_state, spin_orbit_density
from qskyrm.topology import GridSpec, ModeMap, mode_stack, normalize_stokes
from qskyrm.topology import _kernels_py as kpy

try:
    from qskyrm.topology import _kernels as kcy
except ImportError:
    kcy = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def build_inputs(n):
    state = pipeline_state("heralded_local_B", 0.5, 0.5).state
    rho = spin_orbit_density(state, (-2, -4))
    modes = ModeMap((-2, -4))
    grid = GridSpec(n, n, 5.0)
    stack = np.ascontiguousarray(mode_stack(modes, grid))
    m_index = {l: i for i, l in enumerate(modes.ells)}
    tau = np.zeros((2, 2, 2, 2), dtype=complex)
    pol = {"R": 0, "L": 1}
    for i, bi in enumerate(rho.basis):
        for j, bj in enumerate(rho.basis):
            tau[m_index[bi[1]], m_index[bj[1]], pol[bi[0]], pol[bj[0]]] = \
                rho.matrix[i, j]
    from qskyrm.topology import reduced_stokes_field
    ns = normalize_stokes(reduced_stokes_field(rho, modes, grid), 0.0)
    mask = np.ascontiguousarray(ns.mask, dtype=np.uint8)
    return tau, stack, ns, mask, grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="256,512,1024")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = [("python", kpy)]
    if kcy is not None:
        backends.append(("cython", kcy))
    else:
        print("compiled extension not available; benchmarking fallback only")

    header = f"{'kernel':<16}{'grid':>8}" + "".join(
        f"{name + ' (ms)':>16}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for n in sizes:
        tau, stack, ns, mask, grid = build_inputs(n)
        cases = {
            "stokes_maps": lambda k: k.stokes_maps(tau, stack),
            "quadrature_sum": lambda k: k.quadrature_sum(
                ns.sx, ns.sy, ns.sz, mask, grid.dx, grid.dy),
            "solid_angle_sum": lambda k: k.solid_angle_sum(
                ns.sx, ns.sy, ns.sz, mask),
            "coverage_count": lambda k: k.coverage_count(
                ns.sx, ns.sy, ns.sz, mask, 16, 32),
        }
        for name, fn in cases.items():
            times = []
            for _, mod in backends:
                t, _ = best_of(lambda m=mod: fn(m), args.repeat)
                times.append(t)
            row = f"{name:<16}{n:>6}^2" + "".join(
                f"{1e3 * t:>16.2f}" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)
    if len(backends) == 2:
        # cross-check: both backends must agree to 1e-12 on the estimators
        q_p = kpy.quadrature_sum(ns.sx, ns.sy, ns.sz, mask, grid.dx, grid.dy)
        q_c = kcy.quadrature_sum(ns.sx, ns.sy, ns.sz, mask, grid.dx, grid.dy)
        s_p = kpy.solid_angle_sum(ns.sx, ns.sy, ns.sz, mask)
        s_c = kcy.solid_angle_sum(ns.sx, ns.sy, ns.sz, mask)
        print(f"\nbackend agreement: quadrature {abs(q_p[0] - q_c[0]):.2e}, "
              f"solid angle {abs(s_p[0] - s_c[0]):.2e}")


if __name__ == "__main__":
    main()
