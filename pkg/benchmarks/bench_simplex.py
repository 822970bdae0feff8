#!/usr/bin/env python3
"""Benchmark the compiled simplex kernel against the numpy fallback.

Runs the same LP workloads through both pivot-loop backends and reports
wall times and the speedup.  The two backends are bit-compatible, which the
benchmark also verifies on every solve.

Usage:
    python benchmarks/bench_simplex.py [--controller-solves N] [--random-lps N]
"""

import argparse
import time

import numpy as np

import caccsim.lp as lp_mod
from caccsim import _simplex_ref
from caccsim.kinematics import RelativeState, build_system
from caccsim.mpc import CostSpec, HorizonSpec, build_nominal, build_robust, synth_nilpotent
from caccsim.safety import BrakingSpec, ComfortSpec, constraint_block

try:
    from caccsim import _simplex_core
except ImportError:
    _simplex_core = None


def controller_problems(n):
    """Horizon LPs sampled along plausible states (the hot production load)."""
    braking = BrakingSpec(10.0, 10.0, 0.3)
    comfort = ComfortSpec(t_c_min=2.0, a_min=-2.5, a_max=2.5, v_max=40.0)
    cost = CostSpec.default()
    hz = HorizonSpec(T=10, T_s=0.05)
    rng = np.random.default_rng(5)
    problems = []
    while len(problems) < n:
        v_l = float(rng.uniform(2, 35))
        x0 = RelativeState(
            float(rng.uniform(6, 35)),
            v_l,
            float(np.clip(v_l + rng.uniform(-3, 3), 0, 39)),
        )
        a_l = float(rng.uniform(-6, 2))
        sysk = build_system(hz.T_s, a_l=a_l, W=(0.0, 1.2, 0.0))
        blocks = [constraint_block(x0, k, braking, comfort, sysk) for k in range(1, hz.T + 1)]
        problems.append(build_nominal(x0, sysk, cost, hz, blocks))
        problems.append(build_robust(x0, sysk, cost, hz, blocks, K0=synth_nilpotent(sysk)).base)
    return problems[:n]


def random_problems(n):
    rng = np.random.default_rng(6)
    problems = []
    for _ in range(n):
        nv = int(rng.integers(20, 60))
        m = int(rng.integers(20, 80))
        A = rng.normal(size=(m, nv))
        x_feas = rng.uniform(0, 1, nv)
        b = A @ x_feas + rng.uniform(0.05, 1.0, m)
        c = rng.normal(size=nv)
        A_ub = np.vstack([A, -np.eye(nv), np.eye(nv)])
        b_ub = np.concatenate([b, np.zeros(nv), np.full(nv, 3.0)])
        problems.append(lp_mod.LpProblem(nv, c, np.zeros((0, nv)), np.zeros(0), A_ub, b_ub))
    return problems


def run_backend(problems, kernel):
    saved = lp_mod._kernel
    lp_mod._kernel = kernel
    try:
        t0 = time.perf_counter()
        sols = [lp_mod.solve(p) for p in problems]
        elapsed = time.perf_counter() - t0
    finally:
        lp_mod._kernel = saved
    return elapsed, sols


def bench(name, problems):
    t_py, sols_py = run_backend(problems, _simplex_ref)
    if _simplex_core is None:
        print(f"{name:18s} python {t_py:7.3f} s   (compiled kernel not built)")
        return
    t_cy, sols_cy = run_backend(problems, _simplex_core)
    mismatches = sum(
        a.status is not b.status or a.z.tobytes() != b.z.tobytes()
        for a, b in zip(sols_py, sols_cy)
    )
    pivots = sum(s.iterations for s in sols_cy)
    print(
        f"{name:18s} python {t_py:7.3f} s   cython {t_cy:7.3f} s   "
        f"speedup {t_py / t_cy:5.2f}x   pivots {pivots:6d}   mismatches {mismatches}"
    )
    if mismatches:
        raise SystemExit("backends disagree; investigate before trusting results")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--controller-solves", type=int, default=60)
    parser.add_argument("--random-lps", type=int, default=40)
    args = parser.parse_args()

    print(f"active backend at import: {lp_mod.backend_name()}")
    bench("controller LPs", controller_problems(args.controller_solves))
    bench("random dense LPs", random_problems(args.random_lps))


if __name__ == "__main__":
    main()
