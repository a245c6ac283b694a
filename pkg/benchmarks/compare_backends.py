"""Benchmark the compiled kernel lane against the pure-Python fallback.

Kernel micro-benchmarks run both lanes in-process; the end-to-end descent
benchmark re-launches this script with ISSGD_BACKEND pinned so the whole
stack binds to one lane.

    python benchmarks/compare_backends.py
"""

import argparse
import os
import random
import subprocess
import sys
import time
from array import array


def _rand(rng, count):
    return array("d", [rng.uniform(-1.0, 1.0) for _ in range(count)])


def _time(fn, repeat=200):
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def kernel_benchmarks():
    from issgd import _kernel_py as kp

    try:
        from issgd import _kernel_cy as kc
    except ImportError:
        print("compiled lane not built; run pip install -e . with Cython first")
        return

    rng = random.Random(0)
    n = 6
    a = _rand(rng, n * n)
    b = _rand(rng, n * n)
    shifted = array("d", a)
    for i in range(n):
        shifted[i * n + i] -= 4.0  # Hurwitz shift for the eig case

    def lyap(kernel):
        m = kernel.kron_sum(shifted, shifted, n)
        lu, piv, ok, _, _ = kernel.lu_factor(m, n * n)
        kernel.lu_solve_factored(lu, piv, n * n, _rand(rng, n * n), 1)

    cases = [
        ("mat_mul 6x6", lambda k: k.mat_mul(a, b, n, n, n), 2000),
        ("sym_eig 6x6", lambda k: k.sym_eig(a, n), 500),
        ("eig_real_parts 6x6", lambda k: k.eig_real_parts(shifted, n, 240), 500),
        ("lyapunov solve n=6 (kron 36x36)", lyap, 100),
    ]
    print(f"{'kernel op':35s} {'pure':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, fn, repeat in cases:
        tp = _time(lambda: fn(kp), repeat)
        tc = _time(lambda: fn(kc), repeat)
        print(f"{name:35s} {tp * 1e6:10.1f}us {tc * 1e6:10.1f}us {tp / tc:8.1f}x")


def end_to_end_worker(steps):
    from issgd import BACKEND, descent, problems

    sample = problems.random_plant(4, 2, 3)
    lp = descent.LqrProblem(sample.plant, opt=sample.opt)
    method = descent.Method(kind="standard")
    model = descent.PerturbationModel(kind="iid_ball", epsilon=0.001, seed=1)
    t0 = time.perf_counter()
    traj = descent.run(lp, method, model, sample.K0.K, max_iter=steps, stop_tol=0.0)
    dt = time.perf_counter() - t0
    print(f"{BACKEND}\t{dt:.3f}\t{len(traj.records) - 1}")


def end_to_end(steps):
    print(f"\nend-to-end: {steps} standard-method steps on a random n=4, m=2 plant")
    times = {}
    for lane in ("pure", "compiled"):
        env = dict(os.environ, ISSGD_BACKEND=lane)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--worker", str(steps)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        lane_name, seconds, nsteps = out.stdout.strip().split("\t")
        times[lane_name] = float(seconds)
        print(f"  {lane_name:9s} {float(seconds):8.3f}s  ({nsteps} steps)")
    print(f"  speedup   {times['pure'] / times['compiled']:8.1f}x")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--worker", type=int, default=None, help=argparse.SUPPRESS)
    parser.add_argument("--steps", type=int, default=1000)
    args = parser.parse_args()
    if args.worker is not None:
        end_to_end_worker(args.worker)
        return
    kernel_benchmarks()
    end_to_end(args.steps)


if __name__ == "__main__":
    main()
