"""Backend benchmark: compiled rollout kernel vs pure-Python loop.

Usage: python -m ogdtrack.benchmark [--runs 20] [--horizon 500] [--seed 0]
"""

import argparse
import time

import numpy as np

from . import _backend
from .cost_model import generate_random_setpoints
from .lin_system import build_controllability
from .sim_harness import DEMO_ETA_RANGE, DEMO_GAMMA_V, DEMO_GAMMA_X, demo_system


def _workload(runs, horizon, seed):
    sys = demo_system()
    ctrb = build_controllability(sys)
    seqs = []
    for j in range(1, runs + 1):
        seq = generate_random_setpoints(
            sys, horizon, 0.25 * j / runs, DEMO_ETA_RANGE,
            seed=np.random.SeedSequence(entropy=seed, spawn_key=(j,)),
        )
        seqs.append(seq.minimizers())
    return sys, ctrb, seqs


def _time_backend(sys, ctrb, seqs, horizon, backend):
    x0 = np.zeros(sys.n)
    v0 = np.zeros(sys.m)
    t0 = time.perf_counter()
    outputs = []
    for thetas, etas in seqs:
        outputs.append(_backend.rollout_quadratic(
            sys, ctrb, DEMO_GAMMA_V, DEMO_GAMMA_X, 1.0, 1.0,
            x0, v0, thetas, etas, backend=backend,
        ))
    elapsed = time.perf_counter() - t0
    return elapsed, outputs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=20)
    parser.add_argument("--horizon", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    sys, ctrb, seqs = _workload(args.runs, args.horizon, args.seed)
    steps = args.runs * args.horizon

    t_py, out_py = _time_backend(sys, ctrb, seqs, args.horizon, "python")
    print(f"python:   {t_py:8.3f} s  ({steps / t_py:10.0f} steps/s)")

    if _backend.HAVE_COMPILED:
        t_c, out_c = _time_backend(sys, ctrb, seqs, args.horizon, "compiled")
        print(f"compiled: {t_c:8.3f} s  ({steps / t_c:10.0f} steps/s)")
        print(f"speedup:  {t_py / t_c:8.1f}x")
        worst = max(
            float(np.max(np.abs(a - b)))
            for run_py, run_c in zip(out_py, out_c)
            for a, b in zip(run_py, run_c)
        )
        print(f"max |python - compiled| over all trajectories: {worst:.3g}")
    else:
        print("compiled: extension not built")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
