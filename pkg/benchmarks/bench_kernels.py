"""Compiled kernels versus their pure-Python originals.

Times each hot kernel through numba and through ``.py_func`` on identical
inputs, checks the outputs agree, then times a whole simulate + fit + score
pipeline in a subprocess with and without ``HAWKES_SCORE_DISABLE_NUMBA``.

    python3 benchmarks/bench_kernels.py --horizon 2000 --repeat 5
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from hawkes_score import _kernels as K
from hawkes_score._accel import DISABLE_ENV, HAS_NUMBA
from hawkes_score.marks import MarkModel
from hawkes_score.model import BoostSpec, HawkesParams
from hawkes_score.rng import stream
from hawkes_score.simulation import SimConfig, simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def kernel_cases(horizon):
    s = simulate(SimConfig(HawkesParams(0.5, 0.5, 1.0), horizon, seed=1))
    G = np.ascontiguousarray(s.marks - s.marks.mean(axis=0))
    rng = stream(2, 0)
    n = 4 * s.n_events + 64
    gaps, unif = rng.standard_exponential(2 * n), rng.random(2 * n)
    model = MarkModel.iid_gaussian()
    noise = model.draw_noise(rng, n)
    spec = BoostSpec("linear")

    def sim(fn):
        times, marks = np.empty(n), np.empty((n, 1))
        return fn(0.5, 0.5, 1.0, 0.0, -20.0, horizon, 1e6, model.code, model.kernel_params(), np.zeros(1),
                  spec.code, np.zeros(1), 1.0, gaps, unif, noise, times, marks)[:2]

    return s.n_events, {
        "loglik_derivs": (K.loglik_derivs, lambda f: f(s.times, s.horizon, 0.5, 0.5, 1.0, False, 2)),
        "intensity_recursion": (K.intensity_recursion, lambda f: f(s.times, 0.5, 0.5, 1.0, 0.0)),
        "score_and_info": (K.score_and_info, lambda f: f(s.times, s.horizon, G, 0.5, 0.5, 1.0, 0.0)),
        "simulate_kernel": (K.simulate_kernel, sim),
    }


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=0)


PIPELINE = """
import json, time
from hawkes_score import BoostSpec, HawkesParams, SimConfig, simulate, run_score_test
cfg = SimConfig(HawkesParams(0.5, 0.5, 1.0), {horizon}, seed=3)
simulate(cfg); run_score_test(simulate(cfg), BoostSpec("linear"))  # warm-up / compile
t0 = time.perf_counter()
for k in range({repeat}):
    q = run_score_test(simulate(cfg.with_(seed=k)), BoostSpec("linear")).statistic
print(json.dumps({{"seconds": (time.perf_counter() - t0) / {repeat}}}))
"""


def pipeline_seconds(disable, horizon, repeat):
    env = dict(os.environ)
    env.pop(DISABLE_ENV, None)
    if disable:
        env[DISABLE_ENV] = "1"
    code = PIPELINE.format(horizon=horizon, repeat=repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)["seconds"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=2000.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args(argv)

    if not HAS_NUMBA:
        print("numba unavailable or disabled; both columns run the Python path")
    n, cases = kernel_cases(args.horizon)
    print(f"events per stream: {n}")
    print(f"{'kernel':<22}{'numba [ms]':>12}{'python [ms]':>13}{'speed-up':>10}  agree")
    for name, (fn, call) in cases.items():
        call(fn)  # compile outside the timing
        t_fast, a = best_of(lambda: call(fn), args.repeat)
        t_slow, b = best_of(lambda: call(fn.py_func), max(1, args.repeat // 2))
        print(f"{name:<22}{1e3 * t_fast:>12.3f}{1e3 * t_slow:>13.3f}{t_slow / t_fast:>9.1f}x  {_close(a, b)}")

    if not args.skip_pipeline:
        fast = pipeline_seconds(False, args.horizon, args.repeat)
        slow = pipeline_seconds(True, args.horizon, max(1, args.repeat // 2))
        print(f"\nsimulate + fit + score-test, per stream: numba {1e3 * fast:.1f} ms, "
              f"{DISABLE_ENV}=1 {1e3 * slow:.1f} ms ({slow / fast:.1f}x)")


if __name__ == "__main__":
    main()
