"""Time the numba and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--horizon N] [--repeat K]

Both backends are called directly (the env flag only picks the default), and
their outputs are asserted bit-identical before timings are printed.
"""
import argparse
import time

import numpy as np

from maxweight import _kernels
from maxweight._accel import HAVE_NUMBA
from maxweight.instances import random_instance
from maxweight.markov import sample_path
from maxweight.rng import cumulative_rows, stream


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    spec, _ = random_instance(args.seed, max_states=4, max_queues=3, max_actions=5)
    t = spec.tables
    T = args.horizon
    states = sample_path(spec.chain, 0, T, args.seed)
    cum = cumulative_rows(spec.chain.P)
    u = stream(args.seed).random(T - 1)
    q0 = np.zeros(spec.r)
    pi = np.ascontiguousarray(spec.pi)
    _, q = _kernels.qla_run_np(states, t.cost, t.arr, t.srv, t.nact, 10.0, q0)
    gams = q[:-1]

    cases = {
        "sample_chain": (
            lambda: _kernels.sample_chain_nb(cum, 0, u),
            lambda: _kernels.sample_chain_np(cum, 0, u),
        ),
        "qla_run": (
            lambda: _kernels.qla_run_nb(states, t.cost, t.arr, t.srv, t.nact, 10.0, q0),
            lambda: _kernels.qla_run_np(states, t.cost, t.arr, t.srv, t.nact, 10.0, q0),
        ),
        "dual_batch": (
            lambda: _kernels.dual_batch_nb(states, gams, t.cost, t.arr, t.srv, t.nact, 10.0),
            lambda: _kernels.dual_batch_np(states, gams, t.cost, t.arr, t.srv, t.nact, 10.0),
        ),
        "ascent(5000 it)": (
            lambda: _kernels.ascent_nb(t.cost, t.arr, t.srv, t.nact, pi, 10.0, np.zeros(spec.r), 2.0, 10.0, 5000, np.inf, 0.0, False),
            lambda: _kernels.ascent_np(t.cost, t.arr, t.srv, t.nact, pi, 10.0, np.zeros(spec.r), 2.0, 10.0, 5000, np.inf, 0.0, False),
        ),
    }
    print(f"instance: M={spec.M} r={spec.r} horizon={T}")
    print(f"{'kernel':<18}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, (nb, npy) in cases.items():
        nb()  # compile
        t_nb, out_nb = best_of(nb, args.repeat)
        t_np, out_np = best_of(npy, args.repeat)
        out_nb = out_nb if isinstance(out_nb, tuple) else (out_nb,)
        out_np = out_np if isinstance(out_np, tuple) else (out_np,)
        for a, b in zip(out_nb, out_np):
            assert np.asarray(a).tobytes() == np.asarray(b).tobytes(), f"{name}: backends differ"
        print(f"{name:<18}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
