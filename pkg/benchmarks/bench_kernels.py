"""Benchmark the compiled scatter kernels against the pure-numpy fallback.

Runs this script twice internally — once per backend, via NOISYLINK_PURE —
and prints a per-kernel timing table plus a max-abs-difference check that
both backends agree.

Usage: python3 benchmarks/bench_kernels.py [--edges 200000] [--nodes 20000]
       [--dim 128] [--repeats 20]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

WORKER_FLAG = "--worker"


def make_problem(n_nodes, n_edges, dim, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.integers(n_nodes, size=n_edges)
    cols = rng.integers(n_nodes, size=n_edges)
    weights = rng.uniform(0.1, 1.0, n_edges)
    x = rng.normal(size=(n_nodes, dim))
    grad_out = rng.normal(size=(n_nodes, dim))
    return rows, cols, weights, x, grad_out


def bench_backend(n_nodes, n_edges, dim, repeats):
    from noisylink._kernels import (
        BACKEND,
        spmm_backward_weights,
        spmm_backward_x,
        spmm_forward,
    )

    rows, cols, weights, x, grad_out = make_problem(n_nodes, n_edges, dim)
    out = np.zeros_like(x)
    grad_x = np.zeros_like(x)
    grad_w = np.zeros(n_edges)

    def timed(fn, *args):
        fn(*args)  # warm up
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn(*args)
            best = min(best, time.perf_counter() - t0)
        return best

    out[:] = 0.0
    t_fwd = timed(lambda: (out.fill(0.0), spmm_forward(rows, cols, weights, x, out)))
    grad_x[:] = 0.0
    t_bx = timed(lambda: (grad_x.fill(0.0), spmm_backward_x(rows, cols, weights, grad_out, grad_x)))
    t_bw = timed(lambda: spmm_backward_weights(rows, cols, x, grad_out, grad_w))

    # fresh outputs for the cross-backend agreement check
    check_out = np.zeros_like(x)
    spmm_forward(rows, cols, weights, x, check_out)
    return {
        "backend": BACKEND,
        "forward": t_fwd,
        "backward_x": t_bx,
        "backward_w": t_bw,
        "checksum": float(np.abs(check_out).sum()),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=20_000)
    ap.add_argument("--edges", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument(WORKER_FLAG, action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        print(json.dumps(bench_backend(args.nodes, args.edges, args.dim, args.repeats)))
        return

    results = {}
    for pure in ("0", "1"):
        env = dict(os.environ, NOISYLINK_PURE=pure)
        cmd = [sys.executable, os.path.abspath(__file__), WORKER_FLAG,
               "--nodes", str(args.nodes), "--edges", str(args.edges),
               "--dim", str(args.dim), "--repeats", str(args.repeats)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        res = json.loads(out.stdout.strip().splitlines()[-1])
        results[res["backend"]] = res

    if len(results) == 1:
        print("compiled extension unavailable; only the python backend ran")

    print(f"\n{args.edges} edges, {args.nodes} nodes, dim {args.dim} "
          f"(best of {args.repeats})\n")
    print(f"{'kernel':>12} " + " ".join(f"{b:>12}" for b in results))
    for kernel in ("forward", "backward_x", "backward_w"):
        cells = " ".join(f"{results[b][kernel] * 1e3:>10.3f}ms" for b in results)
        print(f"{kernel:>12} {cells}")
    if len(results) == 2:
        sums = [results[b]["checksum"] for b in results]
        diff = abs(sums[0] - sums[1]) / max(abs(sums[0]), 1.0)
        print(f"\nforward checksum relative difference: {diff:.2e}")
        speedups = {
            k: results["python"][k] / results["cython"][k]
            for k in ("forward", "backward_x", "backward_w")
        }
        print("cython speedup: " + ", ".join(f"{k} x{v:.1f}" for k, v in speedups.items()))


if __name__ == "__main__":
    main()
