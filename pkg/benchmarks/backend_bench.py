"""Compare the compiled and pure-Python tape backends.

Runs the differentiable grid model with identical inputs on every
available backend and reports forward time, backward time, node count
and tape memory.  Usage:

    python benchmarks/backend_bench.py [--vehicles 64,256] [--horizon 60]
"""

import argparse
import time

import numpy as np

from diffsim import Tape, available_backends
from diffsim.traffic import GridScenario, run_grid_diff


def bench_backend(backend, scn, horizon, repeats):
    fwd, bwd = [], []
    nodes = nbytes = 0
    offsets = np.zeros(scn.network.n_intersections)
    for _ in range(repeats):
        tape = Tape(backend=backend)
        t0 = time.perf_counter()
        res = run_grid_diff(scn, 0, horizon, offsets=offsets, tape=tape)
        t1 = time.perf_counter()
        res.tape.backward(res.objective)
        t2 = time.perf_counter()
        fwd.append(t1 - t0)
        bwd.append(t2 - t1)
        nodes, nbytes = tape.n_nodes, tape.nbytes
    return {
        "forward_s": float(np.median(fwd)),
        "backward_s": float(np.median(bwd)),
        "nodes": nodes,
        "mem_mb": nbytes / 1e6,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vehicles", default="64,256",
                    help="comma-separated vehicle counts")
    ap.add_argument("--horizon", type=float, default=60.0)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    counts = [int(x) for x in args.vehicles.split(",")]

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = (f"{'vehicles':>8} {'backend':>9} {'forward_s':>10} "
              f"{'backward_s':>11} {'nodes':>10} {'mem_mb':>8}")
    print(header)
    print("-" * len(header))
    results = {}
    for count in counts:
        scn = GridScenario(n_vehicles=count)
        for backend in backends:
            r = bench_backend(backend, scn, args.horizon, args.repeats)
            results[(count, backend)] = r
            print(f"{count:>8} {backend:>9} {r['forward_s']:>10.3f} "
                  f"{r['backward_s']:>11.3f} {r['nodes']:>10} "
                  f"{r['mem_mb']:>8.1f}")
    if "compiled" in backends and "python" in backends:
        print()
        for count in counts:
            c = results[(count, "compiled")]
            p = results[(count, "python")]
            tc = c["forward_s"] + c["backward_s"]
            tp = p["forward_s"] + p["backward_s"]
            print(f"vehicles {count}: compiled is {tp / tc:.2f}x faster")


if __name__ == "__main__":
    main()
