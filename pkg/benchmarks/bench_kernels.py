"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 16 64 256] [--repeat 5]

Each kernel runs on random reply trees of the given sizes; the table reports
the best of ``--repeat`` timings per backend and the speed-up.  Outputs of the
two backends are compared on every input before timing.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from hategraph import kernels
from hategraph.common import GraphInputs
from hategraph.synthgen import random_thread

HEADS = 4
HEAD_DIM = 8


def make_case(n: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    g = random_thread(rng, n, labeled=False)
    inputs = GraphInputs.from_graph(g, np.zeros((n, 1)))
    parents = g.parent_indices()
    dist = np.minimum(inputs.distances(), 8)
    indptr, indices = inputs.neighbors()
    return {
        "parents": parents,
        "dist": dist,
        "scores": rng.normal(size=(HEADS, n, n)),
        "bias": rng.normal(size=(HEADS, 9)),
        "dprobs": rng.normal(size=(HEADS, n, n)),
        "z": rng.normal(size=(HEADS, n, HEAD_DIM)),
        "s_src": rng.normal(size=(HEADS, n)),
        "s_dst": rng.normal(size=(HEADS, n)),
        "dout": rng.normal(size=(HEADS, n, HEAD_DIM)),
        "indptr": indptr,
        "indices": indices,
    }


def workloads(c: dict) -> dict:
    def softmax_pair():
        p = kernels.biased_softmax(c["scores"], c["bias"], c["dist"])
        return kernels.biased_softmax_backward(p, c["dprobs"], c["dist"], 9)

    def gat_pair():
        out, cache = kernels.neighbor_attention(c["z"], c["s_src"], c["s_dst"], c["indptr"], c["indices"], 0.2)
        return out, kernels.neighbor_attention_backward(c["dout"], cache)

    return {
        "tree_distances": lambda: kernels.tree_distances(c["parents"]),
        "biased_softmax fwd+bwd": softmax_pair,
        "neighbor_attention fwd+bwd": gat_pair,
    }


def _flatten(x):
    if isinstance(x, tuple):
        return [a for item in x for a in _flatten(item)]
    return [np.asarray(x, dtype=np.float64)]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256, 1024])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
    print(f"{'kernel':<28} {'nodes':>6} " + " ".join(f"{b + ' ms':>11}" for b in backends) + "   speed-up")
    for n in args.sizes:
        case = make_case(n, args.seed)
        for name in workloads(case):
            times, results = {}, {}
            for b in backends:
                with kernels.backend(b):
                    fn = workloads(case)[name]
                    results[b] = _flatten(fn())
                    number = max(1, int(2000 / n))
                    best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
                    times[b] = best * 1e3
            if len(backends) > 1:
                for a, b in zip(results["python"], results["cython"]):
                    if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
                        print(f"backends disagree on {name} at n={n}", file=sys.stderr)
                        return 1
            row = f"{name:<28} {n:>6} " + " ".join(f"{times[b]:>11.3f}" for b in backends)
            if len(backends) > 1:
                row += f"   {times['python'] / times['cython']:7.1f}x"
            print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
