"""Compare the compiled kernels against the pure-Python fallback.

Times three hot loops on the default synthetic stream: naive Bayes
test-then-train, a ten-member bagged naive Bayes, and windowed k-NN queries.
Both backends must give bit-identical outputs; the script checks that too.

Usage::

    python benchmarks/bench_kernels.py --rows 50000 --repeat 3
"""
import argparse
import time

import numpy as np

from afdm import (GeneratorConfig, LabeledDataset, NaiveBayesUpdateable, OnlineBagging,
                  WindowedKNN, available_backends, generate)


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def nb_case(ds, backend):
    return NaiveBayesUpdateable(ds.schema, backend=backend).prequential_many(ds)


def bagged_case(ds, backend):
    model = OnlineBagging(NaiveBayesUpdateable(ds.schema, backend=backend), 10, seed=1)
    return model.prequential_many(ds)


def knn_case(ds, backend, n_queries=2000):
    knn = WindowedKNN(ds.schema, k=10, window_capacity=1000, backend=backend)
    knn.update_many(ds.subset(range(1000)))
    queries = ds.subset(range(1000, 1000 + n_queries))
    return np.array([knn.neighbours(x)[0] for x in queries])


CASES = {
    "nb_prequential": nb_case,
    "bagged_nb_prequential": bagged_case,
    "knn_query": knn_case,
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=50_000, help="stream rows to use")
    p.add_argument("--repeat", type=int, default=3, help="timed repetitions, best kept")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the python backend only")
    txs = list(generate(GeneratorConfig(seed=args.seed)))[:args.rows]
    ds = LabeledDataset.from_transactions(txs)
    print(f"{len(ds)} rows, backends {', '.join(backends)}")
    print(f"{'case':<24}" + "".join(f"{b + ' s':>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in CASES.items():
        times, outs = {}, {}
        for b in backends:
            times[b], outs[b] = best_of(lambda: fn(ds, b), args.repeat)
        line = f"{name:<24}" + "".join(f"{times[b]:>12.4f}" for b in backends)
        if len(backends) == 2:
            same = np.array_equal(outs["python"], outs["cython"])
            line += f"{times['python'] / times['cython']:>9.1f}x"
            line += "" if same else "  OUTPUTS DIFFER"
        print(line)


if __name__ == "__main__":
    main()
