"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is warmed up once (which triggers JIT compilation) before timing,
and both paths are checked to agree on the benchmark inputs.
"""

import argparse
import timeit

import numpy as np

from longcl import kernels


def cases(rng):
    n_params, n_units = 200_000, 20_000
    widths = np.full(n_units, n_params // n_units, dtype=np.int64)
    stops = np.cumsum(widths)
    starts = stops - widths
    prev, curr = rng.standard_normal(n_params), rng.standard_normal(n_params)
    beta = rng.uniform(size=n_units)
    drift = rng.uniform(size=n_units)
    emb, protos = rng.standard_normal((5000, 32)), rng.standard_normal((30, 32))
    return {
        "unit_drift": (prev, curr, starts, stops),
        "fuse": (prev, curr, beta, starts, stops),
        "topk": (drift, n_units // 10, True),
        "pairwise_dist": (emb, protos),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, args_ in cases(rng).items():
        nb_fn, np_fn = getattr(kernels, f"nb_{name}"), getattr(kernels, f"np_{name}")
        a, b = nb_fn(*args_), np_fn(*args_)
        assert np.allclose(a, b, rtol=0, atol=1e-9), name
        t_nb = min(timeit.repeat(lambda: nb_fn(*args_), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: np_fn(*args_), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<14}{t_nb:>10.3f}{t_np:>10.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
