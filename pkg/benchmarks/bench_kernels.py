"""Time the best-response kernel on its numba and numpy paths.

Usage: python benchmarks/bench_kernels.py [--iters 2000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from metabne import kernels
from metabne.game import FiniteBayesianGame, independent_prior, pack_profile, uniform_profile

SIZES = [  # (players, actions, types)
    (2, 2, 2),
    (2, 4, 2),
    (2, 8, 3),
    (3, 3, 2),
    (3, 4, 2),
    (5, 2, 1),
]


def random_game(n, a, t, rng) -> FiniteBayesianGame:
    types = tuple(tuple(f"t{k}" for k in range(t)) for _ in range(n))
    acts = tuple(tuple(f"a{k}" for k in range(a)) for _ in range(n))
    prior = independent_prior([rng.dirichlet(np.ones(t)) for _ in range(n)])
    return FiniteBayesianGame(types, acts, prior, rng.normal(size=(n,) + (a,) * n + (t,) * n))


def time_path(fn, game, iters, repeat) -> float:
    payoff, shape_a, shape_t, prior, marg = game.packed
    start = pack_profile(game, uniform_profile(game))
    best = np.inf
    for _ in range(repeat):
        sigma = start.copy()
        avg = np.zeros_like(sigma)
        t0 = time.perf_counter()
        fn(payoff, shape_a, shape_t, prior, marg, sigma, avg, 0.5, iters, 0.0)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if not kernels.HAVE_NUMBA:
        print("numba unavailable; only the numpy path can be timed")
    print(f"{'game (n,A,T)':<14}{'cells':>8}{'numpy ms':>12}{'numba ms':>12}{'speed-up':>10}")
    for n, a, t in SIZES:
        game = random_game(n, a, t, rng)
        cells = a ** n * t ** n
        np_ms = 1e3 * time_path(kernels.br_iterate_numpy, game, args.iters, args.repeat)
        if kernels.HAVE_NUMBA:
            time_path(kernels.br_iterate_numba, game, 1, 1)  # compile
            nb_ms = 1e3 * time_path(kernels.br_iterate_numba, game, args.iters, args.repeat)
            ratio = f"{np_ms / nb_ms:>9.1f}x"
            nb = f"{nb_ms:>12.1f}"
        else:
            nb, ratio = f"{'-':>12}", f"{'-':>10}"
        print(f"{str((n, a, t)):<14}{cells:>8}{np_ms:>12.1f}{nb}{ratio}")


if __name__ == "__main__":
    main()
