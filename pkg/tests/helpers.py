"""Small games and random generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from metabne import (
    FiniteBayesianGame,
    MetaGame,
    Transformation,
    TransformationRule,
    TransformationSet,
    audit_uniqueness,
    independent_prior,
)
from metabne.transform import MetaActionSpaces


def bimatrix(a, b, rows=("r0", "r1"), cols=("c0", "c1"), name="") -> FiniteBayesianGame:
    a, b = np.asarray(a, float), np.asarray(b, float)
    pay = np.stack([a, b])[..., None, None]
    return FiniteBayesianGame((("-",), ("-",)), (rows, cols), np.ones((1, 1)), pay, name=name)


def prisoners_dilemma() -> FiniteBayesianGame:
    return bimatrix([[3, 0], [5, 1]], [[3, 5], [0, 1]], ("C", "D"), ("C", "D"), "pd")


def matching_pennies() -> FiniteBayesianGame:
    return bimatrix([[1, -1], [-1, 1]], [[-1, 1], [1, -1]], name="mp")


def battle_of_sexes() -> FiniteBayesianGame:
    return bimatrix([[2, 0], [0, 1]], [[1, 0], [0, 2]], name="bos")


def random_game(rng, n_players=2, n_types=2, n_actions=2, prior="independent") -> FiniteBayesianGame:
    types = tuple(tuple(f"t{k}" for k in range(n_types)) for _ in range(n_players))
    acts = tuple(tuple(f"a{k}" for k in range(n_actions)) for _ in range(n_players))
    if prior == "independent":
        p = independent_prior([rng.dirichlet(np.ones(n_types)) for _ in range(n_players)])
    else:
        p = rng.dirichlet(np.ones(n_types ** n_players)).reshape((n_types,) * n_players)
    shape = (n_players,) + (n_actions,) * n_players + (n_types,) * n_players
    return FiniteBayesianGame(types, acts, p, rng.normal(size=shape))


def unique_payoffs(rng, base: FiniteBayesianGame, max_tries=200) -> np.ndarray:
    """Random payoffs on ``base``'s shape whose game has a certified unique equilibrium."""
    for _ in range(max_tries):
        pay = rng.normal(size=base.payoffs.shape)
        if audit_uniqueness(base.with_payoffs(pay)).unique:
            return pay
    raise RuntimeError("no uniquely solvable draw")


def random_metagame(rng, n_types=2, n_meta=2, n_env=2, n_transforms=3, costs=True,
                    n_actions=2) -> MetaGame:
    """Two-player meta-game with a random rule, random W and random nonnegative costs."""
    base = random_game(rng, 2, n_types, n_actions)
    tset = TransformationSet(Transformation(f"T{k}", unique_payoffs(rng, base))
                             for k in range(n_transforms))
    spaces = MetaActionSpaces(tuple(tuple(f"x{k}" for k in range(n_meta)) for _ in range(2)),
                              tuple(f"e{k}" for k in range(n_env)))
    cells = spaces.sizes + (n_env,) + base.n_types
    rule = TransformationRule(rng.integers(0, n_transforms, size=cells), tset.ids)
    cost = (tuple(rng.uniform(0, 0.5, size=(n_types, n_meta)) for _ in range(2))
            if costs else None)
    return MetaGame(base, tset, rule, spaces, rng.normal(size=cells), cost)


def three_point_affine(f, a, b, rng=None) -> float:
    """Deviation of ``f`` from affinity on the segment ``[a, b]`` at one interior point."""
    lam = 0.37 if rng is None else float(rng.uniform(0.05, 0.95))
    mid = lam * np.asarray(a) + (1 - lam) * np.asarray(b)
    return abs(f(mid) - (lam * f(a) + (1 - lam) * f(b)))
