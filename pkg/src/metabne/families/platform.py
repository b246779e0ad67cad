"""Seller entry and pricing with private quality and lobbying over platform rules."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import GridTooCoarse, HypothesisViolated
from ..game import FiniteBayesianGame, independent_prior
from ..meta import EquilibriumTable, FiniteGameBackend, MetaGame, build_equilibrium_table
from ..transform import MetaActionSpaces, Transformation, TransformationRule, TransformationSet
from .common import monotone_rows, summarize, welfare_env_payoff

TYPES = ("qL", "qH")
REGIMES = ("L", "S", "Q")
META_ACTIONS = ("Lax", "Strict")
ENV_MOVES = ("Growth", "Quality")
OUT = "out"


@dataclass(frozen=True)
class PlatformParams:
    """Per-regime tables are indexed in REGIMES order; per-type columns are (qL, qH)."""

    share: tuple = (0.25, 0.18, 0.24)
    fixed: tuple = ((0.2, 0.1), (0.2, 0.0), (0.1, 0.1))
    intercept: tuple = ((1.9, 2.8), (1.3, 3.5), (1.4, 3.0))
    beta: float = 1.7
    gamma: float = 0.4
    p_bar: float = 2.0
    grid_points: int = 51
    q_high: float = 0.5
    grid_check: float | None = 0.05

    def __post_init__(self):
        r = np.asarray(self.share, dtype=float)
        f = np.asarray(self.fixed, dtype=float)
        d = np.asarray(self.intercept, dtype=float)
        if r.shape != (3,) or f.shape != (3, 2) or d.shape != (3, 2):
            raise ValueError("platform parameter tables have the wrong shape")
        if np.any(r < 0) or np.any(r >= 1):
            raise ValueError("revenue shares must lie in [0, 1)")
        if np.any(f < 0):
            raise ValueError("fixed costs must be nonnegative")
        if not np.all(d[:, 1] > d[:, 0]):
            raise ValueError("demand intercept of qH must exceed qL under every rule")
        if self.beta <= 0 or self.p_bar <= 0:
            raise ValueError("need beta > 0 and p_bar > 0")
        if int(self.grid_points) < 2:
            raise ValueError("grid_points must be at least 2")
        if not 0 < self.q_high < 1:
            raise ValueError("q_high must lie in (0, 1)")
        object.__setattr__(self, "share", tuple(r.tolist()))
        object.__setattr__(self, "fixed", tuple(map(tuple, f.tolist())))
        object.__setattr__(self, "intercept", tuple(map(tuple, d.tolist())))
        object.__setattr__(self, "grid_points", int(self.grid_points))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.p_bar, self.grid_points)


def action_labels(params: PlatformParams) -> tuple:
    return (OUT,) + tuple(f"{p:.6g}" for p in params.grid)


def regime_payoffs(params: PlatformParams, tid: str) -> np.ndarray:
    """``[i, a_1, a_2, t_1, t_2]``; action 0 is staying out, which pays zero.

    A rival who stays out contributes nothing to the demand term.
    """
    k = REGIMES.index(tid)
    r = params.share[k]
    f = np.asarray(params.fixed[k])
    d = np.asarray(params.intercept[k])
    grid = params.grid
    n = len(grid) + 1
    rival = np.concatenate([[0.0], grid])  # price term of the rival's action
    own = np.zeros((n, n, 2))  # [a_i, a_j, t_i]
    demand = d[None, None, :] - params.beta * grid[:, None, None] + params.gamma * rival[None, :, None]
    own[1:] = (1 - r) * grid[:, None, None] * demand - f[None, None, :]
    pay = np.empty((2, n, n, 2, 2))
    pay[0] = own[:, :, :, None] * np.ones((1, 1, 1, 2))
    pay[1] = np.transpose(own, (1, 0, 2))[:, :, None, :] * np.ones((1, 1, 2, 1))
    return pay


def platform_base_game(params: PlatformParams, tid: str = "Q") -> FiniteBayesianGame:
    probs = [1 - params.q_high, params.q_high]
    acts = action_labels(params)
    return FiniteBayesianGame(
        type_labels=(TYPES, TYPES), action_labels=(acts, acts),
        prior=independent_prior([probs, probs]), payoffs=regime_payoffs(params, tid),
        player_names=("seller1", "seller2"), name="platform",
    )


def platform_rule(x, e, theta) -> str:
    if e == "Growth" and x == ("Lax", "Lax"):
        return "L"
    if e == "Quality" and x == ("Strict", "Strict"):
        return "S"
    return "Q"


def _regime_table(params: PlatformParams, strict: bool = True):
    base = platform_base_game(params)
    tset = TransformationSet(Transformation(t, regime_payoffs(params, t)) for t in REGIMES)
    spaces = MetaActionSpaces((META_ACTIONS, META_ACTIONS), ENV_MOVES)
    rule = TransformationRule.from_function(spaces, base.type_labels, tset, platform_rule)
    backend = FiniteGameBackend(base, strict=strict)
    probe = MetaGame(base, tset, rule, spaces, np.zeros(rule.table.shape), backend=backend)
    return base, tset, spaces, rule, backend, build_equilibrium_table(probe)


def refinement_shift(params: PlatformParams) -> float:
    """Largest change of any ex-post payoff when the price grid is refined to 2n - 1 points."""
    fine = replace(params, grid_points=2 * params.grid_points - 1, grid_check=None)
    coarse = _regime_table(replace(params, grid_check=None))[-1].ubar
    return float(np.max(np.abs(_regime_table(fine)[-1].ubar - coarse)))


def build_platform_metagame(params: PlatformParams, env_payoff=None, strict: bool = True) -> MetaGame:
    base, tset, spaces, rule, backend, table = _regime_table(params, strict)
    if params.grid_check is not None:
        shift = refinement_shift(params)
        bound = params.grid_check * max(1.0, float(np.max(np.abs(table.ubar))))
        if shift > bound:
            raise GridTooCoarse(f"refining the price grid moves payoffs by {shift:.3g} > {bound:.3g}")
    W = welfare_env_payoff(rule, table) if env_payoff is None else env_payoff
    return MetaGame(base, tset, rule, spaces, W, backend=backend, name="platform")


def gain_gaps(table: EquilibriumTable) -> dict:
    k = {t: table.ids.index(t) for t in REGIMES}
    out = {}
    for i in range(2):
        u = table.ubar[:, i] if i == 0 else np.swapaxes(table.ubar[:, i], 1, 2)
        out[i] = {"quality_vs_lax": u[k["Q"]] - u[k["L"]],
                  "strict_vs_quality": u[k["S"]] - u[k["Q"]]}
    return out


def check_gains(table: EquilibriumTable) -> float:
    """Raise unless stricter rules raise qH payoffs and weakly lower qL payoffs.

    Returns the smallest qH-over-qL gap across players, rival types and steps.
    """
    worst = np.inf
    for i, g in gain_gaps(table).items():
        for name, d in g.items():
            if not (np.all(d[1] > 0) and np.all(d[0] <= 0)):
                raise HypothesisViolated(f"seller {i + 1}: {name} gains do not separate types")
            worst = min(worst, float(np.min(d[1] - d[0])))
    return worst


def check_claim(params: PlatformParams, equilibria, mg: MetaGame, table: EquilibriumTable) -> dict:
    gap = check_gains(table)
    rows = monotone_rows(mg, table, equilibria, hi=1, lo=0, x_from=0, x_to=1)
    return {"rows": rows, "summary": summarize(rows), "min_gap": gap}


def sample_params(rng: np.random.Generator, grid_points: int = 51) -> PlatformParams:
    """Draws where stricter rules lift qH demand and depress qL demand."""
    beta = rng.uniform(1.0, 2.0)
    gamma = rng.uniform(0.0, 0.5) * beta
    hi_L = rng.uniform(2.5, 4.0)
    lo_L = rng.uniform(1.0, 2.0)
    hi = np.array([hi_L, 0.0, hi_L + rng.uniform(0.2, 1.0)])
    hi[1] = hi[2] + rng.uniform(0.2, 1.0)  # order L < Q < S
    lo = np.array([lo_L, 0.0, lo_L - rng.uniform(0.0, 0.5)])
    lo[1] = lo[2] - rng.uniform(0.0, 0.5)
    intercept = np.column_stack([lo, hi])
    p_bar = 1.5 * float(intercept.max()) / (2 * beta - gamma)
    return PlatformParams(
        share=tuple(rng.uniform(0.0, 0.3, size=3)),
        fixed=rng.uniform(0.0, 0.3, size=(3, 2)),
        intercept=intercept, beta=beta, gamma=gamma, p_bar=p_bar,
        grid_points=grid_points, q_high=rng.uniform(0.2, 0.8),
    )
