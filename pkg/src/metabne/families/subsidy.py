"""Price competition with private costs and lobbying over subsidy regimes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import BoundaryEquilibrium, HypothesisViolated
from ..game import independent_prior
from ..meta import (
    ClosedFormBase,
    EquilibriumTable,
    MetaGame,
    WithinGameSolution,
    build_equilibrium_table,
)
from ..solve import Status, UniquenessVerdict
from ..transform import MetaActionSpaces, Transformation, TransformationRule, TransformationSet
from .common import monotone_rows, single_crossing, summarize

TYPES = ("L", "H")
REGIMES = ("T0", "T1", "T2", "TS")
SUBSIDY_MASK = {"T0": (0, 0), "T1": (1, 0), "T2": (0, 1), "TS": (1, 1)}
META_ACTIONS = ("0", "1")
ENV_MOVES = ("N", "R")


@dataclass(frozen=True)
class SubsidyParams:
    a: float = 10.0
    b: float = 2.0
    gamma: float = 1.0
    c_L: float = 1.0
    c_H: float = 3.0
    q: float = 0.5
    s_bar: float = 1.0
    kappa: tuple = ((0.5, 5.0), (0.5, 5.0))  # (firm, type)
    p_bar: float = 20.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("demand needs a > 0 and b > 0")
        if not 0 <= self.gamma < self.b:
            raise ValueError("need 0 <= gamma < b")
        if not 0 < self.c_L < self.c_H:
            raise ValueError("need 0 < c_L < c_H")
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if self.s_bar < 0 or self.p_bar <= 0:
            raise ValueError("need s_bar >= 0 and p_bar > 0")
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.shape != (2, 2) or np.any(kappa < 0):
            raise ValueError("kappa must be a nonnegative (2, 2) table")
        object.__setattr__(self, "kappa", tuple(map(tuple, kappa.tolist())))

    @property
    def costs(self) -> np.ndarray:
        return np.array([self.c_L, self.c_H])

    @property
    def type_probs(self) -> np.ndarray:
        return np.array([1 - self.q, self.q])

    def subsidies(self, tid: str) -> np.ndarray:
        return self.s_bar * np.array(SUBSIDY_MASK[tid], dtype=float)


def _ubar(params: SubsidyParams, prices: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Ex-post payoffs ``[i, t1, t2]`` at pure type-contingent prices ``[i, t]``."""
    c = params.costs
    out = np.empty((2, 2, 2))
    for i in range(2):
        j = 1 - i
        margin = prices[i] - c + s[i]  # (t_i,)
        demand = params.a - params.b * prices[i][:, None] + params.gamma * prices[j][None, :]
        u = margin[:, None] * demand  # (t_i, t_j)
        out[i] = u if i == 0 else u.T
    return out


def closed_form_prices(params: SubsidyParams, tid: str) -> np.ndarray:
    """Interim equilibrium prices ``[firm, type]`` from the first-order conditions."""
    a, b, g = params.a, params.b, params.gamma
    s = params.subsidies(tid)
    cbar = params.type_probs @ params.costs
    # mean prices solve 2b P_i - g P_j = a + b (cbar - s_i)
    M = np.array([[2 * b, -g], [-g, 2 * b]])
    P = np.linalg.solve(M, a + b * (cbar - s))
    return np.array([(a + b * (params.costs - s[i]) + g * P[1 - i]) / (2 * b) for i in range(2)])


def subsidy_within_game_solve(params: SubsidyParams, tid: str) -> WithinGameSolution:
    prices = closed_form_prices(params, tid)
    if np.any(prices <= 0) or np.any(prices >= params.p_bar):
        raise BoundaryEquilibrium(f"{tid}: prices {prices.round(6).tolist()} leave (0, {params.p_bar})")
    slope = params.gamma / (2 * params.b)
    verdict = UniquenessVerdict(Status.UNIQUE, [prices], reason="analytic")
    return WithinGameSolution(prices, verdict, _ubar(params, prices, params.subsidies(tid)),
                              certificate=f"analytic: best-response slope {slope:.6g} < 1")


def grid_oracle(params: SubsidyParams, tid: str, step: float = 1e-3, max_rounds: int = 10_000):
    """Best-response iteration with prices restricted to a uniform grid.

    Returns ``(prices, ubar)``. Independent of the closed form: each firm
    type maximises its expected profit over the grid by brute force.
    """
    grid = np.arange(0.0, params.p_bar + step / 2, step)
    s = params.subsidies(tid)
    c = params.costs
    w = params.type_probs
    prices = np.full((2, 2), params.p_bar / 2)
    for _ in range(max_rounds):
        old = prices.copy()
        for i in range(2):
            mean_rival = w @ prices[1 - i]
            for t in range(2):
                profit = (grid - c[t] + s[i]) * (params.a - params.b * grid + params.gamma * mean_rival)
                prices[i, t] = grid[int(np.argmax(profit))]
        if np.array_equal(prices, old):
            break
    return prices, _ubar(params, prices, s)


class SubsidyBackend:
    def __init__(self, params: SubsidyParams):
        self.params = params

    def solve(self, transformation: Transformation) -> WithinGameSolution:
        return subsidy_within_game_solve(self.params, transformation.id)


def subsidy_rule(x, e, theta) -> str:
    if e == "N":
        return "T0"
    lobby = tuple(v == "1" for v in x)
    return {(True, False): "T1", (False, True): "T2", (True, True): "TS"}.get(lobby, "T0")


def default_env_payoff(params: SubsidyParams, rule: TransformationRule) -> np.ndarray:
    """Regulator payoff: minus the average realised equilibrium price."""
    level = {}
    for tid in REGIMES:
        p = closed_form_prices(params, tid)
        level[tid] = -(p[0][:, None] + p[1][None, :]) / 2  # (t1, t2)
    W = np.empty(rule.table.shape)
    for idx in np.ndindex(*rule.table.shape):
        W[idx] = level[rule.ids[rule.table[idx]]][idx[3], idx[4]]
    return W


def build_subsidy_metagame(params: SubsidyParams, env_payoff=None) -> MetaGame:
    base = ClosedFormBase(
        type_labels=(TYPES, TYPES),
        prior=independent_prior([params.type_probs, params.type_probs]),
        player_names=("firm1", "firm2"),
        name="subsidy",
    )
    tset = TransformationSet(Transformation(t, label=f"subsidy mask {SUBSIDY_MASK[t]}") for t in REGIMES)
    spaces = MetaActionSpaces((META_ACTIONS, META_ACTIONS), ENV_MOVES)
    rule = TransformationRule.from_function(spaces, base.type_labels, tset, subsidy_rule)
    kappa = np.asarray(params.kappa)
    cost = tuple(np.column_stack([np.zeros(2), kappa[i]]) for i in range(2))
    W = default_env_payoff(params, rule) if env_payoff is None else env_payoff
    return MetaGame(base, tset, rule, spaces, W, cost, SubsidyBackend(params), name="subsidy")


def hypothesis_gaps(table: EquilibriumTable) -> dict:
    """Gains from one's own subsidy, per firm and opponent type, for L and H."""
    ub = table.ubar
    k = {t: table.ids.index(t) for t in REGIMES}
    out = {}
    for i, own, both, rival in ((0, "T1", "TS", "T2"), (1, "T2", "TS", "T1")):
        u = ub[:, i] if i == 0 else np.swapaxes(ub[:, i], 1, 2)  # (K, t_i, t_j)
        out[i] = {
            "single": u[k[own]] - u[k["T0"]],
            "joint": u[k[both]] - u[k[rival]],
        }
    return out


def check_hypotheses(params: SubsidyParams, table: EquilibriumTable) -> dict:
    """Raise :class:`HypothesisViolated` unless single crossing and cost ordering hold."""
    gaps = hypothesis_gaps(table)
    kappa = np.asarray(params.kappa)
    secondary = {}
    for i in range(2):
        d = gaps[i]["single"]
        if not single_crossing(d[0], d[1]):
            raise HypothesisViolated(f"firm {i + 1}: own-subsidy gain of L does not exceed H")
        if kappa[i, 0] > kappa[i, 1]:
            raise HypothesisViolated(f"firm {i + 1}: lobbying cost of L exceeds H")
        j = gaps[i]["joint"]
        secondary[i] = single_crossing(j[0], j[1], strict=False)
    return secondary


@dataclass
class PropositionReport:
    rows: list
    summary: dict
    joint_crossing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        s = self.summary
        return s["weak_pass"] == s["weak_total"] and s["gain_order_pass"] == s["weak_total"]


def check_proposition(params: SubsidyParams, equilibria, mg: MetaGame | None = None,
                      table: EquilibriumTable | None = None) -> PropositionReport:
    mg = mg or build_subsidy_metagame(params)
    table = table or build_equilibrium_table(mg)
    joint = check_hypotheses(params, table)
    rows = monotone_rows(mg, table, equilibria, hi=0, lo=1, x_from=0, x_to=1)
    return PropositionReport(rows, summarize(rows), joint)


def sample_params(rng: np.random.Generator) -> SubsidyParams:
    b = rng.uniform(1.0, 2.0)
    a = rng.uniform(8.0, 12.0)
    c_L = rng.uniform(0.5, 2.5)
    kL = rng.uniform(0.0, 3.0, size=2)
    kH = kL + rng.uniform(0.0, 4.0, size=2)
    return SubsidyParams(
        a=a, b=b, gamma=rng.uniform(0.0, 0.8) * b,
        c_L=c_L, c_H=c_L + rng.uniform(0.5, 2.0),
        q=rng.uniform(0.2, 0.8), s_bar=rng.uniform(0.2, 1.5),
        kappa=tuple(zip(kL, kH)), p_bar=4 * a / b,
    )


def with_costs_shifted(params: SubsidyParams, shift: float) -> SubsidyParams:
    return replace(params, c_L=params.c_L - shift, c_H=params.c_H - shift)
