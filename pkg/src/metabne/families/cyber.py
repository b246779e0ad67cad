"""Protocol coordination with private vulnerability and lobbying over protocol regimes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import HypothesisViolated
from ..game import FiniteBayesianGame, independent_prior
from ..meta import EquilibriumTable, FiniteGameBackend, MetaGame, build_equilibrium_table
from ..transform import MetaActionSpaces, Transformation, TransformationRule, TransformationSet
from .common import monotone_rows, single_crossing, summarize, welfare_env_payoff

TYPES = ("S", "W")
ACTIONS = ("A", "B")
REGIMES = ("open", "strict", "legacy")
FAVOURED = {"open": 0, "strict": 1, "legacy": 0}  # protocol receiving the perturbation bonus
META_ACTIONS = ("o", "s")
ENV_MOVES = ("statusquo", "reform")


@dataclass(frozen=True)
class CyberParams:
    """``benefit[T]``, ``cost[T, action, type]`` and ``loss[T, type]`` indexed by REGIMES order."""

    benefit: tuple = (1.5, 1.3, 0.6)
    cost: tuple = (
        ((3.1, 3.3), (0.2, 0.4)),  # open
        ((2.9, 5.0), (0.2, 0.2)),  # strict
        ((0.3, 0.3), (3.2, 2.9)),  # legacy
    )
    loss: tuple = ((0.5, 1.0), (0.8, 1.3), (0.9, 2.7))
    q_weak: float = 0.5
    eps_perturb: float | None = None

    def __post_init__(self):
        b = np.asarray(self.benefit, dtype=float)
        c = np.asarray(self.cost, dtype=float)
        l = np.asarray(self.loss, dtype=float)
        if b.shape != (3,) or c.shape != (3, 2, 2) or l.shape != (3, 2):
            raise ValueError("cyber parameter tables have the wrong shape")
        # equality is admitted for symmetric control runs; sweeps draw strict gaps
        if np.any(l[:, 1] < l[:, 0]):
            raise ValueError("mismatch loss of W must not be below that of S")
        if not 0 < self.q_weak < 1:
            raise ValueError("q_weak must lie in (0, 1)")
        eps = 1e-3 * float(np.max(np.abs(b))) if self.eps_perturb is None else float(self.eps_perturb)
        if eps < 0:
            raise ValueError("eps_perturb must be nonnegative")
        object.__setattr__(self, "benefit", tuple(b.tolist()))
        object.__setattr__(self, "cost", tuple(map(lambda m: tuple(map(tuple, m)), c.tolist())))
        object.__setattr__(self, "loss", tuple(map(tuple, l.tolist())))
        object.__setattr__(self, "eps_perturb", eps)


def regime_payoffs(params: CyberParams, tid: str) -> np.ndarray:
    """Payoff table ``[i, a_1, a_2, t_1, t_2]`` of the perturbed coordination game."""
    k = REGIMES.index(tid)
    b = params.benefit[k] + params.eps_perturb * (np.arange(2) == FAVOURED[tid])  # by own action
    c = np.asarray(params.cost[k])  # (action, type)
    loss = np.asarray(params.loss[k])  # (type,)
    match = np.eye(2, dtype=bool)
    own = np.where(match[:, :, None], b[:, None, None], -loss[None, None, :]) - c[:, None, :]
    # own[a_i, a_j, t_i]
    pay = np.empty((2, 2, 2, 2, 2))
    pay[0] = own[:, :, :, None] * np.ones((1, 1, 1, 2))
    pay[1] = np.transpose(own, (1, 0, 2))[:, :, None, :] * np.ones((1, 1, 2, 1))
    return pay


def cyber_base_game(params: CyberParams, tid: str = "legacy") -> FiniteBayesianGame:
    probs = [1 - params.q_weak, params.q_weak]
    return FiniteBayesianGame(
        type_labels=(TYPES, TYPES), action_labels=(ACTIONS, ACTIONS),
        prior=independent_prior([probs, probs]), payoffs=regime_payoffs(params, tid),
        player_names=("operator1", "operator2"), name="cyber",
    )


def cyber_rule(x, e, theta) -> str:
    if e == "statusquo":
        return "legacy"
    if x == ("s", "s"):
        return "strict"
    if x == ("o", "o"):
        return "open"
    return "legacy"


def build_cyber_metagame(params: CyberParams, env_payoff=None, strict: bool = True) -> MetaGame:
    base = cyber_base_game(params)
    tset = TransformationSet(Transformation(t, regime_payoffs(params, t)) for t in REGIMES)
    spaces = MetaActionSpaces((META_ACTIONS, META_ACTIONS), ENV_MOVES)
    rule = TransformationRule.from_function(spaces, base.type_labels, tset, cyber_rule)
    backend = FiniteGameBackend(base, strict=strict)
    if env_payoff is None:
        probe = MetaGame(base, tset, rule, spaces, np.zeros(rule.table.shape), backend=backend)
        env_payoff = welfare_env_payoff(rule, build_equilibrium_table(probe))
    return MetaGame(base, tset, rule, spaces, env_payoff, backend=backend, name="cyber")


def gain_gaps(table: EquilibriumTable) -> dict:
    """Within-game gains of supporting ``s`` over ``o``, per player, own type and rival type."""
    k = {t: table.ids.index(t) for t in REGIMES}
    out = {}
    for i in range(2):
        u = table.ubar[:, i] if i == 0 else np.swapaxes(table.ubar[:, i], 1, 2)
        out[i] = {"strict_vs_legacy": u[k["strict"]] - u[k["legacy"]],
                  "legacy_vs_open": u[k["legacy"]] - u[k["open"]]}
    return out


def check_crossing(table: EquilibriumTable) -> float:
    """Raise unless both gains favour W weakly; return the smallest W-over-S gap."""
    gaps = gain_gaps(table)
    worst = np.inf
    for i, g in gaps.items():
        for name, d in g.items():
            # rows: own type S=0, W=1
            if not single_crossing(d[1], d[0], strict=False):
                raise HypothesisViolated(f"player {i + 1}: {name} gain of W below S")
            worst = min(worst, float(np.min(d[1] - d[0])))
    return worst


def check_claim(params: CyberParams, equilibria, mg: MetaGame, table: EquilibriumTable) -> dict:
    gap = check_crossing(table)
    rows = monotone_rows(mg, table, equilibria, hi=1, lo=0, x_from=0, x_to=1)
    return {"rows": rows, "summary": summarize(rows), "min_gap": gap}


def sample_params(rng: np.random.Generator) -> CyberParams:
    """Random draw where each agent's cost gap is of the order of its coordination stake."""
    benefit = rng.uniform(0.5, 1.5, size=3)
    loss_s = rng.uniform(0.0, 1.0, size=3)
    loss = np.column_stack([loss_s, loss_s + rng.uniform(0.2, 2.0, size=3)])
    cost = np.empty((3, 2, 2))
    for k in range(3):
        for t in range(2):
            low = rng.uniform(0.0, 0.5)
            gap = (benefit[k] + loss[k, t]) * rng.uniform(0.6, 2.0)
            cheap = rng.integers(2)
            cost[k, cheap, t] = low
            cost[k, 1 - cheap, t] = low + gap
    return CyberParams(benefit=tuple(benefit), cost=cost, loss=loss, q_weak=rng.uniform(0.2, 0.8))
