"""Meta-games: equilibrium tables, meta-payoffs, best replies and meta-equilibria."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import ShapeMismatch, UniquenessUnknown, UniquenessViolated
from .game import (
    FiniteBayesianGame,
    conditional_prior,
    expected_payoffs_by_type_profile,
    is_bne,
)
from .solve import (
    DEFAULT_CAP,
    DEFAULT_MERGE_RADIUS,
    DEFAULT_TOL,
    EnumerationCap,
    Status,
    UniquenessVerdict,
    audit_uniqueness,
    enumerate_equilibria,
    solve_best_response_iteration,
    solve_logit_homotopy,
)
from .transform import (
    MetaActionSpaces,
    MetaProfile,
    Transformation,
    TransformationRule,
    TransformationSet,
    apply_transformation,
    joint_meta_distribution,
    transformation_probabilities,
)

log = logging.getLogger(__name__)

ENV_TYPE = "-"
ENV_NAME = "environment"


# -- within-game backends ------------------------------------------------------------


@dataclass
class WithinGameSolution:
    """Equilibrium of one transformed game and its ex-post payoffs.

    ``ubar`` has shape ``(n,) + type shape``.
    """

    profile: object
    verdict: UniquenessVerdict
    ubar: np.ndarray
    certificate: str = "enumeration"
    game: FiniteBayesianGame | None = None


class WithinGameBackend(Protocol):
    def solve(self, transformation: Transformation) -> WithinGameSolution: ...


class FiniteGameBackend:
    """Solve each transformed finite game and certify uniqueness by enumeration."""

    def __init__(self, base: FiniteBayesianGame, tol: float = DEFAULT_TOL,
                 merge_radius: float = DEFAULT_MERGE_RADIUS,
                 cap: EnumerationCap = DEFAULT_CAP, strict: bool = True):
        self.base = base
        self.tol = tol
        self.merge_radius = merge_radius
        self.cap = cap
        self.strict = strict

    def solve(self, transformation: Transformation) -> WithinGameSolution:
        game = apply_transformation(transformation, self.base)
        verdict = audit_uniqueness(game, self.tol, self.merge_radius, self.cap)
        if verdict.status is Status.MULTIPLE:
            raise UniquenessViolated(transformation.id, verdict.equilibria)
        if verdict.status is Status.UNIQUE:
            profile = verdict.equilibria[0]
            certificate = "enumeration"
        else:
            if self.strict:
                raise UniquenessUnknown(transformation.id, verdict.reason)
            report = solve_logit_homotopy(game, tol=self.tol)
            if not report.converged:
                raise UniquenessUnknown(transformation.id, "solver did not converge")
            warnings.warn(f"uniqueness of {transformation.id!r} not certified ({verdict.reason})",
                          stacklevel=2)
            profile = report.profile
            certificate = "uncertified"
        ok, worst = is_bne(game, profile, self.tol)
        if not ok:
            raise RuntimeError(f"equilibrium of {transformation.id!r} fails verification ({worst})")
        ubar = expected_payoffs_by_type_profile(game, profile)
        return WithinGameSolution(profile, verdict, ubar, certificate, game)


@dataclass(frozen=True)
class ClosedFormBase:
    """Type structure of a base game whose transformed games are solved analytically."""

    type_labels: tuple
    prior: np.ndarray
    player_names: tuple = ()
    name: str = ""


# -- meta-game -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetaGame:
    """Base game, transformations, rule, meta-action spaces, environment payoff and costs.

    ``base`` is a :class:`FiniteBayesianGame` or any object exposing
    ``type_labels``, ``prior`` and ``player_names``; ``backend`` defaults to
    :class:`FiniteGameBackend` for finite bases. ``env_payoff`` has shape
    ``(|X_1|..|X_n|, |E|, |T_1|..|T_n|)`` and ``meta_cost[i]`` has shape
    ``(|T_i|, |X_i|)``.
    """

    base: object
    tset: TransformationSet
    rule: TransformationRule
    spaces: MetaActionSpaces
    env_payoff: np.ndarray
    meta_cost: tuple | None = None
    backend: object = None
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.tset, TransformationSet):
            object.__setattr__(self, "tset", TransformationSet(self.tset))
        n = len(self.base.type_labels)
        if self.spaces.n_players != n:
            raise ShapeMismatch("meta-action spaces do not match the player count")
        types = tuple(len(t) for t in self.base.type_labels)
        cells = self.spaces.sizes + (len(self.spaces.env_moves),) + types
        if self.rule.table.shape != cells:
            raise ShapeMismatch(f"rule table shape {self.rule.table.shape} != {cells}")
        if tuple(self.rule.ids) != self.tset.ids:
            raise ShapeMismatch("rule ids differ from the transformation set")
        W = np.array(self.env_payoff, dtype=float)
        if W.shape != cells or not np.all(np.isfinite(W)):
            raise ShapeMismatch(f"environment payoff must be finite with shape {cells}")
        W.setflags(write=False)
        object.__setattr__(self, "env_payoff", W)
        if self.meta_cost is None:
            cost = tuple(np.zeros((types[i], self.spaces.sizes[i])) for i in range(n))
        else:
            cost = tuple(np.array(c, dtype=float) for c in self.meta_cost)
        for i, c in enumerate(cost):
            if c.shape != (types[i], self.spaces.sizes[i]):
                raise ShapeMismatch(f"meta cost of player {i} has shape {c.shape}")
            if np.any(c < 0) or not np.all(np.isfinite(c)):
                raise ValueError("meta-action costs must be finite and nonnegative")
        object.__setattr__(self, "meta_cost", cost)
        if self.backend is None:
            if not isinstance(self.base, FiniteBayesianGame):
                raise ValueError("non-finite base games need an explicit backend")
            object.__setattr__(self, "backend", FiniteGameBackend(self.base))

    @property
    def n_players(self) -> int:
        return len(self.base.type_labels)

    @property
    def prior(self) -> np.ndarray:
        return np.asarray(self.base.prior, dtype=float)

    @property
    def type_labels(self) -> tuple:
        return tuple(tuple(t) for t in self.base.type_labels)

    def has_costs(self) -> bool:
        return any(np.any(c != 0) for c in self.meta_cost)


@dataclass
class EquilibriumTable:
    ids: tuple
    entries: dict
    ubar: np.ndarray  # (|T|, n) + type shape

    def __getitem__(self, tid: str) -> WithinGameSolution:
        return self.entries[tid]


def build_equilibrium_table(mg: MetaGame, backend=None) -> EquilibriumTable:
    """Solve every transformed game once and cache its ex-post equilibrium payoffs."""
    backend = backend or mg.backend
    entries = {}
    for T in mg.tset:
        sol = backend.solve(T)
        want = (mg.n_players,) + tuple(len(t) for t in mg.type_labels)
        if sol.ubar.shape != want:
            raise ShapeMismatch(f"ubar for {T.id!r} has shape {sol.ubar.shape} != {want}")
        entries[T.id] = sol
    ubar = np.stack([entries[t].ubar for t in mg.tset.ids])
    return EquilibriumTable(mg.tset.ids, entries, ubar)


# -- meta-payoffs --------------------------------------------------------------------


def _type_values(mg: MetaGame, table: EquilibriumTable, m: MetaProfile, i: int) -> np.ndarray:
    pi = transformation_probabilities(mg.rule, m)
    return (pi * table.ubar[:, i]).sum(axis=0)


def interim_meta_payoff(mg: MetaGame, table: EquilibriumTable, m: MetaProfile,
                        i: int, t: int) -> float:
    """Expected equilibrium payoff of type ``t`` of player ``i`` under ``m``, less meta costs."""
    cond = conditional_prior(mg.prior, i, t)
    vals = np.take(_type_values(mg, table, m, i), t, axis=i)
    return float((cond * vals).sum() - m.players[i][t] @ mg.meta_cost[i][t])


def env_payoff(mg: MetaGame, m: MetaProfile) -> float:
    n = mg.n_players
    joint = joint_meta_distribution(m)
    per_theta = (joint * mg.env_payoff).sum(axis=tuple(range(n + 1)))
    return float((mg.prior * per_theta).sum())


def _point(k: int, size: int) -> np.ndarray:
    e = np.zeros(size)
    e[k] = 1.0
    return e


def meta_best_reply(mg: MetaGame, table: EquilibriumTable, m: MetaProfile, i: int, t: int,
                    tie_tol: float = 1e-12):
    """Pure best replies of type ``t`` of player ``i``: ``(argmax, value, gain)``."""
    size = mg.spaces.sizes[i]
    vals = np.array([
        interim_meta_payoff(mg, table, m.replace_player_row(i, t, _point(x, size)), i, t)
        for x in range(size)
    ])
    best = vals.max()
    current = interim_meta_payoff(mg, table, m, i, t)
    argmax = tuple(int(x) for x in np.flatnonzero(vals >= best - tie_tol))
    return argmax, float(best), max(0.0, float(best - current))


def env_best_reply(mg: MetaGame, m: MetaProfile, tie_tol: float = 1e-12):
    size = len(mg.spaces.env_moves)
    vals = np.array([env_payoff(mg, m.replace_env(_point(e, size))) for e in range(size)])
    best = vals.max()
    argmax = tuple(int(e) for e in np.flatnonzero(vals >= best - tie_tol))
    return argmax, float(best), max(0.0, float(best - env_payoff(mg, m)))


def meta_gain(mg: MetaGame, table: EquilibriumTable, m: MetaProfile, i: int, t: int,
              x_from: int, x_to: int) -> float:
    """Change in the interim meta-payoff of type ``t`` from switching ``x_from`` to ``x_to``."""
    size = mg.spaces.sizes[i]
    hi = interim_meta_payoff(mg, table, m.replace_player_row(i, t, _point(x_to, size)), i, t)
    lo = interim_meta_payoff(mg, table, m.replace_player_row(i, t, _point(x_from, size)), i, t)
    return hi - lo


@dataclass
class MetaCheck:
    ok: bool
    max_gain: float
    gains: dict = field(default_factory=dict)  # (player, type) or "env" -> gain


def is_meta_bne(mg: MetaGame, table: EquilibriumTable, m: MetaProfile, eps: float = 0.0) -> MetaCheck:
    """Single-type deviation check for every player type and the environment."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    gains = {}
    marg = [mg.prior.sum(axis=tuple(j for j in range(mg.n_players) if j != i))
            for i in range(mg.n_players)]
    for i in range(mg.n_players):
        for t in range(len(mg.type_labels[i])):
            if marg[i][t] <= 0:
                continue
            gains[(i, t)] = meta_best_reply(mg, table, m, i, t)[2]
    gains["env"] = env_best_reply(mg, m)[2]
    worst = max(gains.values())
    return MetaCheck(worst <= eps, worst, gains)


# -- reduction to a finite Bayesian game ---------------------------------------------------


def to_meta_agent_game(mg: MetaGame, table: EquilibriumTable) -> FiniteBayesianGame:
    """Finite Bayesian game whose equilibria are exactly the meta-equilibria.

    Players keep their types and play meta-actions; the environment is
    appended as the last player with a single type and moves as actions.
    """
    n = mg.n_players
    types = tuple(len(t) for t in mg.type_labels)
    cells = mg.rule.table.shape
    onehot = mg.rule.one_hot  # (K,) + cells
    pay = np.zeros((n + 1,) + cells + (1,))
    for i in range(n):
        ub = table.ubar[:, i]  # (K,) + types
        ub = ub.reshape((ub.shape[0],) + (1,) * (n + 1) + types)
        w = (onehot * ub).sum(axis=0)
        cost = mg.meta_cost[i]  # (T_i, X_i)
        shape = [1] * (2 * n + 1)
        shape[i] = cost.shape[1]
        shape[n + 1 + i] = cost.shape[0]
        w = w - cost.T.reshape(shape)
        pay[i] = w[..., None]
    pay[n] = mg.env_payoff[..., None]
    prior = mg.prior[..., None]
    names = tuple(getattr(mg.base, "player_names", ())) or tuple(f"P{i + 1}" for i in range(n))
    return FiniteBayesianGame(
        type_labels=mg.type_labels + ((ENV_TYPE,),),
        action_labels=mg.spaces.meta_actions + (mg.spaces.env_moves,),
        prior=prior,
        payoffs=pay,
        player_names=names + (ENV_NAME,),
        name=f"{mg.name}:meta" if mg.name else "meta",
    )


def to_behavioral(m: MetaProfile) -> tuple:
    return tuple(m.players) + (m.env[None, :],)


def from_behavioral(profile) -> MetaProfile:
    return MetaProfile(tuple(np.asarray(p) for p in profile[:-1]), np.asarray(profile[-1])[0])


def uniform_meta_profile(mg: MetaGame) -> MetaProfile:
    players = tuple(np.full((len(t), k), 1.0 / k) for t, k in zip(mg.type_labels, mg.spaces.sizes))
    k = len(mg.spaces.env_moves)
    return MetaProfile(players, np.full(k, 1.0 / k))


def random_meta_profile(mg: MetaGame, rng: np.random.Generator) -> MetaProfile:
    players = tuple(rng.dirichlet(np.ones(k), size=len(t))
                    for t, k in zip(mg.type_labels, mg.spaces.sizes))
    return MetaProfile(players, rng.dirichlet(np.ones(len(mg.spaces.env_moves))))


# -- solving -------------------------------------------------------------------------


@dataclass
class MetaSolveResult:
    profiles: list
    method: str
    converged: bool
    max_gain: float
    table: EquilibriumTable
    iterations: int = 0
    singular_skips: int = 0
    notes: list = field(default_factory=list)


def _trivial_meta(mg: MetaGame) -> bool:
    return len(mg.tset) == 1 and not mg.has_costs()


def solve_meta_bne(mg: MetaGame, method: str = "enumerate", seed: int | None = 0,
                   tol: float = DEFAULT_TOL, table: EquilibriumTable | None = None,
                   cap: EnumerationCap = EnumerationCap(max_agents=8, max_actions=4),
                   **kwargs) -> MetaSolveResult:
    """Meta-Bayesian Nash equilibria via the reduced finite game.

    ``enumerate`` returns every equilibrium found within the size cap; ``br``
    and ``logit`` return one. Every returned profile is re-verified with
    :func:`is_meta_bne`.
    """
    table = table or build_equilibrium_table(mg)
    notes = []
    if _trivial_meta(mg):
        # players' meta-payoffs do not depend on the profile; only the
        # environment has a best-reply problem
        notes.append("singleton transformation set without costs: reduces to the classical BNE")
        m = uniform_meta_profile(mg)
        best = env_best_reply(mg, m)[0][0]
        m = m.replace_env(_point(best, len(mg.spaces.env_moves)))
        check = is_meta_bne(mg, table, m, tol)
        return MetaSolveResult([m], method, check.ok, check.max_gain, table, 0, 0, notes)
    game = to_meta_agent_game(mg, table)
    if method == "enumerate":
        info = enumerate_equilibria(game, tol=tol, cap=cap, return_info=True)
        profiles = [from_behavioral(p) for p in info.equilibria]
        gains = [is_meta_bne(mg, table, m, tol).max_gain for m in profiles]
        worst = max(gains) if gains else float("inf")
        if info.singular_skips:
            notes.append(f"{info.singular_skips} degenerate support systems (one representative kept)")
        return MetaSolveResult(profiles, method, bool(profiles) and worst <= tol, worst, table,
                               info.supports_checked, info.singular_skips, notes)
    init = kwargs.pop("init", None)
    if init is None and seed is not None:
        init = to_behavioral(random_meta_profile(mg, np.random.default_rng(seed)))
    elif isinstance(init, MetaProfile):
        init = to_behavioral(init)
    if method == "br":
        report = solve_best_response_iteration(game, init=init, tol=tol, **kwargs)
    elif method == "logit":
        report = solve_logit_homotopy(game, init=init, tol=tol, **kwargs)
    else:
        raise ValueError(f"unknown method {method!r}")
    m = from_behavioral(report.profile)
    check = is_meta_bne(mg, table, m, tol)
    if report.polished:
        notes.append("polished onto exact support solution")
    return MetaSolveResult([m], method, report.converged and check.ok, check.max_gain, table,
                           report.iterations, 0, notes)
