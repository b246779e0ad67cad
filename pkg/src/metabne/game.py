"""Finite Bayesian games, behavioural strategies and interim payoffs."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidDistribution, ShapeMismatch, ZeroMarginal

CONSTRUCT_ATOL = 1e-12
SOLVER_ATOL = 1e-9

Profile = tuple  # tuple of (n_types_i, n_actions_i) arrays, one per player


def as_distribution(weights, atol: float = CONSTRUCT_ATOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidDistribution("distribution must be a non-empty vector")
    if not np.all(np.isfinite(w)) or np.any(w < -atol):
        raise InvalidDistribution(f"negative or non-finite weights: {w}")
    if abs(w.sum() - 1.0) > atol:
        raise InvalidDistribution(f"weights sum to {w.sum()!r}, not 1")
    return w


def independent_prior(marginals: Sequence[Sequence[float]]) -> np.ndarray:
    """Joint prior table from per-player type marginals."""
    out = np.ones(())
    for m in marginals:
        out = np.multiply.outer(out, as_distribution(m, atol=SOLVER_ATOL))
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteBayesianGame:
    """Dense finite Bayesian game.

    ``prior`` has shape ``(|T_1|, ..., |T_n|)`` and ``payoffs`` has shape
    ``(n, |A_1|, ..., |A_n|, |T_1|, ..., |T_n|)`` so that
    ``payoffs[i][a][t]`` is player ``i``'s payoff at actions ``a`` and types ``t``.
    """

    type_labels: tuple
    action_labels: tuple
    prior: np.ndarray
    payoffs: np.ndarray
    player_names: tuple = ()
    name: str = ""

    def __post_init__(self):
        tl = tuple(tuple(str(x) for x in ts) for ts in self.type_labels)
        al = tuple(tuple(str(x) for x in acts) for acts in self.action_labels)
        object.__setattr__(self, "type_labels", tl)
        object.__setattr__(self, "action_labels", al)
        n = len(tl)
        if n == 0 or len(al) != n:
            raise ShapeMismatch("need the same non-zero number of type and action sets")
        if any(len(x) == 0 for x in tl + al):
            raise ShapeMismatch("type and action sets must be non-empty")
        names = tuple(self.player_names) or tuple(f"P{i + 1}" for i in range(n))
        if len(names) != n:
            raise ShapeMismatch("player_names length differs from player count")
        object.__setattr__(self, "player_names", tuple(str(x) for x in names))

        prior = np.asarray(self.prior, dtype=float)
        shape_t = tuple(len(x) for x in tl)
        if prior.shape != shape_t:
            raise ShapeMismatch(f"prior shape {prior.shape} != {shape_t}")
        if np.any(prior < -CONSTRUCT_ATOL) or abs(prior.sum() - 1.0) > CONSTRUCT_ATOL:
            raise InvalidDistribution("prior must be nonnegative and sum to 1")
        prior = np.clip(prior, 0.0, None)
        object.__setattr__(self, "prior", _readonly(prior))

        pay = np.asarray(self.payoffs, dtype=float)
        want = (n,) + tuple(len(x) for x in al) + shape_t
        if pay.shape != want:
            raise ShapeMismatch(f"payoff shape {pay.shape} != {want}")
        if not np.all(np.isfinite(pay)):
            raise ValueError("payoff entries must be finite")
        object.__setattr__(self, "payoffs", _readonly(pay))

        for i, m in enumerate(self.marginals):
            for t in np.flatnonzero(m <= 0.0):
                warnings.warn(
                    f"type {tl[i][t]!r} of player {names[i]!r} has zero prior "
                    "probability and is excluded from equilibrium checks",
                    stacklevel=3,
                )

    # -- shapes ----------------------------------------------------------
    @property
    def n_players(self) -> int:
        return len(self.type_labels)

    @property
    def n_types(self) -> tuple:
        return tuple(len(x) for x in self.type_labels)

    @property
    def n_actions(self) -> tuple:
        return tuple(len(x) for x in self.action_labels)

    @cached_property
    def marginals(self) -> tuple:
        n = self.n_players
        return tuple(
            self.prior.sum(axis=tuple(j for j in range(n) if j != i)).reshape(-1)
            for i in range(n)
        )

    @cached_property
    def active(self) -> tuple:
        """``active[i][t]`` is True when type ``t`` of player ``i`` has positive marginal."""
        return tuple(m > 0.0 for m in self.marginals)

    @cached_property
    def packed(self):
        n = self.n_players
        nt = int(np.prod(self.n_types))
        payoff = np.ascontiguousarray(self.payoffs.reshape(n, -1))
        shape_a = np.array(self.n_actions, dtype=np.int64)
        shape_t = np.array(self.n_types, dtype=np.int64)
        prior = np.ascontiguousarray(self.prior.reshape(nt))
        marg = np.zeros((n, max(self.n_types)))
        for i, m in enumerate(self.marginals):
            marg[i, : len(m)] = m
        return payoff, shape_a, shape_t, prior, marg

    def with_payoffs(self, payoffs: np.ndarray, name: str | None = None) -> "FiniteBayesianGame":
        return FiniteBayesianGame(
            self.type_labels, self.action_labels, self.prior, payoffs,
            self.player_names, self.name if name is None else name,
        )

    def __eq__(self, other):
        if not isinstance(other, FiniteBayesianGame):
            return NotImplemented
        return (
            self.type_labels == other.type_labels
            and self.action_labels == other.action_labels
            and self.player_names == other.player_names
            and np.array_equal(self.prior, other.prior)
            and np.array_equal(self.payoffs, other.payoffs)
        )

    __hash__ = object.__hash__


# -- profiles ------------------------------------------------------------------


def validate_profile(game: FiniteBayesianGame, sigma, atol: float = SOLVER_ATOL) -> Profile:
    if len(sigma) != game.n_players:
        raise ShapeMismatch("profile has wrong number of players")
    out = []
    for i, s in enumerate(sigma):
        s = np.asarray(s, dtype=float)
        want = (game.n_types[i], game.n_actions[i])
        if s.shape != want:
            raise ShapeMismatch(f"player {i} strategy shape {s.shape} != {want}")
        for row in s:
            as_distribution(row, atol=atol)
        out.append(s)
    return tuple(out)


def uniform_profile(game: FiniteBayesianGame) -> Profile:
    return tuple(np.full((t, a), 1.0 / a) for t, a in zip(game.n_types, game.n_actions))


def pure_profile(game: FiniteBayesianGame, choices) -> Profile:
    """``choices[i][t]`` is the action index of type ``t`` of player ``i``."""
    out = []
    for i, (t, a) in enumerate(zip(game.n_types, game.n_actions)):
        s = np.zeros((t, a))
        s[np.arange(t), np.asarray(choices[i], dtype=int)] = 1.0
        out.append(s)
    return tuple(out)


def random_profile(game: FiniteBayesianGame, rng: np.random.Generator) -> Profile:
    return tuple(rng.dirichlet(np.ones(a), size=t) for t, a in zip(game.n_types, game.n_actions))


def pack_profile(game: FiniteBayesianGame, sigma) -> np.ndarray:
    out = np.zeros((game.n_players, max(game.n_types), max(game.n_actions)))
    for i, s in enumerate(sigma):
        s = np.asarray(s, dtype=float)
        out[i, : s.shape[0], : s.shape[1]] = s
    return out


def unpack_profile(game: FiniteBayesianGame, packed: np.ndarray) -> Profile:
    return tuple(
        np.array(packed[i, :t, :a]) for i, (t, a) in enumerate(zip(game.n_types, game.n_actions))
    )


def profile_distance(p, q) -> float:
    """L-infinity distance between two profiles."""
    return max(float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) for a, b in zip(p, q))


# -- interim payoffs -------------------------------------------------------------


def conditional_prior(prior: np.ndarray, i: int, t: int) -> np.ndarray:
    """Distribution over opponents' type profiles given player ``i`` has type ``t``.

    Returned with the opponents' type axes in player order.
    """
    prior = np.asarray(prior, dtype=float)
    row = np.take(prior, t, axis=i)
    mass = row.sum()
    if mass <= 0.0:
        raise ZeroMarginal(f"type {t} of player {i} has zero prior marginal")
    return row / mass


def interim_values(game: FiniteBayesianGame, sigma) -> tuple:
    """Interim payoff of every pure action for every (player, type).

    Entry ``[i][t, a]`` is player ``i``'s expected payoff at type ``t`` from
    playing ``a`` against ``sigma``; rows of zero-marginal types are zero.
    """
    payoff, shape_a, shape_t, prior, marg = game.packed
    raw = kernels.action_values(payoff, shape_a, shape_t, prior, pack_profile(game, sigma))
    out = []
    for i in range(game.n_players):
        m = marg[i, : game.n_types[i]]
        vals = np.zeros((game.n_types[i], game.n_actions[i]))
        ok = m > 0.0
        vals[ok] = raw[i, : game.n_types[i], : game.n_actions[i]][ok] / m[ok, None]
        out.append(vals)
    return tuple(out)


def _check_type(game: FiniteBayesianGame, i: int, t: int) -> None:
    if not game.active[i][t]:
        raise ZeroMarginal(f"type {game.type_labels[i][t]!r} of player {i} has zero prior marginal")


def interim_expected_payoff(game: FiniteBayesianGame, sigma, i: int, t: int) -> float:
    sigma = validate_profile(game, sigma)
    _check_type(game, i, t)
    q = interim_values(game, sigma)[i][t]
    return float(sigma[i][t] @ q)


def deviation_gain(game: FiniteBayesianGame, sigma, i: int, t: int, tie_tol: float = 1e-12):
    """Best pure deviations of type ``t`` of player ``i`` and the gain over ``sigma``.

    Returns ``(argmax_set, gain)``; the argmax set keeps every action within
    ``tie_tol`` of the maximum.
    """
    sigma = validate_profile(game, sigma)
    _check_type(game, i, t)
    q = interim_values(game, sigma)[i][t]
    best = q.max()
    argmax = tuple(int(k) for k in np.flatnonzero(q >= best - tie_tol))
    return argmax, max(0.0, float(best - sigma[i][t] @ q))


def regrets(game: FiniteBayesianGame, sigma) -> tuple:
    """Per (player, type) deviation gains; zero-marginal types report 0."""
    vals = interim_values(game, sigma)
    out = []
    for i, q in enumerate(vals):
        s = np.asarray(sigma[i], dtype=float)
        r = np.maximum(q.max(axis=1) - np.einsum("ta,ta->t", s, q), 0.0)
        r[~game.active[i]] = 0.0
        out.append(r)
    return tuple(out)


def max_regret(game: FiniteBayesianGame, sigma) -> float:
    return max(float(r.max()) for r in regrets(game, sigma))


def is_bne(game: FiniteBayesianGame, sigma, eps: float = 0.0):
    """``(verdict, max_regret)`` for the epsilon-Bayesian-Nash condition."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    sigma = validate_profile(game, sigma)
    worst = max_regret(game, sigma)
    return worst <= eps, worst


def expected_payoffs_by_type_profile(game: FiniteBayesianGame, sigma) -> np.ndarray:
    """``out[i][t]`` = expected payoff of player ``i`` at type profile ``t`` under ``sigma``.

    This is the ex-post equilibrium payoff when ``sigma`` is an equilibrium.
    """
    n = game.n_players
    out = np.empty((n,) + game.n_types)
    acts = "abcdefgh"[:n]
    types = "stuvwxyz"[:n]
    spec = acts + types + "," + ",".join(types[j] + acts[j] for j in range(n)) + "->" + types
    for i in range(n):
        out[i] = np.einsum(spec, game.payoffs[i], *[np.asarray(s) for s in sigma], optimize=True)
    return out


# -- agent form ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AgentFormGame:
    """Normal-form game with one agent per active (player, type) pair.

    ``payoffs`` has shape ``(K,) + n_actions``.
    """

    agents: tuple
    n_actions: tuple
    payoffs: np.ndarray = field(repr=False)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def action_values(self, profile) -> list:
        """Expected payoff of each pure action for each agent."""
        k = self.n_agents
        out = []
        letters = [chr(ord("a") + j) for j in range(k)]
        for a in range(k):
            spec = ",".join(["".join(letters)] + [letters[j] for j in range(k) if j != a]) + "->" + letters[a]
            ops = [np.asarray(profile[j]) for j in range(k) if j != a]
            out.append(np.einsum(spec, self.payoffs[a], *ops, optimize=True))
        return out

    def regrets(self, profile) -> np.ndarray:
        vals = self.action_values(profile)
        return np.array([max(0.0, float(q.max() - np.asarray(p) @ q)) for q, p in zip(vals, profile)])

    def is_nash(self, profile, eps: float = 0.0):
        r = self.regrets(profile)
        worst = float(r.max()) if r.size else 0.0
        return worst <= eps, worst


AGENT_FORM_CELL_CAP = 2_000_000


def to_agent_form(game: FiniteBayesianGame) -> AgentFormGame:
    """Agent form of ``game``: each active (player, type) becomes an agent."""
    for i in range(game.n_players):
        for t in range(game.n_types[i]):
            _check_type(game, i, t)
    agents = tuple((i, t) for i in range(game.n_players) for t in range(game.n_types[i]))
    n_actions = tuple(game.n_actions[i] for i, _ in agents)
    cells = int(np.prod(n_actions))
    if cells * len(agents) > AGENT_FORM_CELL_CAP:
        raise ValueError("agent form too large to tabulate")
    index = {ag: k for k, ag in enumerate(agents)}
    pay = np.zeros((len(agents),) + n_actions)
    cond = {(i, t): conditional_prior(game.prior, i, t) for i, t in agents}
    for assign in itertools.product(*[range(a) for a in n_actions]):
        for k, (i, ti) in enumerate(agents):
            c = cond[(i, ti)]
            total = 0.0
            for others in itertools.product(*[range(game.n_types[j]) for j in range(game.n_players) if j != i]):
                w = c[others] if others else c[()]
                if w == 0.0:
                    continue
                types = list(others)
                types.insert(i, ti)
                acts = tuple(assign[index[(j, types[j])]] for j in range(game.n_players))
                total += w * game.payoffs[(i,) + acts + tuple(types)]
            pay[(k,) + assign] = total
    return AgentFormGame(agents, n_actions, pay)


def agent_profile(game: FiniteBayesianGame, sigma) -> list:
    return [np.asarray(sigma[i])[t] for i in range(game.n_players) for t in range(game.n_types[i])]
