"""Payoff-rewriting transformations, transformation rules and induced probabilities."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeMismatch
from .game import FiniteBayesianGame, SOLVER_ATOL, as_distribution

_LETTERS = "abcdefgh"
_TYPE_LETTERS = "stuvwxyz"


@dataclass(frozen=True, eq=False)
class Transformation:
    """A named payoff rewrite.

    ``payoffs`` replaces the base game's payoff table wholesale. Closed-form
    example families leave it as None and solve the transformed game
    analytically.
    """

    id: str
    payoffs: np.ndarray | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        if self.payoffs is not None:
            pay = np.array(self.payoffs, dtype=float)
            if not np.all(np.isfinite(pay)):
                raise ValueError(f"transformation {self.id!r} has non-finite payoffs")
            pay.setflags(write=False)
            object.__setattr__(self, "payoffs", pay)

    def __eq__(self, other):
        return isinstance(other, Transformation) and other.id == self.id

    def __hash__(self):
        return hash(self.id)


class TransformationSet(tuple):
    """Ordered, non-empty collection of transformations with distinct ids."""

    def __new__(cls, items: Sequence[Transformation]):
        items = tuple(items)
        if not items:
            raise ValueError("transformation set must be non-empty")
        ids = [t.id for t in items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate transformation ids: {ids}")
        return super().__new__(cls, items)

    @property
    def ids(self) -> tuple:
        return tuple(t.id for t in self)

    def index(self, tid: str) -> int:  # type: ignore[override]
        try:
            return self.ids.index(tid)
        except ValueError:
            raise KeyError(f"unknown transformation {tid!r}") from None

    def by_id(self, tid: str) -> Transformation:
        return self[self.index(tid)]


@dataclass(frozen=True)
class MetaActionSpaces:
    meta_actions: tuple  # one label tuple per player
    env_moves: tuple

    def __post_init__(self):
        xs = tuple(tuple(str(x) for x in acts) for acts in self.meta_actions)
        es = tuple(str(e) for e in self.env_moves)
        if not xs or any(len(x) == 0 for x in xs) or not es:
            raise ValueError("meta-action sets and environment moves must be non-empty")
        object.__setattr__(self, "meta_actions", xs)
        object.__setattr__(self, "env_moves", es)

    @property
    def n_players(self) -> int:
        return len(self.meta_actions)

    @property
    def sizes(self) -> tuple:
        return tuple(len(x) for x in self.meta_actions)


@dataclass(frozen=True, eq=False)
class TransformationRule:
    """Dense total table from (meta-action profile, move, type profile) to a transformation.

    ``table`` has shape ``(|X_1|..|X_n|, |E|, |T_1|..|T_n|)`` and holds indices
    into ``ids``.
    """

    table: np.ndarray
    ids: tuple

    def __post_init__(self):
        tab = np.array(self.table, dtype=np.int64)
        ids = tuple(self.ids)
        if tab.size == 0 or tab.min() < 0 or tab.max() >= len(ids):
            raise ValueError("rule table must be total and reference known transformations")
        tab.setflags(write=False)
        object.__setattr__(self, "table", tab)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_function(cls, spaces: MetaActionSpaces, type_labels: Sequence[Sequence[str]],
                      tset: TransformationSet, fn: Callable) -> "TransformationRule":
        """Tabulate ``fn(x_labels, e_label, type_labels) -> transformation id``."""
        shape = spaces.sizes + (len(spaces.env_moves),) + tuple(len(t) for t in type_labels)
        tab = np.empty(shape, dtype=np.int64)
        n = spaces.n_players
        for idx in itertools.product(*[range(k) for k in shape]):
            x = tuple(spaces.meta_actions[i][idx[i]] for i in range(n))
            e = spaces.env_moves[idx[n]]
            th = tuple(type_labels[i][idx[n + 1 + i]] for i in range(n))
            tab[idx] = tset.index(fn(x, e, th))
        return cls(tab, tset.ids)

    @property
    def n_players(self) -> int:
        return (self.table.ndim - 1) // 2

    def lookup(self, x: Sequence[int], e: int, theta: Sequence[int]) -> str:
        return self.ids[int(self.table[tuple(x) + (e,) + tuple(theta)])]

    @cached_property
    def one_hot(self) -> np.ndarray:
        """``(|T|,) + table.shape`` indicator array."""
        out = np.zeros((len(self.ids),) + self.table.shape)
        for k in range(len(self.ids)):
            out[k] = self.table == k
        out.setflags(write=False)
        return out


@dataclass(frozen=True, eq=False)
class MetaProfile:
    """Type-dependent mixed meta-strategies plus the environment's mixed move.

    ``players[i]`` has shape ``(|T_i|, |X_i|)``; ``env`` has shape ``(|E|,)``.
    """

    players: tuple
    env: np.ndarray

    def __post_init__(self):
        players = tuple(np.array(p, dtype=float) for p in self.players)
        env = np.array(self.env, dtype=float)
        for p in players:
            if p.ndim != 2:
                raise ShapeMismatch("meta strategies must be (types, meta-actions) arrays")
            for row in p:
                as_distribution(row, atol=SOLVER_ATOL)
        as_distribution(env, atol=SOLVER_ATOL)
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "env", env)

    def replace_player_row(self, i: int, t: int, row) -> "MetaProfile":
        players = list(self.players)
        p = players[i].copy()
        p[t] = row
        players[i] = p
        return MetaProfile(tuple(players), self.env)

    def replace_env(self, env) -> "MetaProfile":
        return MetaProfile(self.players, env)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.players] + [self.env])


def apply_transformation(T: Transformation, game: FiniteBayesianGame) -> FiniteBayesianGame:
    """The transformed game: same players, actions, types and prior; payoffs replaced."""
    if T.payoffs is None:
        raise ShapeMismatch(f"transformation {T.id!r} has no payoff table")
    if T.payoffs.shape != game.payoffs.shape:
        raise ShapeMismatch(f"transformation {T.id!r} payoff shape {T.payoffs.shape} "
                            f"!= base {game.payoffs.shape}")
    return game.with_payoffs(T.payoffs, name=f"{game.name}|{T.id}" if game.name else T.id)


def joint_meta_distribution(m: MetaProfile) -> np.ndarray:
    """``J[x_1..x_n, e, t_1..t_n] = prod_i m_i(x_i | t_i) * m_0(e)``."""
    n = len(m.players)
    xs = _LETTERS[:n]
    ts = _TYPE_LETTERS[:n]
    spec = ",".join(ts[i] + xs[i] for i in range(n)) + ",e->" + xs + "e" + ts
    return np.einsum(spec, *m.players, m.env)


def transformation_probabilities(rule: TransformationRule, m: MetaProfile) -> np.ndarray:
    """``pi[k, t_1..t_n]`` = probability of transformation ``k`` at type profile ``t``."""
    n = rule.n_players
    joint = joint_meta_distribution(m)
    axes = tuple(range(1, n + 2))
    return (rule.one_hot * joint[None]).sum(axis=axes)


def transformation_probability(rule: TransformationRule, m: MetaProfile,
                               theta: Sequence[int]) -> np.ndarray:
    """Distribution over the transformation set at type profile ``theta``."""
    n = rule.n_players
    theta = tuple(int(t) for t in theta)
    if len(theta) != n:
        raise ShapeMismatch("type profile length differs from player count")
    joint = np.ones(())
    for i in range(n):
        joint = np.multiply.outer(joint, m.players[i][theta[i]])
    joint = np.multiply.outer(joint, m.env)
    cells = rule.table[(Ellipsis,) + theta]
    return np.bincount(cells.ravel(), weights=joint.ravel(), minlength=len(rule.ids))
