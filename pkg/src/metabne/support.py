"""Exact equilibrium enumeration over support profiles.

Two routes share one interface:

* two-player games: the indifference conditions are linear in the opponent's
  type-contingent strategy, so each balanced support profile is a square
  linear system;
* games with three or more players: the conditions are multilinear, so each
  support profile is searched by box subdivision (a multilinear map attains
  its extrema over a box at the vertices) followed by Newton refinement.

Strictly dominated actions are removed first, which leaves the equilibrium
set unchanged.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import kernels
from .game import (
    FiniteBayesianGame,
    conditional_prior,
    max_regret,
    pack_profile,
    profile_distance,
    unpack_profile,
)

ZERO_TOL = 1e-12
MAX_FREE_DIM = 12


def agents_of(game: FiniteBayesianGame) -> list:
    return [(i, t) for i in range(game.n_players) for t in range(game.n_types[i]) if game.active[i][t]]


# -- strict dominance ---------------------------------------------------------------


def iterated_dominance(game: FiniteBayesianGame, tol: float = 1e-12) -> dict:
    """Surviving actions per (player, type) after iterated strict dominance by pure actions.

    For more than two players the dominance margin is bounded below cell by
    cell, so only actions that are truly dominated are removed.
    """
    n = game.n_players
    alive = {(i, t): np.arange(game.n_actions[i]) for i in range(n) for t in range(game.n_types[i])}
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for ti in range(game.n_types[i]):
                if not game.active[i][ti] or len(alive[(i, ti)]) == 1:
                    continue
                cond = conditional_prior(game.prior, i, ti)
                others = [j for j in range(n) if j != i]
                cand = alive[(i, ti)]
                margin = np.zeros((len(cand), len(cand)))
                for tcell in itertools.product(*[range(game.n_types[j]) for j in others]):
                    w = cond[tcell] if tcell else float(cond)
                    if w <= 0.0:
                        continue
                    types = list(tcell)
                    types.insert(i, ti)
                    u = np.moveaxis(game.payoffs[i][(Ellipsis,) + tuple(types)], i, 0)
                    # restrict opponents to their surviving actions at these types
                    idx = [cand]
                    for j in others:
                        idx.append(alive[(j, types[j])])
                    sub = u[np.ix_(*idx)].reshape(len(cand), -1)
                    # margin[a, b] = min_c (u[b, c] - u[a, c])
                    diff = sub[None, :, :] - sub[:, None, :]
                    margin += w * diff.min(axis=2)
                np.fill_diagonal(margin, -np.inf)
                dominated = (margin > tol).any(axis=1)
                if dominated.any():
                    alive[(i, ti)] = cand[~dominated]
                    changed = True
    return alive


# -- results -----------------------------------------------------------------------


@dataclass
class EnumerationResult:
    equilibria: list
    singular_skips: int = 0
    supports_checked: int = 0
    surviving: dict = field(default_factory=dict)
    route: str = ""


def dedupe(profiles: list, radius: float) -> list:
    out = []
    for p in profiles:
        if all(profile_distance(p, q) > radius for q in out):
            out.append(p)
    return out


def _sort_key(profile) -> tuple:
    return tuple(np.round(np.concatenate([np.asarray(s).ravel() for s in profile]), 9))


def _nonempty_subsets(items) -> list:
    items = list(items)
    out = []
    for r in range(1, len(items) + 1):
        out.extend(itertools.combinations(items, r))
    return out


def _finish(game, sigma_packed, tol):
    prof = unpack_profile(game, sigma_packed)
    prof = tuple(np.clip(s, 0.0, None) for s in prof)
    if any((s.sum(axis=1) <= 0.0).any() for s in prof):
        return None
    prof = tuple(s / s.sum(axis=1, keepdims=True) for s in prof)
    if max_regret(game, prof) <= tol:
        return prof
    return None


def _default_packed(game, agents, supports):
    """Packed profile with each inactive type on its first action."""
    sig = np.zeros((game.n_players, max(game.n_types), max(game.n_actions)))
    for i in range(game.n_players):
        for t in range(game.n_types[i]):
            sig[i, t, 0] = 1.0
    for (i, t), s in zip(agents, supports):
        sig[i, t, :] = 0.0
        sig[i, t, s[0]] = 1.0
    return sig


# -- two-player linear route ------------------------------------------------------


def _coefficients(game: FiniteBayesianGame, i: int) -> np.ndarray:
    """``C[(t_i, a_i), (t_j, a_j)] = p(t_j | t_i) u_i(a_i, a_j, t_i, t_j)`` for a 2-player game."""
    j = 1 - i
    ti_n, tj_n = game.n_types[i], game.n_types[j]
    ai_n, aj_n = game.n_actions[i], game.n_actions[j]
    u = game.payoffs[i]
    if i == 1:  # reorder to (a_i, a_j, t_i, t_j)
        u = u.transpose(1, 0, 3, 2)
        prior = game.prior.T
    else:
        prior = game.prior
    C = np.zeros((ti_n, ai_n, tj_n, aj_n))
    for ti in range(ti_n):
        m = prior[ti].sum()
        if m <= 0:
            continue
        for tj in range(tj_n):
            C[ti, :, tj, :] = (prior[ti, tj] / m) * u[:, :, ti, tj]
    return C.reshape(ti_n * ai_n, tj_n * aj_n)


def _solve_side(C, game, i, sup_i, sup_j, agents_i, agents_j):
    """Solve for player j's strategy making player i's agents indifferent on their supports.

    Returns ``(y, singular)`` where ``y`` is the flat (t_j, a_j) strategy or None.
    """
    j = 1 - i
    aj_n = game.n_actions[j]
    ai_n = game.n_actions[i]
    cols = [tj * aj_n + a for (_, tj), s in zip(agents_j, sup_j) for a in s]
    n_val = len(agents_i)
    rows = []
    for k, ((_, ti), s) in enumerate(zip(agents_i, sup_i)):
        for a in s:
            row = np.zeros(len(cols) + n_val)
            row[: len(cols)] = C[ti * ai_n + a, cols]
            row[len(cols) + k] = -1.0
            rows.append(row)
    rhs = [0.0] * len(rows)
    pos = 0
    for (_, tj), s in zip(agents_j, sup_j):
        row = np.zeros(len(cols) + n_val)
        row[pos: pos + len(s)] = 1.0
        pos += len(s)
        rows.append(row)
        rhs.append(1.0)
    A = np.array(rows)
    b = np.array(rhs)
    try:
        if A.shape[0] != A.shape[1]:
            raise np.linalg.LinAlgError
        sol = np.linalg.solve(A, b)
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError
        singular = False
    except np.linalg.LinAlgError:
        return _solve_side_lp(C, game, i, sup_i, sup_j, agents_i, agents_j, cols), True
    y = np.zeros(game.n_types[j] * aj_n)
    y[cols] = sol[: len(cols)]
    return y, singular


def _solve_side_lp(C, game, i, sup_i, sup_j, agents_i, agents_j, cols):
    """Feasible point of the (possibly non-unique) support polytope, or None."""
    j = 1 - i
    aj_n = game.n_actions[j]
    ai_n = game.n_actions[i]
    n_val = len(agents_i)
    nv = len(cols) + n_val
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for k, ((_, ti), s) in enumerate(zip(agents_i, sup_i)):
        for a in range(ai_n):
            row = np.zeros(nv)
            row[: len(cols)] = C[ti * ai_n + a, cols]
            row[len(cols) + k] = -1.0
            if a in s:
                A_eq.append(row)
                b_eq.append(0.0)
            else:
                A_ub.append(row)
                b_ub.append(0.0)
    pos = 0
    for (_, tj), s in zip(agents_j, sup_j):
        row = np.zeros(nv)
        row[pos: pos + len(s)] = 1.0
        pos += len(s)
        A_eq.append(row)
        b_eq.append(1.0)
    bounds = [(0, None)] * len(cols) + [(None, None)] * n_val
    res = linprog(
        np.zeros(nv),
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs",
    )
    if res.status != 0:
        return None
    y = np.zeros(game.n_types[j] * aj_n)
    y[cols] = res.x[: len(cols)]
    return y


def _enumerate_two_player(game, alive, tol):
    agents = agents_of(game)
    ag = [[a for a in agents if a[0] == p] for p in (0, 1)]
    C = [_coefficients(game, 0), _coefficients(game, 1)]
    subsets = [[_nonempty_subsets(alive[a]) for a in ag[p]] for p in (0, 1)]
    # group support profiles of each player by total excess sum(|S| - 1)
    by_excess = [{}, {}]
    for p in (0, 1):
        for combo in itertools.product(*subsets[p]):
            e = sum(len(s) - 1 for s in combo)
            by_excess[p].setdefault(e, []).append(combo)
    found, skips, checked = [], 0, 0
    for e in sorted(set(by_excess[0]) & set(by_excess[1])):
        for s0 in by_excess[0][e]:
            for s1 in by_excess[1][e]:
                checked += 1
                y1, sing1 = _solve_side(C[0], game, 0, s0, s1, ag[0], ag[1])
                if y1 is None:
                    continue
                y0, sing0 = _solve_side(C[1], game, 1, s1, s0, ag[1], ag[0])
                if y0 is None:
                    continue
                if (y0 < -1e-9).any() or (y1 < -1e-9).any():
                    continue
                sig = _default_packed(game, agents, list(s0) + list(s1))
                for p, y in ((0, y0), (1, y1)):
                    block = y.reshape(game.n_types[p], game.n_actions[p])
                    for (_, t) in ag[p]:
                        sig[p, t, : game.n_actions[p]] = block[t]
                prof = _finish(game, sig, tol)
                if prof is not None:
                    if sing0 or sing1:
                        skips += 1
                    found.append(prof)
    return found, skips, checked


# -- general multilinear route ---------------------------------------------------------


class _SupportSystem:
    """Indifference equations on one support profile, as a function of free weights."""

    def __init__(self, game, agents, supports):
        self.game = game
        self.agents = agents
        self.supports = supports
        self.payoff, self.shape_a, self.shape_t, self.prior, self.marg = game.packed
        self.base = _default_packed(game, agents, supports)
        self.vars = []  # (agent index, action) for each free coordinate
        for k, s in enumerate(supports):
            for a in s[1:]:
                self.vars.append((k, a))
        self.d = len(self.vars)
        self.eqs = self.vars  # one equation per free coordinate

    def sigma(self, z):
        sig = self.base.copy()
        for (k, a), v in zip(self.vars, z):
            i, t = self.agents[k]
            s0 = self.supports[k][0]
            sig[i, t, a] += v
            sig[i, t, s0] -= v
        return sig

    def _values(self, sig):
        return kernels.action_values(self.payoff, self.shape_a, self.shape_t, self.prior, sig)

    def residual_from_values(self, raw):
        out = np.empty(self.d)
        for e, (k, a) in enumerate(self.eqs):
            i, t = self.agents[k]
            out[e] = (raw[i, t, a] - raw[i, t, self.supports[k][0]]) / self.marg[i, t]
        return out

    def residual(self, z):
        return self.residual_from_values(self._values(self.sigma(z)))

    def jacobian(self, z):
        sig = self.sigma(z)
        J = np.zeros((self.d, self.d))
        for c, (k, a) in enumerate(self.vars):
            i, t = self.agents[k]
            direction = sig.copy()
            direction[i, :, :] = 0.0  # values are linear in player i's whole strategy
            direction[i, t, a] = 1.0
            direction[i, t, self.supports[k][0]] = -1.0
            col = self.residual_from_values(self._values(direction))
            for e, (k2, _) in enumerate(self.eqs):
                if self.agents[k2][0] == i:
                    col[e] = 0.0  # own player's strategies never enter
            J[:, c] = col
        return J

    def structurally_regular(self) -> bool:
        """False when the Jacobian is singular for every payoff table of this shape.

        Such supports have no equilibria in nondegenerate games (this is the
        multi-player analogue of skipping unbalanced supports).
        """
        if self.d == 0:
            return True
        dep = np.zeros((self.d, self.d), dtype=bool)
        for e, (k_eq, _) in enumerate(self.eqs):
            for c, (k_var, _) in enumerate(self.vars):
                dep[e, c] = self.agents[k_eq][0] != self.agents[k_var][0]
        match = maximum_bipartite_matching(csr_matrix(dep), perm_type="column")
        return bool((match >= 0).all())

    def vertex_tensor(self) -> np.ndarray:
        d = self.d
        V = np.empty((d,) + (2,) * d)
        for v in itertools.product((0, 1), repeat=d):
            V[(slice(None),) + v] = self.residual(np.array(v, dtype=float))
        return V

    def newton(self, z0, max_iter: int = 40, ftol: float = 1e-13):
        z = np.array(z0, dtype=float)
        scale = 1.0 + float(np.max(np.abs(self.payoff))) if self.payoff.size else 1.0
        for _ in range(max_iter):
            F = self.residual(z)
            if np.max(np.abs(F)) <= ftol * scale:
                J = self.jacobian(z)
                return z, np.linalg.cond(J) > 1e10
            J = self.jacobian(z)
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            z = z + step
            if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > 1e6:
                return None, False
        return None, False

    def feasible(self, z, atol: float = 1e-9) -> bool:
        if (z < -atol).any():
            return False
        pos = 0
        for s in self.supports:
            m = len(s) - 1
            if z[pos: pos + m].sum() > 1.0 + atol:
                return False
            pos += m
        return True


def _restrict(V, lo, hi):
    """Vertex values of a multilinear map on the box [lo, hi], from unit-cube vertex values."""
    out = V
    for k in range(len(lo)):
        axis = k + 1
        f0 = np.take(out, 0, axis=axis)
        f1 = np.take(out, 1, axis=axis)
        a = (1 - lo[k]) * f0 + lo[k] * f1
        b = (1 - hi[k]) * f0 + hi[k] * f1
        out = np.stack([a, b], axis=axis)
    return out


def _excluded(W, ztol) -> bool:
    return bool(((W.min(axis=1) > ztol) | (W.max(axis=1) < -ztol)).any())


def _centre_jacobian(Wt, width):
    d = Wt.shape[0]
    J = np.empty((d, d))
    for k in range(d):
        diff = np.take(Wt, 1, axis=k + 1) - np.take(Wt, 0, axis=k + 1)
        J[:, k] = diff.reshape(d, -1).mean(axis=1) / max(width[k], 1e-300)
    return J


FACE_MARGIN = 1e-9


def _solve_support_multilinear(system: _SupportSystem, tol, max_boxes, newton_width=1 / 32):
    d = system.d
    V = system.vertex_tensor()
    scale = 1.0 + float(np.max(np.abs(V)))
    ztol = 1e-12 * scale
    block_slices = []
    pos = 0
    for s in system.supports:
        block_slices.append(slice(pos, pos + len(s) - 1))
        pos += len(s) - 1
    if np.any(np.abs(V.reshape(d, -1)).max(axis=1) <= ztol):
        # an indifference condition holds identically: a continuum of solutions
        return _representative(system, tol), True
    # roots on a face of the box belong to a smaller support, and a whole face
    # can be a root set (e.g. an agent mixing with a zero weight that scales
    # other equations), so start strictly inside
    stack = [(np.full(d, FACE_MARGIN), np.full(d, 1.0 - FACE_MARGIN))]
    roots, degenerate, boxes = [], False, 0
    while stack:
        lo, hi = stack.pop()
        boxes += 1
        if boxes > max_boxes:
            degenerate = True
            break
        if any(lo[sl].sum() > 1.0 - FACE_MARGIN for sl in block_slices):
            continue
        Wt = _restrict(V, lo, hi)
        W = Wt.reshape(d, -1)
        if _excluded(W, ztol):
            continue
        width = hi - lo
        # precondition by the inverse Jacobian at the box centre; each row stays
        # multilinear, so its vertex values still bound it exactly
        Jc = _centre_jacobian(Wt, width)
        try:
            if np.linalg.cond(Jc) < 1e12:
                G = np.linalg.solve(Jc, W)
                if _excluded(G, 1e-12 * (1.0 + np.abs(G).max())):
                    continue
        except np.linalg.LinAlgError:
            pass
        if width.max() <= newton_width:
            z, singular = system.newton((lo + hi) / 2)
            if z is not None and np.all(z >= lo - width) and np.all(z <= hi + width):
                roots.append((z, singular))
                if singular:
                    degenerate = True
                continue
            if width.max() > 1e-6:
                k = int(np.argmax(width))
                mid = (lo[k] + hi[k]) / 2
                hi2 = hi.copy(); hi2[k] = mid
                lo2 = lo.copy(); lo2[k] = mid
                stack.extend([(lo2, hi), (lo, hi2)])
            continue
        k = int(np.argmax(width))
        mid = (lo[k] + hi[k]) / 2
        hi2 = hi.copy(); hi2[k] = mid
        lo2 = lo.copy(); lo2[k] = mid
        stack.extend([(lo2, hi), (lo, hi2)])
    out = []
    for z, _ in roots:
        if not system.feasible(z):
            continue
        prof = _finish(system.game, system.sigma(np.clip(z, 0.0, None)), tol)
        if prof is not None:
            out.append(prof)
    if degenerate and out:
        out = out[:1]
    return out, degenerate


def _representative(system: _SupportSystem, tol, n_starts: int = 8):
    """One solution of a degenerate support system, or an empty list."""
    rng = np.random.default_rng(0)
    centre = np.concatenate([np.full(len(s) - 1, 1.0 / len(s)) for s in system.supports])
    starts = [centre] + [
        np.concatenate([rng.dirichlet(np.ones(len(s)))[1:] for s in system.supports])
        for _ in range(n_starts)
    ]
    for z0 in starts:
        z, _ = system.newton(z0)
        if z is None or not system.feasible(z):
            continue
        prof = _finish(system.game, system.sigma(np.clip(z, 0.0, None)), tol)
        if prof is not None:
            return [prof]
    return []


def _enumerate_multilinear(game, alive, tol, max_boxes):
    agents = agents_of(game)
    found, skips, checked = [], 0, 0
    for supports in itertools.product(*[_nonempty_subsets(alive[a]) for a in agents]):
        checked += 1
        system = _SupportSystem(game, agents, list(supports))
        if not system.structurally_regular():
            continue
        if system.d > MAX_FREE_DIM:
            skips += 1
            continue
        if system.d == 0:
            prof = _finish(game, system.base, tol)
            if prof is not None:
                found.append(prof)
            continue
        profs, degenerate = _solve_support_multilinear(system, tol, max_boxes)
        if degenerate:
            skips += 1
        found.extend(profs)
    return found, skips, checked


def support_equilibrium(game: FiniteBayesianGame, supports: dict, guess, tol: float):
    """Solve the indifference system of one support profile starting near ``guess``.

    ``supports`` maps each active (player, type) to its support. Returns a
    profile with max regret at most ``tol`` or None.
    """
    agents = agents_of(game)
    sup = [tuple(sorted(supports[a])) for a in agents]
    if game.n_players == 2:
        ag = [[a for a in agents if a[0] == p] for p in (0, 1)]
        s = [[tuple(sorted(supports[a])) for a in ag[p]] for p in (0, 1)]
        C = [_coefficients(game, 0), _coefficients(game, 1)]
        y1, _ = _solve_side(C[0], game, 0, s[0], s[1], ag[0], ag[1])
        y0, _ = _solve_side(C[1], game, 1, s[1], s[0], ag[1], ag[0])
        if y0 is None or y1 is None:
            return None
        sig = _default_packed(game, agents, s[0] + s[1])
        for p, y in ((0, y0), (1, y1)):
            block = y.reshape(game.n_types[p], game.n_actions[p])
            for (_, t) in ag[p]:
                sig[p, t, : game.n_actions[p]] = block[t]
        if (sig < -1e-9).any():
            return None
        return _finish(game, sig, tol)
    system = _SupportSystem(game, agents, sup)
    packed = pack_profile(game, guess)
    z0 = np.array([packed[agents[k][0], agents[k][1], a] for k, a in system.vars])
    if system.d:
        z, _ = system.newton(z0)
        if z is None or not system.feasible(z):
            return None
    else:
        z = z0
    return _finish(game, system.sigma(np.clip(z, 0.0, None)), tol)


def enumerate_supports(game: FiniteBayesianGame, tol: float, merge_radius: float,
                       route: str = "auto", max_boxes: int = 4000,
                       alive: dict | None = None) -> EnumerationResult:
    if alive is None:
        alive = iterated_dominance(game)
    if route == "auto":
        route = "linear" if game.n_players == 2 else "multilinear"
    if route == "linear":
        if game.n_players != 2:
            raise ValueError("linear route needs exactly two players")
        found, skips, checked = _enumerate_two_player(game, alive, tol)
    elif route == "multilinear":
        found, skips, checked = _enumerate_multilinear(game, alive, tol, max_boxes)
    else:
        raise ValueError(f"unknown route {route!r}")
    found.sort(key=_sort_key)
    eqs = dedupe(found, merge_radius)
    return EnumerationResult(eqs, skips, checked, alive, route)
