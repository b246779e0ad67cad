"""Bayesian Nash equilibrium solvers and the uniqueness audit."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from . import kernels
from .errors import TooLarge
from .game import (
    FiniteBayesianGame,
    Profile,
    max_regret,
    random_profile,
    pack_profile,
    uniform_profile,
    unpack_profile,
    validate_profile,
)
from .support import agents_of, enumerate_supports, iterated_dominance, support_equilibrium

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MERGE_RADIUS = 1e-6
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class EnumerationCap:
    max_agents: int = 6
    max_actions: int = 4


DEFAULT_CAP = EnumerationCap()


class Status(str, enum.Enum):
    UNIQUE = "Unique"
    MULTIPLE = "Multiple"
    UNKNOWN = "Unknown"


@dataclass
class SolveReport:
    profile: Profile
    method: str
    iterations: int
    max_regret: float
    converged: bool
    tol: float = DEFAULT_TOL
    polished: bool = False
    detail: str = ""


@dataclass
class UniquenessVerdict:
    status: Status
    equilibria: list
    merge_radius: float = DEFAULT_MERGE_RADIUS
    singular_skips: int = 0
    reason: str = ""

    @property
    def unique(self) -> bool:
        return self.status is Status.UNIQUE


def _check_cap(game: FiniteBayesianGame, alive: dict, cap: EnumerationCap) -> None:
    agents = agents_of(game)
    widest = max(len(alive[a]) for a in agents)
    if len(agents) > cap.max_agents or widest > cap.max_actions:
        raise TooLarge(
            f"{len(agents)} agents with up to {widest} undominated actions "
            f"exceeds cap ({cap.max_agents} agents, {cap.max_actions} actions)"
        )


def enumerate_equilibria(game: FiniteBayesianGame, tol: float = DEFAULT_TOL,
                         merge_radius: float = DEFAULT_MERGE_RADIUS,
                         cap: EnumerationCap = DEFAULT_CAP, route: str = "auto",
                         return_info: bool = False):
    """All Bayesian Nash equilibria found by support enumeration.

    Complete for nondegenerate games. Degenerate support systems are skipped
    (one representative equilibrium is kept) and counted in the diagnostics
    returned with ``return_info=True``.
    """
    alive = iterated_dominance(game)
    _check_cap(game, alive, cap)
    info = enumerate_supports(game, tol, merge_radius, route=route, alive=alive)
    if info.singular_skips:
        log.info("%d degenerate support systems skipped", info.singular_skips)
    return info if return_info else info.equilibria


def audit_uniqueness(game: FiniteBayesianGame, tol: float = DEFAULT_TOL,
                     merge_radius: float = DEFAULT_MERGE_RADIUS,
                     cap: EnumerationCap = DEFAULT_CAP) -> UniquenessVerdict:
    try:
        info = enumerate_equilibria(game, tol, merge_radius, cap, return_info=True)
    except TooLarge as exc:
        return UniquenessVerdict(Status.UNKNOWN, [], merge_radius, 0, str(exc))
    eqs = info.equilibria
    if len(eqs) > 1:
        return UniquenessVerdict(Status.MULTIPLE, eqs, merge_radius, info.singular_skips)
    if len(eqs) == 1 and info.singular_skips == 0:
        return UniquenessVerdict(Status.UNIQUE, eqs, merge_radius, 0)
    reason = (f"{info.singular_skips} degenerate support systems"
              if info.singular_skips else "no equilibrium found")
    return UniquenessVerdict(Status.UNKNOWN, eqs, merge_radius, info.singular_skips, reason)


# -- polishing --------------------------------------------------------------------------


def polish_profile(game: FiniteBayesianGame, guess, tol: float = DEFAULT_TOL):
    """Snap an approximate equilibrium onto the exact solution of its apparent support."""
    guess = tuple(np.asarray(s, dtype=float) for s in guess)
    tried = set()
    for thr in (1e-3, 1e-5, 1e-2, 1e-7, 5e-2):
        supports = {}
        for i, t in agents_of(game):
            row = guess[i][t]
            sup = tuple(int(a) for a in np.flatnonzero(row > thr)) or (int(np.argmax(row)),)
            supports[(i, t)] = sup
        key = tuple(sorted(supports.items()))
        if key in tried:
            continue
        tried.add(key)
        prof = support_equilibrium(game, supports, guess, tol)
        if prof is not None:
            return prof
    return None


# -- damped best-response iteration -----------------------------------------------------


def solve_best_response_iteration(game: FiniteBayesianGame, init=None, damping: float = 0.5,
                                  max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                                  polish: bool = True, polish_every: int = 1000) -> SolveReport:
    """Damped pure best-response dynamics ``s <- (1-d) s + d BR(s)``.

    Best responses break ties by lowest action index. With ``polish`` the
    average of each block of ``polish_every`` iterates is snapped onto its
    support's exact equilibrium, which lets cycling dynamics around a mixed
    equilibrium terminate.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    sigma0 = uniform_profile(game) if init is None else validate_profile(game, init)
    payoff, shape_a, shape_t, prior, marg = game.packed
    sig = pack_profile(game, sigma0)
    done = 0
    worst = np.inf
    while done < max_iter:
        chunk = min(polish_every, max_iter - done)
        avg = np.zeros_like(sig)
        it, worst, ok = kernels.br_iterate(payoff, shape_a, shape_t, prior, marg, sig, avg,
                                           damping, chunk, tol)
        if ok:
            done += it
            prof = unpack_profile(game, sig)
            return SolveReport(prof, "br", done, float(worst), True, tol)
        done += chunk
        if polish:
            guess = unpack_profile(game, avg / chunk)
            snapped = polish_profile(game, guess, tol)
            if snapped is not None:
                return SolveReport(snapped, "br", done, max_regret(game, snapped), True, tol,
                                   polished=True)
    prof = unpack_profile(game, sig)
    return SolveReport(prof, "br", done, float(max_regret(game, prof)), False, tol,
                       detail="iteration budget exhausted")


# -- logit homotopy ---------------------------------------------------------------------


class _LogitSystem:
    def __init__(self, game: FiniteBayesianGame):
        self.game = game
        self.payoff, self.shape_a, self.shape_t, self.prior, self.marg = game.packed
        self.agents = agents_of(game)
        self.slices = []
        pos = 0
        for i, _ in self.agents:
            self.slices.append(slice(pos, pos + game.n_actions[i]))
            pos += game.n_actions[i]
        self.size = pos
        self.base = pack_profile(game, uniform_profile(game))

    def sigma(self, y):
        sig = self.base.copy()
        for (i, t), sl in zip(self.agents, self.slices):
            sig[i, t, : self.game.n_actions[i]] = np.exp(y[sl])
        return sig

    def values(self, sig):
        raw = kernels.action_values(self.payoff, self.shape_a, self.shape_t, self.prior, sig)
        return np.concatenate([raw[i, t, : self.game.n_actions[i]] / self.marg[i, t]
                               for i, t in self.agents])

    def residual(self, y, lam):
        q = self.values(self.sigma(y))
        out = np.empty_like(y)
        for sl in self.slices:
            out[sl] = y[sl] - lam * q[sl] + logsumexp(lam * q[sl])
        return out

    def jacobian(self, y, lam):
        sig = self.sigma(y)
        q = self.values(sig)
        D = np.zeros((self.size, self.size))  # dQ / dsigma
        for (i, t), sl in zip(self.agents, self.slices):
            for b in range(self.game.n_actions[i]):
                direction = sig.copy()
                direction[i, :, :] = 0.0
                direction[i, t, b] = 1.0
                col = self.values(direction)
                for (j, _), sl2 in zip(self.agents, self.slices):
                    if j == i:
                        col[sl2] = 0.0
                D[:, sl.start + b] = col
        M = D.copy()
        for sl in self.slices:
            pi = softmax(lam * q[sl])
            M[sl, :] = D[sl, :] - (pi @ D[sl, :])[None, :]
        return np.eye(self.size) - lam * M * np.exp(y)[None, :]

    def newton(self, y0, lam, ftol=1e-10, max_iter=60):
        y = y0.copy()
        F = self.residual(y, lam)
        its = 0
        for its in range(1, max_iter + 1):
            norm = np.max(np.abs(F))
            if norm <= ftol:
                return y, its, True
            J = self.jacobian(y, lam)
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            alpha = 1.0
            while alpha > 1e-4:
                y_new = y + alpha * step
                with np.errstate(over="ignore", invalid="ignore"):  # overshoots are rejected below
                    F_new = self.residual(y_new, lam)
                if np.all(np.isfinite(F_new)) and np.max(np.abs(F_new)) < norm:
                    break
                alpha /= 2
            else:
                return y, its, False
            y, F = y_new, F_new
        return y, its, np.max(np.abs(F)) <= ftol


def default_lambda_schedule() -> np.ndarray:
    return np.geomspace(1.0, 1e4, 40)


def solve_logit_homotopy(game: FiniteBayesianGame, lambdas=None, tol: float = DEFAULT_TOL,
                         init=None, polish: bool = True, max_halvings: int = 12) -> SolveReport:
    """Follow logit response fixed points along an increasing precision schedule.

    Each precision's fixed point is found by Newton's method warm-started
    from the previous one; failed steps are bisected in log-precision.
    """
    lambdas = default_lambda_schedule() if lambdas is None else np.asarray(lambdas, dtype=float)
    if lambdas.size == 0 or np.any(np.diff(lambdas) <= 0) or lambdas[0] <= 0:
        raise ValueError("lambda schedule must be positive and strictly increasing")
    system = _LogitSystem(game)
    start = uniform_profile(game) if init is None else validate_profile(game, init)
    y = np.concatenate([np.log(np.clip(start[i][t], 1e-300, None)) for i, t in system.agents])
    total = 0
    lam_prev = None
    path_ok = True
    for lam in lambdas:
        targets = [lam]
        depth = 0
        while targets:
            target = targets[-1]
            y_new, its, ok = system.newton(y, target)
            total += its
            if ok:
                y = y_new
                lam_prev = target
                targets.pop()
                continue
            if lam_prev is None or depth >= max_halvings:
                path_ok = False
                break
            depth += 1
            targets.append(float(np.sqrt(lam_prev * target)))
        if not path_ok:
            break
    sig = system.sigma(y)
    prof = unpack_profile(game, sig)
    prof = tuple(s / s.sum(axis=1, keepdims=True) for s in prof)
    worst = max_regret(game, prof)
    detail = "" if path_ok else f"path stalled at lambda={lam_prev}"
    if worst <= tol:
        return SolveReport(prof, "logit", total, worst, True, tol, detail=detail)
    if polish:
        snapped = polish_profile(game, prof, tol)
        if snapped is not None:
            return SolveReport(snapped, "logit", total, max_regret(game, snapped), True, tol,
                               polished=True, detail=detail)
    return SolveReport(prof, "logit", total, worst, False, tol, detail=detail or "not within tol")


def solve(game: FiniteBayesianGame, method: str = "logit", tol: float = DEFAULT_TOL,
          seed: int | None = None, **kwargs):
    """Dispatch by method name: ``enumerate``, ``br`` or ``logit``."""
    if method == "enumerate":
        return enumerate_equilibria(game, tol=tol, **kwargs)
    init = kwargs.pop("init", None)
    if init is None and seed is not None:
        init = random_profile(game, np.random.default_rng(seed))
    if method == "br":
        return solve_best_response_iteration(game, init=init, tol=tol, **kwargs)
    if method == "logit":
        return solve_logit_homotopy(game, tol=tol, init=init, **kwargs)
    raise ValueError(f"unknown method {method!r}")
