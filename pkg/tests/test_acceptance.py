"""Acceptance criteria, one test each; the terminal summary prints PASS/FAIL per criterion."""

import itertools
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from metabne import (
    MetaGame,
    TransformationRule,
    build_equilibrium_table,
    enumerate_equilibria,
    env_payoff,
    interim_expected_payoff,
    interim_meta_payoff,
    is_bne,
    is_meta_bne,
    solve_best_response_iteration,
    solve_logit_homotopy,
    solve_meta_bne,
    to_meta_agent_game,
)
from metabne.cli import main
from metabne.families import subsidy
from metabne.families.common import STRICT_GAP
from metabne.game import profile_distance, random_profile
from metabne.meta import random_meta_profile, to_behavioral
from metabne.sweep import FAMILIES, evaluate, run_sweep
from metabne.transform import MetaProfile, transformation_probabilities

from helpers import random_game, random_metagame, unique_payoffs

GAMES = Path(__file__).resolve().parent.parent / "games"


# -- 1: normalization and multilinearity -----------------------------------------------


def _with_rule(mg, rng):
    rule = TransformationRule(rng.integers(0, len(mg.tset), size=mg.rule.table.shape), mg.tset.ids)
    return MetaGame(mg.base, mg.tset, rule, mg.spaces, rng.normal(size=rule.table.shape), mg.meta_cost,
                    mg.backend)


def _coordinates(m):
    """(getter, setter) pairs for every player-type row and the environment."""
    out = []
    for i, p in enumerate(m.players):
        for t in range(p.shape[0]):
            out.append((p[t], lambda row, i=i, t=t: m.replace_player_row(i, t, row)))
    out.append((m.env, m.replace_env))
    return out


def test_criterion_01_normalization_and_affinity(verdict):
    rng = np.random.default_rng(101)
    bases = [random_metagame(rng, n_types=k, n_meta=a, n_transforms=3) for k, a in ((1, 2), (2, 2), (2, 3))]
    tables = [build_equilibrium_table(mg) for mg in bases]
    start = time.perf_counter()
    worst_norm = worst_aff = 0.0
    for _ in range(1000):
        k = int(rng.integers(len(bases)))
        mg, table = _with_rule(bases[k], rng), tables[k]
        m = random_meta_profile(mg, rng)
        theta = tuple(int(rng.integers(len(t))) for t in mg.type_labels)
        pi = transformation_probabilities(mg.rule, m)
        worst_norm = max(worst_norm, float(np.max(np.abs(pi.sum(axis=0) - 1.0))))

        def values(prof):
            pi_theta = transformation_probabilities(mg.rule, prof)[(slice(None),) + theta]
            v = [interim_meta_payoff(mg, table, prof, i, t)
                 for i in range(mg.n_players) for t in range(len(mg.type_labels[i]))]
            return np.concatenate([pi_theta, v, [env_payoff(mg, prof)]])

        for current, setter in _coordinates(m):
            a = rng.dirichlet(np.ones(len(current)))
            b = rng.dirichlet(np.ones(len(current)))
            lam = rng.uniform(0.05, 0.95)
            mid = values(setter(lam * a + (1 - lam) * b))
            ends = lam * values(setter(a)) + (1 - lam) * values(setter(b))
            worst_aff = max(worst_aff, float(np.max(np.abs(mid - ends))))
    elapsed = time.perf_counter() - start
    ok = worst_norm <= 1e-12 and worst_aff <= 1e-12 and elapsed < 10
    verdict(1, ok, f"max |sum pi - 1| {worst_norm:.2e}, max affinity error {worst_aff:.2e}, {elapsed:.1f}s")
    assert ok


# -- 2: singleton transformation set -------------------------------------------------------


def _singleton(base, payoffs, rng, n_meta=2, n_env=2):
    from metabne import Transformation, TransformationSet
    from metabne.transform import MetaActionSpaces
    tset = TransformationSet([Transformation("T", payoffs)])
    spaces = MetaActionSpaces(tuple(tuple(f"x{k}" for k in range(n_meta)) for _ in base.type_labels),
                              tuple(f"e{k}" for k in range(n_env)))
    cells = spaces.sizes + (n_env,) + base.n_types
    return MetaGame(base, tset, TransformationRule(np.zeros(cells, dtype=int), tset.ids), spaces,
                    rng.normal(size=cells))


def test_criterion_02_singleton_set_is_classical(verdict):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(20):
        g = random_game(rng, 2, int(rng.integers(1, 3)), int(rng.integers(2, 4)), prior="joint")
        mg = _singleton(g, unique_payoffs(rng, g), rng)
        table = build_equilibrium_table(mg)
        sol = table["T"]
        for _ in range(100):
            m = random_meta_profile(mg, rng)
            for i in range(2):
                for t in range(g.n_types[i]):
                    v = interim_meta_payoff(mg, table, m, i, t)
                    u = interim_expected_payoff(sol.game, sol.profile, i, t)
                    worst = max(worst, abs(v - u))
    ok = worst <= 1e-12
    verdict(2, ok, f"max |V - U| {worst:.2e} over 20 games x 100 profiles")
    assert ok


# -- 3: singleton types, brute-force meta-Nash oracle ----------------------------------------


def _bilinear(U, k):
    """Coefficients of player k's gain from action 1 over 0 as c0 + ca*p_a + cb*p_b + cab*p_a*p_b.

    ``p_a``, ``p_b`` are the other two players' probabilities of action 1, in player order.
    """
    d = np.take(U, 1, axis=k) - np.take(U, 0, axis=k)  # (a_a, a_b)
    return d[0, 0], d[1, 0] - d[0, 0], d[0, 1] - d[0, 0], d[1, 1] - d[1, 0] - d[0, 1] + d[0, 0]


def _three_player_nash(U, tol=1e-9):
    """All Nash equilibria of a generic 3-player 2-action game as (p_0, p_1, p_2).

    Independent of the package's support enumeration: two-player sub-supports
    are solved by hand-derived linear formulas and the fully mixed case by
    eliminating to a univariate quadratic.
    """
    coef = [_bilinear(U[k], k) for k in range(3)]
    others = [(1, 2), (0, 2), (0, 1)]

    def gain(k, p):
        c0, ca, cb, cab = coef[k]
        a, b = p[others[k][0]], p[others[k][1]]
        return c0 + ca * a + cb * b + cab * a * b

    def is_nash(p):
        for k in range(3):
            g = gain(k, p)
            if (p[k] < 1 - tol and g > tol) or (p[k] > tol and g < -tol):
                return False
        return all(-tol <= x <= 1 + tol for x in p)

    cands = [np.array(c, float) for c in itertools.product((0.0, 1.0), repeat=3)]
    for l in range(3):  # l pure, the other two mixed
        j, k = [x for x in range(3) if x != l]
        for al in (0.0, 1.0):
            p = np.zeros(3)
            p[l] = al
            # gain(j) is affine in p_k with p_l fixed, and vice versa
            for who, var in ((j, k), (k, j)):
                c0, ca, cb, cab = coef[who]
                oa, ob = others[who]
                if oa == l:  # p_l multiplies ca, var is b
                    const, slope = c0 + ca * al, cb + cab * al
                else:
                    const, slope = c0 + cb * al, ca + cab * al
                if abs(slope) < 1e-14:
                    break
                p[var] = -const / slope
            else:
                cands.append(p.copy())
    # fully mixed: gain_1(p0, p2) = 0 gives p0(r), gain_0(p1, p2) = 0 gives p1(r), r = p2
    c0, ca, cb, cab = coef[1]
    num0, den0 = np.array([-c0, -cb]), np.array([ca, cab])
    c0, ca, cb, cab = coef[0]
    num1, den1 = np.array([-c0, -cb]), np.array([ca, cab])
    c0, ca, cb, cab = coef[2]
    h = P.polyadd(P.polyadd(c0 * P.polymul(den0, den1), ca * P.polymul(num0, den1)),
                  P.polyadd(cb * P.polymul(num1, den0), cab * P.polymul(num0, num1)))
    if np.max(np.abs(h)) < 1e-12:
        raise ValueError("degenerate instance")
    for r in P.polyroots(P.polytrim(h)) if np.any(h[1:]) else []:
        if abs(r.imag) > 1e-10:
            continue
        r = r.real
        d0, d1 = P.polyval(r, den0), P.polyval(r, den1)
        if abs(d0) < 1e-12 or abs(d1) < 1e-12:
            continue
        cands.append(np.array([P.polyval(r, num0) / d0, P.polyval(r, num1) / d1, r]))
    out = []
    for p in cands:
        if is_nash(p) and not any(np.max(np.abs(p - q)) <= 1e-9 for q in out):
            out.append(np.clip(p, 0, 1))
    return out


def test_criterion_03_singleton_types_match_brute_force(verdict):
    rng = np.random.default_rng(103)
    matched = 0
    details = []
    for _ in range(20):
        mg = random_metagame(rng, n_types=1, n_meta=2, n_env=2, n_transforms=3)
        table = build_equilibrium_table(mg)
        U = np.zeros((3, 2, 2, 2))
        for x1, x2, e in itertools.product(range(2), repeat=3):
            k = mg.rule.table[x1, x2, e, 0, 0]
            for i, xi in ((0, x1), (1, x2)):
                U[i, x1, x2, e] = table.ubar[k, i, 0, 0] - mg.meta_cost[i][0, xi]
            U[2, x1, x2, e] = mg.env_payoff[x1, x2, e, 0, 0]
        oracle = _three_player_nash(U)
        found = [np.array([m.players[0][0, 1], m.players[1][0, 1], m.env[1]])
                 for m in solve_meta_bne(mg).profiles]
        same = (len(found) == len(oracle)
                and all(any(np.max(np.abs(f - o)) <= 1e-6 for o in oracle) for f in found)
                and all(any(np.max(np.abs(f - o)) <= 1e-6 for f in found) for o in oracle))
        matched += same
        details.append(len(oracle))
    ok = matched == 20
    verdict(3, ok, f"{matched}/20 equilibrium sets match (sizes {sorted(set(details))})")
    assert ok


# -- 4: existence ----------------------------------------------------------------------------


def test_criterion_04_existence(verdict):
    rng = np.random.default_rng(104)
    found, slowest = 0, 0.0
    n = 100
    for _ in range(n):
        mg = random_metagame(rng, n_types=int(rng.integers(1, 3)), n_meta=2, n_env=2,
                             n_transforms=int(rng.integers(2, 4)))
        start = time.perf_counter()
        res = solve_meta_bne(mg)  # the table build runs the uniqueness audit per transformation
        slowest = max(slowest, time.perf_counter() - start)
        found += bool(res.profiles) and res.converged
    ok = found == n and slowest < 5
    verdict(4, ok, f"{found}/{n} instances with a verified meta-equilibrium, slowest {slowest:.2f}s")
    assert ok


# -- 5: solver soundness ---------------------------------------------------------------------


def test_criterion_05_solver_soundness(verdict):
    rng = np.random.default_rng(105)
    failures, checked, far = 0, 0, 0
    for _ in range(40):
        g = random_game(rng, 2, int(rng.integers(1, 3)), int(rng.integers(2, 4)))
        init = random_profile(g, rng)
        outs = [(s, True) for s in enumerate_equilibria(g)]
        for rep in (solve_best_response_iteration(g, init=init, max_iter=20_000), solve_logit_homotopy(g, init=init)):
            outs.append((rep.profile, rep.converged))
        for sigma, conv in outs:
            if conv:
                checked += 1
                failures += not is_bne(g, sigma, 1e-6)[0]
    for _ in range(20):
        mg = random_metagame(rng, n_types=int(rng.integers(1, 3)))
        enum = solve_meta_bne(mg)
        for m in enum.profiles:
            checked += 1
            failures += not is_meta_bne(mg, enum.table, m, 1e-6).ok
        for method in ("br", "logit"):
            res = solve_meta_bne(mg, method=method, seed=int(rng.integers(1 << 30)), table=enum.table)
            if not res.converged:
                continue
            checked += 1
            m = res.profiles[0]
            failures += not is_meta_bne(mg, enum.table, m, 1e-6).ok
            if enum.singular_skips == 0:
                dist = min(profile_distance(to_behavioral(m), to_behavioral(q)) for q in enum.profiles)
                far += dist > 1e-4
    ok = failures == 0 and far == 0
    verdict(5, ok, f"{checked} converged outputs, {failures} failed verification, "
                   f"{far} iterative meta-solutions off the enumerated set")
    assert ok


# -- 6: agent-form equivalence ---------------------------------------------------------------


def test_criterion_06_meta_reduction_equivalence(verdict):
    rng = np.random.default_rng(106)
    disagreements = total = 0
    for _ in range(20):
        mg = random_metagame(rng, n_types=int(rng.integers(1, 3)), n_meta=int(rng.integers(2, 4)))
        table = build_equilibrium_table(mg)
        game = to_meta_agent_game(mg, table)
        for _ in range(500):
            m = random_meta_profile(mg, rng)
            beh = to_behavioral(m)
            for eps in (0.0, 1e-6, 0.1):
                total += 1
                disagreements += is_meta_bne(mg, table, m, eps).ok != is_bne(game, beh, eps)[0]
    ok = disagreements == 0
    verdict(6, ok, f"{disagreements} disagreements in {total} verdicts")
    assert ok


# -- 7-9: family sweeps ----------------------------------------------------------------------


def _sweep_stats(results):
    weak = sum(r.passed for r in results)
    strict_app = [r for r in results if r.summary.get("strict_total", 0)]
    strict = sum(r.strict_passed for r in strict_app)
    return weak, len(strict_app), strict


def test_criterion_07_proposition_sweep(verdict):
    start = time.perf_counter()
    results = run_sweep("subsidy", 50, seed=7)
    elapsed = time.perf_counter() - start
    errors = [r.error for r in results if r.error]
    weak, _, _ = _sweep_stats(results)
    gain_order = sum(r.summary.get("gain_order_pass") == r.summary.get("weak_total") for r in results)
    excluded = sum(r.summary.get("excluded", 0) for r in results)
    ok = not errors and weak == 50 and gain_order == 50 and elapsed < 120
    verdict(7, ok, f"weak pass {weak}/50, gain order {gain_order}/50, {excluded} indifferent rows excluded, "
                   f"{elapsed:.1f}s")
    assert ok


def test_criterion_08_cyber_sweep(verdict):
    results = run_sweep("cyber", 30, seed=8)
    errors = [r.error for r in results if r.error]
    weak, applicable, strict = _sweep_stats(results)
    ok = not errors and weak == 30 and strict == applicable
    verdict(8, ok, f"weak pass {weak}/30, strict pass {strict}/{applicable} where gains straddle "
                   f"zero by {STRICT_GAP:g}")
    assert ok


def _row_verdicts(rows):
    return [(r.equilibrium, r.player, r.excluded, r.weak, r.strict_applicable, r.strict) for r in rows]


def test_criterion_09_platform_sweep_and_grid_stability(verdict):
    results = run_sweep("platform", 30, seed=9)
    errors = [r.error for r in results if r.error]
    weak, applicable, strict = _sweep_stats(results)
    stable = 0
    for r in results:
        # the 51-point build already certified uniqueness at 101 points
        fine = replace(r.params, grid_points=101, grid_check=None)
        out, _ = evaluate(FAMILIES["platform"], fine)
        stable += _row_verdicts(out["rows"]) == _row_verdicts(r.rows)
    ok = not errors and weak == 30 and strict == applicable and stable == 30
    verdict(9, ok, f"weak pass {weak}/30, strict pass {strict}/{applicable}, "
                   f"verdicts identical at 101 grid points {stable}/30")
    assert ok


# -- 10: subsidy closed form vs grid oracle ---------------------------------------------------


def test_criterion_10_subsidy_grid_oracle(verdict):
    rng = np.random.default_rng(110)
    worst_p = worst_u = 0.0
    draws = 0
    while draws < 20:
        params = subsidy.sample_params(rng)
        try:
            closed = {t: subsidy.subsidy_within_game_solve(params, t) for t in subsidy.REGIMES}
        except subsidy.BoundaryEquilibrium:
            continue
        draws += 1
        for tid, sol in closed.items():
            prices, ubar = subsidy.grid_oracle(params, tid, step=1e-3)
            worst_p = max(worst_p, float(np.max(np.abs(prices - sol.profile))))
            worst_u = max(worst_u, float(np.max(np.abs(ubar - sol.ubar))))
    ok = worst_p <= 2e-3 and worst_u <= 1e-2
    verdict(10, ok, f"max price gap {worst_p:.2e} (bound 2e-3), max ubar gap {worst_u:.2e} (bound 1e-2)")
    assert ok


# -- 11: determinism -------------------------------------------------------------------------


COMMANDS = [
    ["solve-bne", str(GAMES / "battle_of_the_sexes.json")],
    ["solve-bne", str(GAMES / "matching_pennies.json"), "--method", "br", "--seed", "4"],
    ["solve-bne", str(GAMES / "battle_of_the_sexes.json"), "--method", "logit", "--seed", "4"],
    ["solve-meta", str(GAMES / "cyber_default.json")],
    ["solve-meta", str(GAMES / "standards_lobbying.yaml"), "--method", "logit", "--seed", "2"],
    ["solve-meta", str(GAMES / "pd_or_bos_meta.json")],
    ["audit", str(GAMES / "eight_agents.json")],
    ["sweep", "subsidy", "--instances", "5", "--seed", "3"],
    ["sweep", "cyber", "--instances", "2", "--seed", "3"],
    ["example", "platform"],
    ["example", "subsidy", "--method", "br", "--seed", "8"],
]


def test_criterion_11_determinism(verdict, tmp_path):
    identical = 0
    for k, argv in enumerate(COMMANDS):
        outputs = []
        for run in range(2):
            out = tmp_path / f"{k}-{run}.jsonl"
            code = main(argv + ["--format", "records", "--out", str(out)])
            outputs.append((code, out.read_bytes()))
        identical += outputs[0] == outputs[1] and len(outputs[0][1]) > 0
    ok = identical == len(COMMANDS)
    verdict(11, ok, f"{identical}/{len(COMMANDS)} commands byte-identical across two runs")
    assert ok
