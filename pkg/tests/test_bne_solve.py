import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metabne import (
    Status,
    TooLarge,
    audit_uniqueness,
    enumerate_equilibria,
    is_bne,
    solve_best_response_iteration,
    solve_logit_homotopy,
)
from metabne.game import profile_distance, random_profile, uniform_profile
from metabne.solve import EnumerationCap

from helpers import battle_of_sexes, matching_pennies, prisoners_dilemma, random_game


def _near_any(p, eqs, radius):
    return any(profile_distance(p, q) <= radius for q in eqs)


def test_enumerate_pd():
    eqs = enumerate_equilibria(prisoners_dilemma())
    assert len(eqs) == 1
    np.testing.assert_array_equal(eqs[0][0], [[0, 1]])
    np.testing.assert_array_equal(eqs[0][1], [[0, 1]])


def test_enumerate_matching_pennies():
    eqs = enumerate_equilibria(matching_pennies())
    assert len(eqs) == 1
    assert profile_distance(eqs[0], uniform_profile(matching_pennies())) <= 1e-12


def test_enumerate_battle_of_sexes():
    eqs = enumerate_equilibria(battle_of_sexes())
    # hand oracle: row mixes to make column indifferent: 1 p = 2 (1 - p)
    want = [
        (np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]])),
        (np.array([[0.0, 1.0]]), np.array([[0.0, 1.0]])),
        (np.array([[2 / 3, 1 / 3]]), np.array([[1 / 3, 2 / 3]])),
    ]
    assert len(eqs) == 3
    for w in want:
        assert _near_any(w, eqs, 1e-9)


def test_audit_verdicts():
    assert audit_uniqueness(prisoners_dilemma()).status is Status.UNIQUE
    v = audit_uniqueness(battle_of_sexes())
    assert v.status is Status.MULTIPLE and len(v.equilibria) == 3


def test_audit_over_cap_is_unknown():
    g = random_game(np.random.default_rng(0), 4, 2, 2)  # 8 agents
    v = audit_uniqueness(g, cap=EnumerationCap(max_agents=6))
    assert v.status is Status.UNKNOWN and "exceeds cap" in v.reason
    with pytest.raises(TooLarge):
        enumerate_equilibria(g, cap=EnumerationCap(max_agents=6))


def test_br_pd_converges_quickly():
    rng = np.random.default_rng(1)
    for _ in range(5):
        rep = solve_best_response_iteration(prisoners_dilemma(), init=random_profile(prisoners_dilemma(), rng))
        assert rep.converged and rep.iterations <= 60
        assert rep.profile[0][0, 1] == pytest.approx(1.0, abs=1e-8)


def test_br_cycles_on_matching_pennies():
    rep = solve_best_response_iteration(matching_pennies(), init=(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]])),
                                        damping=1.0, max_iter=500, polish=False)
    assert not rep.converged


def test_br_polishing_rescues_cycles():
    rep = solve_best_response_iteration(matching_pennies(), init=(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]])),
                                        damping=1.0, max_iter=5000)
    assert rep.converged and rep.polished


def test_br_rejects_bad_damping():
    with pytest.raises(ValueError):
        solve_best_response_iteration(prisoners_dilemma(), damping=0.0)


def test_logit_matching_pennies_stays_uniform():
    rep = solve_logit_homotopy(matching_pennies(), polish=False)
    assert rep.converged
    assert profile_distance(rep.profile, uniform_profile(matching_pennies())) <= 1e-9


def test_logit_pd():
    rep = solve_logit_homotopy(prisoners_dilemma())
    assert rep.converged and rep.profile[1][0, 1] == pytest.approx(1.0, abs=1e-6)


def test_logit_battle_of_sexes_reaches_an_equilibrium():
    rep = solve_logit_homotopy(battle_of_sexes())
    assert _near_any(rep.profile, enumerate_equilibria(battle_of_sexes()), 1e-4)


def test_logit_schedule_validation():
    with pytest.raises(ValueError):
        solve_logit_homotopy(prisoners_dilemma(), lambdas=[2.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0), st.floats(-5.0, 5.0), st.integers(0, 1))
def test_enumeration_affine_invariance(seed, alpha, beta, player):
    rng = np.random.default_rng(seed)
    g = random_game(rng, 2, 2, 2)
    pay = g.payoffs.copy()
    pay[player] = alpha * pay[player] + beta
    a = enumerate_equilibria(g)
    b = enumerate_equilibria(g.with_payoffs(pay))
    assert len(a) == len(b)
    assert all(_near_any(p, b, 1e-6) for p in a)


def test_iterative_solvers_sound_on_random_2x2():
    rng = np.random.default_rng(7)
    for _ in range(200):
        g = random_game(rng, 2, 1, 2)
        eqs = enumerate_equilibria(g)
        init = random_profile(g, rng)
        for rep in (solve_best_response_iteration(g, init=init, max_iter=5000),
                    solve_logit_homotopy(g, init=init)):
            if rep.converged:
                assert is_bne(g, rep.profile, rep.tol)[0]
                assert _near_any(rep.profile, eqs, 1e-4)


def test_enumeration_routes_agree_on_two_players():
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = random_game(rng, 2, 2, int(rng.integers(2, 4)))
        lin = enumerate_equilibria(g, route="linear")
        multi = enumerate_equilibria(g, route="multilinear")
        assert len(lin) == len(multi)
        assert all(_near_any(p, multi, 1e-6) for p in lin)


def test_three_player_enumeration_finds_verified_equilibria():
    rng = np.random.default_rng(9)
    for _ in range(10):
        g = random_game(rng, 3, 1, 2)
        eqs = enumerate_equilibria(g)
        assert eqs
        for sigma in eqs:
            assert is_bne(g, sigma, 1e-8)[0]
