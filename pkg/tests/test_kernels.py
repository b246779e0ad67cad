import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metabne import kernels
from metabne.game import pack_profile, random_profile

from helpers import random_game

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 2), st.integers(1, 3))
def test_action_values_paths_agree(seed, n, t, a):
    rng = np.random.default_rng(seed)
    g = random_game(rng, n, t, a, prior="joint")
    payoff, shape_a, shape_t, prior, _ = g.packed
    sig = pack_profile(g, random_profile(g, rng))
    np.testing.assert_allclose(kernels.action_values_numba(payoff, shape_a, shape_t, prior, sig),
                               kernels.action_values_numpy(payoff, shape_a, shape_t, prior, sig),
                               atol=1e-12)


@needs_numba
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.floats(0.05, 1.0))
def test_br_iterate_paths_agree(seed, n, damping):
    rng = np.random.default_rng(seed)
    g = random_game(rng, n, 2, 2)
    packed = g.packed
    start = pack_profile(g, random_profile(g, rng))
    outs = []
    for fn in (kernels.br_iterate_numba, kernels.br_iterate_numpy):
        sig, avg = start.copy(), np.zeros_like(start)
        it, worst, ok = fn(*packed, sig, avg, damping, 50, 1e-9)
        outs.append((it, worst, ok, sig, avg))
    (i1, w1, o1, s1, a1), (i2, w2, o2, s2, a2) = outs
    assert i1 == i2 and o1 == o2
    assert w1 == pytest.approx(w2, abs=1e-10)
    np.testing.assert_allclose(s1, s2, atol=1e-10)
    np.testing.assert_allclose(a1, a2, atol=1e-9)


def _jit_state(value):
    env = dict(os.environ, METABNE_DISABLE_JIT=value)
    out = subprocess.run([sys.executable, "-c", "from metabne import kernels; print(kernels.jit_enabled())"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy_path():
    assert _jit_state("1") == "False"
    assert _jit_state("") == str(kernels.HAVE_NUMBA)


def test_solver_results_identical_without_jit():
    script = ("import numpy as np; from metabne import enumerate_equilibria, solve_best_response_iteration;"
              "from metabne.game import FiniteBayesianGame;"
              "rng=np.random.default_rng(3);"
              "g=FiniteBayesianGame((('a','b'),('a','b')),(('x','y'),('x','y')),np.full((2,2),.25),rng.normal(size=(2,2,2,2,2)));"
              "r=solve_best_response_iteration(g);print(np.round(np.concatenate([s.ravel() for s in r.profile]),9).tolist(), r.converged)")
    runs = []
    for flag in ("0", "1"):
        env = dict(os.environ, METABNE_DISABLE_JIT=flag)
        runs.append(subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True,
                                   check=True).stdout)
    assert runs[0] == runs[1]
