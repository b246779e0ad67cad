"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Both implementations share one packed layout:

* ``payoff``  -- ``(n, NA * NT)`` float array, the game's payoff tensor
  ``(n, A_1..A_n, T_1..T_n)`` flattened so that cell ``acell * NT + tcell``
  holds the payoff at action profile ``acell`` and type profile ``tcell``.
* ``sigma``   -- ``(n, Tmax, Amax)`` behavioural profile, zero padded.
* ``prior``   -- ``(NT,)`` flattened joint prior.

Set ``METABNE_DISABLE_JIT=1`` to force the numpy path (numba is also skipped
automatically when it cannot be imported).
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

TIE_TOL = 1e-12


def jit_enabled() -> bool:
    flag = os.environ.get("METABNE_DISABLE_JIT", "").strip().lower()
    return HAVE_NUMBA and flag not in {"1", "true", "yes", "on"}


# --------------------------------------------------------------------------
# numpy implementations


def _einsum_specs(n: int) -> list[str]:
    acts = "abcdefgh"[:n]
    types = "stuvwxyz"[:n]
    specs = []
    for i in range(n):
        ops = [acts + types, types]
        for j in range(n):
            if j != i:
                ops.append(types[j] + acts[j])
        specs.append(",".join(ops) + "->" + types[i] + acts[i])
    return specs


def action_values_numpy(payoff, shape_a, shape_t, prior, sigma):
    """Prior-weighted (unnormalised) interim action values, shape of ``sigma``."""
    n = len(shape_a)
    if n > 8:
        raise ValueError("at most 8 players supported")
    shape_a = tuple(int(x) for x in shape_a)
    shape_t = tuple(int(x) for x in shape_t)
    u = payoff.reshape((n,) + shape_a + shape_t)
    p = prior.reshape(shape_t)
    out = np.zeros_like(sigma, dtype=float)
    strat = [sigma[j, : shape_t[j], : shape_a[j]] for j in range(n)]
    for i, spec in enumerate(_einsum_specs(n)):
        ops = [u[i], p] + [strat[j] for j in range(n) if j != i]
        out[i, : shape_t[i], : shape_a[i]] = np.einsum(spec, *ops, optimize=True)
    return out


def br_iterate_numpy(payoff, shape_a, shape_t, prior, marg, sigma, avg,
                     damping, n_iter, tol):
    """Run up to ``n_iter`` damped best-response steps in place.

    Returns ``(iterations_done, max_regret, converged)``. ``avg`` accumulates
    the sum of visited profiles.
    """
    n = len(shape_a)
    for it in range(n_iter):
        raw = action_values_numpy(payoff, shape_a, shape_t, prior, sigma)
        worst = 0.0
        target = np.zeros_like(sigma)
        for i in range(n):
            for t in range(shape_t[i]):
                if marg[i, t] <= 0.0:
                    target[i, t] = sigma[i, t]
                    continue
                q = raw[i, t, : shape_a[i]] / marg[i, t]
                best = q.max()
                regret = best - float(sigma[i, t, : shape_a[i]] @ q)
                worst = max(worst, regret)
                k = int(np.flatnonzero(q >= best - TIE_TOL)[0])
                target[i, t, k] = 1.0
        if worst <= tol:
            return it, worst, True
        sigma *= 1.0 - damping
        sigma += damping * target
        avg += sigma
    raw = action_values_numpy(payoff, shape_a, shape_t, prior, sigma)
    worst = _max_regret_packed(raw, shape_a, shape_t, marg, sigma)
    return n_iter, worst, worst <= tol


def _max_regret_packed(raw, shape_a, shape_t, marg, sigma):
    worst = 0.0
    for i in range(len(shape_a)):
        for t in range(shape_t[i]):
            if marg[i, t] <= 0.0:
                continue
            q = raw[i, t, : shape_a[i]] / marg[i, t]
            worst = max(worst, q.max() - float(sigma[i, t, : shape_a[i]] @ q))
    return worst


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def action_values_numba(payoff, shape_a, shape_t, prior, sigma):
        n = shape_a.shape[0]
        na = 1
        for j in range(n):
            na *= shape_a[j]
        nt = 1
        for j in range(n):
            nt *= shape_t[j]
        out = np.zeros(sigma.shape)
        a = np.zeros(n, np.int64)
        t = np.zeros(n, np.int64)
        for tcell in range(nt):
            pt = prior[tcell]
            if pt == 0.0:
                continue
            rem = tcell
            for j in range(n - 1, -1, -1):
                t[j] = rem % shape_t[j]
                rem //= shape_t[j]
            for acell in range(na):
                rem = acell
                for j in range(n - 1, -1, -1):
                    a[j] = rem % shape_a[j]
                    rem //= shape_a[j]
                col = acell * nt + tcell
                for i in range(n):
                    w = pt
                    for j in range(n):
                        if j != i:
                            w *= sigma[j, t[j], a[j]]
                    if w != 0.0:
                        out[i, t[i], a[i]] += w * payoff[i, col]
        return out

    @numba.njit(cache=True)
    def br_iterate_numba(payoff, shape_a, shape_t, prior, marg, sigma, avg,
                         damping, n_iter, tol):
        n = shape_a.shape[0]
        target = np.zeros(sigma.shape)
        for it in range(n_iter):
            raw = action_values_numba(payoff, shape_a, shape_t, prior, sigma)
            worst = 0.0
            target[:] = 0.0
            for i in range(n):
                for t in range(shape_t[i]):
                    if marg[i, t] <= 0.0:
                        for k in range(shape_a[i]):
                            target[i, t, k] = sigma[i, t, k]
                        continue
                    best = -np.inf
                    for k in range(shape_a[i]):
                        q = raw[i, t, k] / marg[i, t]
                        if q > best:
                            best = q
                    cur = 0.0
                    for k in range(shape_a[i]):
                        cur += sigma[i, t, k] * raw[i, t, k] / marg[i, t]
                    if best - cur > worst:
                        worst = best - cur
                    for k in range(shape_a[i]):
                        if raw[i, t, k] / marg[i, t] >= best - 1e-12:
                            target[i, t, k] = 1.0
                            break
            if worst <= tol:
                return it, worst, True
            for i in range(sigma.shape[0]):
                for t in range(sigma.shape[1]):
                    for k in range(sigma.shape[2]):
                        sigma[i, t, k] = (1.0 - damping) * sigma[i, t, k] + damping * target[i, t, k]
                        avg[i, t, k] += sigma[i, t, k]
        raw = action_values_numba(payoff, shape_a, shape_t, prior, sigma)
        worst = 0.0
        for i in range(n):
            for t in range(shape_t[i]):
                if marg[i, t] <= 0.0:
                    continue
                best = -np.inf
                cur = 0.0
                for k in range(shape_a[i]):
                    q = raw[i, t, k] / marg[i, t]
                    cur += sigma[i, t, k] * q
                    if q > best:
                        best = q
                if best - cur > worst:
                    worst = best - cur
        return n_iter, worst, worst <= tol

else:  # pragma: no cover
    action_values_numba = None
    br_iterate_numba = None


def action_values(payoff, shape_a, shape_t, prior, sigma):
    if jit_enabled():
        return action_values_numba(payoff, shape_a, shape_t, prior, sigma)
    return action_values_numpy(payoff, shape_a, shape_t, prior, sigma)


def br_iterate(payoff, shape_a, shape_t, prior, marg, sigma, avg, damping, n_iter, tol):
    if jit_enabled():
        return br_iterate_numba(payoff, shape_a, shape_t, prior, marg, sigma, avg,
                                float(damping), int(n_iter), float(tol))
    return br_iterate_numpy(payoff, shape_a, shape_t, prior, marg, sigma, avg,
                            damping, n_iter, tol)
