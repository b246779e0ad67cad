"""Seeded parameter sweeps over the example families."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import MetaBNEError
from .families import cyber, platform, subsidy
from .meta import build_equilibrium_table, solve_meta_bne

THREADS_ENV = "METABNE_THREADS"
MAX_DRAWS = 2000


@dataclass(frozen=True)
class Family:
    name: str
    sample: object      # rng -> params
    build: object       # params -> MetaGame
    claim: object       # (params, profiles, mg, table) -> dict(rows, summary)


def _subsidy_claim(params, profiles, mg, table):
    rep = subsidy.check_proposition(params, profiles, mg, table)
    return {"rows": rep.rows, "summary": rep.summary, "joint_crossing": rep.joint_crossing}


def _cyber_sample(rng, symmetric_types: bool = False, **_):
    p = cyber.sample_params(rng)
    if symmetric_types:
        cost = np.asarray(p.cost)
        cost[:, :, 1] = cost[:, :, 0]
        loss = np.asarray(p.loss)
        loss[:, 1] = loss[:, 0]
        p = replace(p, cost=cost, loss=loss)
    return p


def _platform_sample(rng, grid_points: int = 51, **_):
    return platform.sample_params(rng, grid_points=grid_points)


FAMILIES = {
    "subsidy": Family("subsidy", lambda rng, **_: subsidy.sample_params(rng),
                      subsidy.build_subsidy_metagame, _subsidy_claim),
    "cyber": Family("cyber", _cyber_sample, cyber.build_cyber_metagame, cyber.check_claim),
    "platform": Family("platform", _platform_sample, platform.build_platform_metagame, platform.check_claim),
}


@dataclass
class InstanceResult:
    index: int
    params: object
    draws: int
    rows: list
    summary: dict
    n_equilibria: int
    singular_skips: int
    error: str = ""

    @property
    def passed(self) -> bool:
        s = self.summary
        return not self.error and s.get("weak_pass") == s.get("weak_total")

    @property
    def strict_passed(self) -> bool:
        s = self.summary
        return not self.error and s.get("strict_pass") == s.get("strict_total")


def evaluate(family: Family, params):
    """Build, screen against the family's hypotheses, enumerate and judge one draw.

    Raises :class:`MetaBNEError` (including ``HypothesisViolated``) when the
    draw is screened out.
    """
    mg = family.build(params)
    table = build_equilibrium_table(mg)
    family.claim(params, [], mg, table)  # hypotheses only
    res = solve_meta_bne(mg, method="enumerate")
    if not res.profiles:
        raise RuntimeError("enumeration found no meta-equilibrium")
    out = family.claim(params, res.profiles, mg, table)
    return out, res


def run_instance(family: Family, index: int, seq: np.random.SeedSequence,
                 max_draws: int = MAX_DRAWS, **opts) -> InstanceResult:
    rng = np.random.default_rng(seq)
    for draw in range(1, max_draws + 1):
        try:
            params = family.sample(rng, **opts)
        except ValueError:
            continue
        try:
            out, res = evaluate(family, params)
        except MetaBNEError:
            continue
        except RuntimeError as exc:
            return InstanceResult(index, params, draw, [], {}, 0, 0, str(exc))
        return InstanceResult(index, params, draw, out["rows"], out["summary"],
                              len(res.profiles), res.singular_skips)
    return InstanceResult(index, None, max_draws, [], {}, 0, 0, "no admissible draw")


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(family: str, n_instances: int, seed: int = 0, max_draws: int = MAX_DRAWS, **opts) -> list:
    """One independent child seed per instance; results sorted by instance index."""
    fam = FAMILIES[family]
    seqs = np.random.SeedSequence(seed).spawn(n_instances)
    threads = thread_count()
    if threads == 1:
        results = [run_instance(fam, k, s, max_draws, **opts) for k, s in enumerate(seqs)]
    else:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda ks: run_instance(fam, ks[0], ks[1], max_draws, **opts),
                                    enumerate(seqs)))
    return sorted(results, key=lambda r: r.index)


def sweep_summary(results: list) -> dict:
    ok = [r for r in results if not r.error]
    return {
        "instances": len(results),
        "solved": len(ok),
        "weak_pass_instances": sum(r.passed for r in ok),
        "strict_pass_instances": sum(r.strict_passed for r in ok),
        "strict_applicable_instances": sum(1 for r in ok if r.summary.get("strict_total", 0) > 0),
        "pass_rate": (sum(r.passed for r in ok) / len(results)) if results else 0.0,
    }
