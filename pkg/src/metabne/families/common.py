"""Monotone comparative-statics verdicts shared by the example families."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..meta import EquilibriumTable, MetaGame, meta_gain
from ..transform import TransformationRule

WEAK_SLACK = 1e-9
GENERIC_TOL = 1e-9
STRICT_GAP = 1e-6


@dataclass
class MonotoneRow:
    """Verdict for one player in one meta-equilibrium.

    ``hi``/``lo`` refer to the type predicted to favour the target meta-action
    and the other type. ``delta_*`` are the gains from switching to the
    target meta-action at that type, costs included.
    """

    equilibrium: int
    player: int
    prob_hi: float
    prob_lo: float
    delta_hi: float
    delta_lo: float
    excluded: bool
    weak: bool
    strict_applicable: bool
    strict: bool
    gain_order: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def monotone_rows(mg: MetaGame, table: EquilibriumTable, profiles, hi: int, lo: int,
                  x_from: int, x_to: int, slack: float = WEAK_SLACK,
                  generic_tol: float = GENERIC_TOL, strict_gap: float = STRICT_GAP) -> list:
    """Check ``m_i(x_to | hi) >= m_i(x_to | lo)`` in every supplied meta-equilibrium.

    Pairs where both types are indifferent (``|delta| <= generic_tol``) are
    marked excluded: any mixing is a best reply there. The strict inequality
    is only predicted when the gains straddle zero by at least ``strict_gap``.
    """
    rows = []
    for k, m in enumerate(profiles):
        for i in range(mg.n_players):
            d_hi = meta_gain(mg, table, m, i, hi, x_from, x_to)
            d_lo = meta_gain(mg, table, m, i, lo, x_from, x_to)
            p_hi = float(m.players[i][hi, x_to])
            p_lo = float(m.players[i][lo, x_to])
            excluded = abs(d_hi) <= generic_tol and abs(d_lo) <= generic_tol
            applicable = d_hi >= strict_gap and d_lo <= -strict_gap
            rows.append(MonotoneRow(
                equilibrium=k, player=i, prob_hi=p_hi, prob_lo=p_lo,
                delta_hi=float(d_hi), delta_lo=float(d_lo), excluded=excluded,
                weak=p_hi >= p_lo - slack,
                strict_applicable=applicable,
                strict=(p_hi > p_lo + slack) if applicable else False,
                gain_order=d_hi >= d_lo - slack,
            ))
    return rows


def summarize(rows: list) -> dict:
    live = [r for r in rows if not r.excluded]
    strict = [r for r in live if r.strict_applicable]
    return {
        "rows": len(rows),
        "excluded": len(rows) - len(live),
        "weak_pass": sum(r.weak for r in live),
        "weak_total": len(live),
        "strict_pass": sum(r.strict for r in strict),
        "strict_total": len(strict),
        "gain_order_pass": sum(r.gain_order for r in live),
    }


def single_crossing(diff_hi: np.ndarray, diff_lo: np.ndarray, strict: bool = True) -> bool:
    """Elementwise ``diff_hi > diff_lo`` (or ``>=``) over opponent types."""
    return bool(np.all(diff_hi > diff_lo) if strict else np.all(diff_hi >= diff_lo))


def welfare_env_payoff(rule: TransformationRule, table: EquilibriumTable) -> np.ndarray:
    """Environment payoff: total ex-post equilibrium payoff of the implemented transformation."""
    total = table.ubar.sum(axis=1)  # (K,) + types
    n = rule.n_players
    idx = np.indices(rule.table.shape)
    types = tuple(idx[n + 1 + i] for i in range(n))
    return total[(rule.table,) + types]
