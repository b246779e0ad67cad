"""Regenerate the table-style game files under games/."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from metabne.families import cyber
from metabne.game import FiniteBayesianGame, independent_prior
from metabne.io import dump, game_to_doc, meta_to_doc
from metabne.meta import MetaGame
from metabne.transform import MetaActionSpaces, Transformation, TransformationRule, TransformationSet

OUT = Path(__file__).resolve().parent.parent / "games"


def bimatrix(name, actions, u1, u2, names=("row", "col")) -> FiniteBayesianGame:
    pay = np.stack([np.asarray(u1, float), np.asarray(u2, float)])[..., None, None]
    return FiniteBayesianGame((("-",), ("-",)), (actions, actions), np.ones((1, 1)), pay, names, name)


def main() -> None:
    mp = bimatrix("matching-pennies", ("H", "T"), [[1, -1], [-1, 1]], [[-1, 1], [1, -1]])
    doc = game_to_doc(mp)
    doc["expect"] = {"solve_bne": {"count": 1, "profiles": [{"row": {"-": {"H": 0.5, "T": 0.5}},
                                                             "col": {"-": {"H": 0.5, "T": 0.5}}}]},
                     "audit": "unique"}
    dump(doc, OUT / "matching_pennies.json")

    bos = bimatrix("battle-of-the-sexes", ("X", "Y"), [[2, 0], [0, 1]], [[1, 0], [0, 2]])
    doc = game_to_doc(bos)
    doc["expect"] = {"solve_bne": {"count": 3, "profiles": [
        {"row": {"-": {"X": 1.0, "Y": 0.0}}, "col": {"-": {"X": 1.0, "Y": 0.0}}},
        {"row": {"-": {"X": 0.0, "Y": 1.0}}, "col": {"-": {"X": 0.0, "Y": 1.0}}},
        {"row": {"-": {"X": 2 / 3, "Y": 1 / 3}}, "col": {"-": {"X": 1 / 3, "Y": 2 / 3}}}]},
        "audit": "multiple"}
    dump(doc, OUT / "battle_of_the_sexes.json")

    # a meta-game in which the environment may impose the coordination game
    pd = bimatrix("pd-or-bos", ("X", "Y"), [[3, 0], [5, 1]], [[3, 5], [0, 1]])
    tset = TransformationSet([Transformation("identity", pd.payoffs), Transformation("bos", bos.payoffs)])
    spaces = MetaActionSpaces((("-",), ("-",)), ("keep", "switch"))
    rule = TransformationRule.from_function(spaces, pd.type_labels, tset,
                                            lambda x, e, th: "identity" if e == "keep" else "bos")
    mg = MetaGame(pd, tset, rule, spaces, np.zeros(rule.table.shape), name="pd-or-bos")
    doc = meta_to_doc(mg)
    doc["expect"] = {"audit": {"identity": "unique", "bos": "multiple"},
                     "solve_meta": {"exit": 3, "violated": "bos"}}
    dump(doc, OUT / "pd_or_bos_meta.json")

    sym = cyber.CyberParams(cost=(((0.5, 0.5), (0.5, 0.5)),) * 3, loss=((1.0, 1.0),) * 3, eps_perturb=0.0)
    g = cyber.cyber_base_game(sym, "legacy")
    doc = game_to_doc(FiniteBayesianGame(g.type_labels, g.action_labels, g.prior, g.payoffs,
                                         g.player_names, "unperturbed-coordination"))
    doc["expect"] = {"audit": "multiple"}
    dump(doc, OUT / "unperturbed_coordination.json")

    rng = np.random.default_rng(7)
    types = tuple(tuple(f"t{k}" for k in range(4)) for _ in range(2))
    big = FiniteBayesianGame(types, (("a", "b"), ("a", "b")),
                             independent_prior([np.full(4, 0.25)] * 2),
                             np.round(rng.uniform(size=(2, 2, 2, 4, 4)), 3), ("p1", "p2"), "eight-agents")
    doc = game_to_doc(big)
    doc["expect"] = {"audit": "unknown"}
    dump(doc, OUT / "eight_agents.json")

    mg = cyber.build_cyber_metagame(cyber.CyberParams())
    doc = meta_to_doc(mg)
    doc["name"] = "cyber-default"
    doc["expect"] = {"audit": {"open": "unique", "strict": "unique", "legacy": "unique"},
                     "solve_meta": {"exit": 0, "count": 7}}
    dump(doc, OUT / "cyber_default.json")


if __name__ == "__main__":
    main()
