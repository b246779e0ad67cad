"""Reading and writing game and meta-game definition files.

Files are JSON (canonical) or YAML. A document looks like::

    {
      "name": "prisoners-dilemma",
      "players": [{"name": "row", "types": ["-"], "actions": ["C", "D"]}, ...],
      "prior": {"independent": [[1.0], [1.0]]},        # or {"joint": [{"types": [...], "p": 0.4}, ...]}
      "payoffs": {"default": 0, "entries": [{"actions": ["C", "D"], "types": ["*", "*"], "u": [0, 5]}]},
      "meta": {...},                                   # optional
      "expect": {...}                                  # optional annotations
    }

Payoff entries may use ``"*"`` for any label; later entries override
earlier ones and every cell must be covered unless a default is given.
The meta section holds ``transformations`` (full payoff tables),
``meta_actions``, ``env_moves``, ``rule`` (first matching case wins, then
``default``), ``env_payoff`` and optional ``costs``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import yaml

from .errors import SchemaError
from .game import FiniteBayesianGame
from .meta import FiniteGameBackend, MetaGame
from .transform import MetaActionSpaces, Transformation, TransformationRule, TransformationSet

WILDCARD = "*"
LOAD_ATOL = 1e-9


def load_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(str(exc), str(path)) from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else str(path)
            raise SchemaError(str(getattr(exc, "problem", exc)), where) from exc
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a mapping", str(path))
    return doc


def _get(d: dict, key: str, where: str, kind=None, default=...):
    if not isinstance(d, dict):
        raise SchemaError("expected a mapping", where)
    if key not in d:
        if default is ...:
            raise SchemaError("missing field", f"{where}.{key}" if where else key)
        return default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise SchemaError(f"expected {getattr(kind, '__name__', kind)}", f"{where}.{key}" if where else key)
    return v


def _labels(v, where: str) -> tuple:
    if not isinstance(v, list) or not v or not all(isinstance(x, str) for x in v):
        raise SchemaError("expected a non-empty list of strings", where)
    if len(set(v)) != len(v):
        raise SchemaError("labels must be distinct", where)
    return tuple(v)


def _index(labels: tuple, pattern, where: str) -> list:
    """Indices matched by one label or the wildcard."""
    if pattern == WILDCARD:
        return list(range(len(labels)))
    if pattern not in labels:
        raise SchemaError(f"unknown label {pattern!r} (expected one of {list(labels)})", where)
    return [labels.index(pattern)]


def _indices(dims: list, patterns, where: str) -> list:
    if patterns is None:
        patterns = [WILDCARD] * len(dims)
    if isinstance(patterns, str) and len(dims) == 1:
        patterns = [patterns]
    if not isinstance(patterns, list) or len(patterns) != len(dims):
        raise SchemaError(f"expected {len(dims)} labels", where)
    return [_index(lab, p, f"{where}[{k}]") for k, (lab, p) in enumerate(zip(dims, patterns))]


def _selector(dims: list, patterns, where: str):
    return np.ix_(*_indices(dims, patterns, where))


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise SchemaError("expected a finite number", where)
    return float(v)


def _table(spec, groups: list, n_values: int, value_key: str, where: str,
           names: tuple = ()) -> np.ndarray:
    """Fill an array of shape ``(n_values,) + dims`` from wildcard entries.

    ``groups`` is a list of ``(entry key, list of label tuples)``. An entry
    with a ``player`` field sets a single value for that player only.
    """
    dims = [lab for _, labs in groups for lab in labs]
    shape = tuple(len(l) for l in dims)
    out = np.full((n_values,) + shape, np.nan)
    default = _get(spec, "default", where, default=None)
    if default is not None:
        out[:] = _number(default, f"{where}.default")
    entries = _get(spec, "entries", where, list)
    for k, entry in enumerate(entries):
        ew = f"{where}.entries[{k}]"
        idx = []
        for key, labs in groups:
            idx.extend(_indices(labs, _get(entry, key, ew, default=None), f"{ew}.{key}"))
        idx = np.ix_(*idx)
        val = _get(entry, value_key, ew)
        who = _get(entry, "player", ew, default=None)
        if who is not None:
            i = _player_index(who, names, f"{ew}.player")
            out[i][idx] = _number(val, f"{ew}.{value_key}")
            continue
        vals = val if isinstance(val, list) else [val]
        if len(vals) != n_values:
            raise SchemaError(f"expected {n_values} values", f"{ew}.{value_key}")
        for i, v in enumerate(vals):
            out[i][idx] = _number(v, f"{ew}.{value_key}[{i}]")
    if np.isnan(out).any():
        miss = np.argwhere(np.isnan(out))[0][1:]
        cell = [dims[d][int(j)] for d, j in enumerate(miss)]
        raise SchemaError(f"table not total; first uncovered cell {cell}", where)
    return out


def _player_index(who, names: tuple, where: str) -> int:
    if isinstance(who, int) and not isinstance(who, bool) and 0 <= who < len(names):
        return who
    if who in names:
        return names.index(who)
    raise SchemaError(f"unknown player {who!r}", where)


def _prior(spec, types: list, where: str) -> np.ndarray:
    shape = tuple(len(t) for t in types)
    if "independent" in spec:
        margs = _get(spec, "independent", where, list)
        if len(margs) != len(types):
            raise SchemaError("one marginal per player expected", f"{where}.independent")
        out = np.ones(())
        for i, m in enumerate(margs):
            w = f"{where}.independent[{i}]"
            if not isinstance(m, list) or len(m) != shape[i]:
                raise SchemaError(f"expected {shape[i]} probabilities", w)
            out = np.multiply.outer(out, np.array([_number(x, w) for x in m]))
    elif "joint" in spec:
        out = np.zeros(shape)
        for k, e in enumerate(_get(spec, "joint", where, list)):
            w = f"{where}.joint[{k}]"
            pats = _get(e, "types", w, list)
            if len(pats) != len(types):
                raise SchemaError(f"expected {len(types)} labels", f"{w}.types")
            idx = tuple(_index(t, p, f"{w}.types")[0] for t, p in zip(types, pats))
            out[idx] = _number(_get(e, "p", w), f"{w}.p")
    else:
        raise SchemaError("expected 'independent' or 'joint'", where)
    if np.any(out < 0) or abs(out.sum() - 1.0) > LOAD_ATOL:
        raise SchemaError(f"probabilities must be nonnegative and sum to 1 (sum {out.sum():.12g})", where)
    return out / out.sum()


def parse_game(doc: dict) -> FiniteBayesianGame:
    players = _get(doc, "players", "", list)
    if not players:
        raise SchemaError("at least one player required", "players")
    names, types, actions = [], [], []
    for k, p in enumerate(players):
        w = f"players[{k}]"
        names.append(str(_get(p, "name", w, default=f"P{k + 1}")))
        types.append(_labels(_get(p, "types", w, default=["-"]), f"{w}.types"))
        actions.append(_labels(_get(p, "actions", w), f"{w}.actions"))
    prior = _prior(_get(doc, "prior", "", dict, default={"independent": [[1 / len(t)] * len(t) for t in types]}),
                   types, "prior")
    pay = _payoffs(_get(doc, "payoffs", "", dict), actions, types, "payoffs", tuple(names))
    return FiniteBayesianGame(tuple(types), tuple(actions), prior, pay, tuple(names),
                              str(doc.get("name", "")))


def _payoffs(spec, actions, types, where, names) -> np.ndarray:
    return _table(spec, [("actions", list(actions)), ("types", list(types))], len(actions), "u", where, names)


def parse_meta(doc: dict, game: FiniteBayesianGame, strict: bool = True) -> MetaGame:
    spec = _get(doc, "meta", "", dict)
    n = game.n_players
    ts = []
    for k, t in enumerate(_get(spec, "transformations", "meta", list)):
        w = f"meta.transformations[{k}]"
        tid = _get(t, "id", w, str)
        pay = _get(t, "payoffs", w)
        table = game.payoffs if pay == "base" else _payoffs(pay, game.action_labels, game.type_labels, f"{w}.payoffs",
                                                                   game.player_names)
        ts.append(Transformation(tid, table, str(t.get("label", ""))))
    try:
        tset = TransformationSet(ts)
    except ValueError as exc:
        raise SchemaError(str(exc), "meta.transformations") from exc
    xs = _get(spec, "meta_actions", "meta", list)
    if len(xs) != n:
        raise SchemaError(f"expected {n} meta-action lists", "meta.meta_actions")
    xs = tuple(_labels(x, f"meta.meta_actions[{i}]") for i, x in enumerate(xs))
    env = _labels(_get(spec, "env_moves", "meta", default=["-"]), "meta.env_moves")
    spaces = MetaActionSpaces(xs, env)
    rule = _rule(_get(spec, "rule", "meta", dict), spaces, game.type_labels, tset)
    groups = [("x", list(xs)), ("e", [env]), ("types", list(game.type_labels))]
    wspec = _get(spec, "env_payoff", "meta", dict, default={"default": 0.0, "entries": []})
    W = _table(wspec, groups, 1, "w", "meta.env_payoff")[0]
    costs = tuple(np.zeros((len(game.type_labels[i]), len(xs[i]))) for i in range(n))
    for k, c in enumerate(_get(spec, "costs", "meta", list, default=[])):
        w = f"meta.costs[{k}]"
        i = _player_index(_get(c, "player", w), game.player_names, f"{w}.player")
        ti = _index(game.type_labels[i], _get(c, "type", w, default=WILDCARD), f"{w}.type")
        xi = _index(xs[i], _get(c, "x", w), f"{w}.x")
        val = _number(_get(c, "c", w), f"{w}.c")
        if val < 0:
            raise SchemaError("costs must be nonnegative", f"{w}.c")
        costs[i][np.ix_(ti, xi)] = val
    return MetaGame(game, tset, rule, spaces, W, costs, FiniteGameBackend(game, strict=strict),
                    name=str(doc.get("name", "")))


def _rule(spec, spaces: MetaActionSpaces, types, tset: TransformationSet) -> TransformationRule:
    dims = list(spaces.meta_actions) + [spaces.env_moves] + list(types)
    tab = np.full(tuple(len(d) for d in dims), -1, dtype=np.int64)
    for k, case in enumerate(_get(spec, "cases", "meta.rule", list, default=[])):
        w = f"meta.rule.cases[{k}]"
        x = _get(case, "x", w, default=[WILDCARD] * spaces.n_players)
        e = _get(case, "e", w, default=WILDCARD)
        th = _get(case, "types", w, default=[WILDCARD] * len(types))
        if not isinstance(x, list) or not isinstance(th, list):
            raise SchemaError("x and types must be lists", w)
        sel = _selector(dims, x + [e] + th, w)
        tid = _get(case, "T", w, str)
        if tid not in tset.ids:
            raise SchemaError(f"unknown transformation {tid!r}", f"{w}.T")
        view = tab[sel]
        view[view < 0] = tset.index(tid)
        tab[sel] = view
    default = _get(spec, "default", "meta.rule", default=None)
    if default is not None:
        if default not in tset.ids:
            raise SchemaError(f"unknown transformation {default!r}", "meta.rule.default")
        tab[tab < 0] = tset.index(default)
    if (tab < 0).any():
        raise SchemaError("rule is not total and has no default", "meta.rule")
    return TransformationRule(tab, tset.ids)


def load(path, strict: bool = True):
    """Return ``(game, meta or None, expectations)``."""
    doc = load_document(path)
    game = parse_game(doc)
    meta = parse_meta(doc, game, strict) if "meta" in doc else None
    return game, meta, doc.get("expect", {})


# -- writing -------------------------------------------------------------------------


def _entries(values: np.ndarray, groups: list, key: str) -> list:
    """Full-table entries, one per cell, for bit-exact round trips."""
    dims = [lab for _, labs in groups for lab in labs]
    out = []
    for idx in np.ndindex(*values.shape[1:]):
        labels = [dims[d][j] for d, j in enumerate(idx)]
        entry, pos = {}, 0
        for gkey, labs in groups:
            entry[gkey] = labels[pos: pos + len(labs)]
            pos += len(labs)
        vals = [float(v) for v in values[(slice(None),) + idx]]
        entry[key] = vals if len(vals) > 1 or key == "u" else vals[0]
        out.append(entry)
    return out


def game_to_doc(game: FiniteBayesianGame) -> dict:
    joint = [{"types": [game.type_labels[i][j] for i, j in enumerate(idx)], "p": float(game.prior[idx])}
             for idx in np.ndindex(*game.prior.shape)]
    groups = [("actions", list(game.action_labels)), ("types", list(game.type_labels))]
    return {
        "name": game.name,
        "players": [{"name": game.player_names[i], "types": list(game.type_labels[i]),
                     "actions": list(game.action_labels[i])} for i in range(game.n_players)],
        "prior": {"joint": joint},
        "payoffs": {"entries": _entries(game.payoffs, groups, "u")},
    }


def meta_to_doc(mg: MetaGame) -> dict:
    game = mg.base
    doc = game_to_doc(game)
    groups = [("actions", list(game.action_labels)), ("types", list(game.type_labels))]
    sp = mg.spaces
    cases = []
    dims = list(sp.meta_actions) + [sp.env_moves] + list(game.type_labels)
    n = mg.n_players
    for idx in np.ndindex(*mg.rule.table.shape):
        labels = [dims[d][j] for d, j in enumerate(idx)]
        cases.append({"x": labels[:n], "e": labels[n], "types": labels[n + 1:],
                      "T": mg.rule.ids[mg.rule.table[idx]]})
    wgroups = [("x", list(sp.meta_actions)), ("e", [sp.env_moves]), ("types", list(game.type_labels))]
    costs = [{"player": game.player_names[i], "type": game.type_labels[i][t], "x": sp.meta_actions[i][x],
              "c": float(c[t, x])}
             for i, c in enumerate(mg.meta_cost) for t, x in np.ndindex(*c.shape) if c[t, x] != 0]
    doc["name"] = mg.name or game.name
    doc["meta"] = {
        "transformations": [{"id": T.id, "label": T.label, "payoffs": {"entries": _entries(T.payoffs, groups, "u")}}
                            for T in mg.tset],
        "meta_actions": [list(x) for x in sp.meta_actions],
        "env_moves": list(sp.env_moves),
        "rule": {"cases": cases},
        "env_payoff": {"entries": _entries(mg.env_payoff[None], wgroups, "w")},
        "costs": costs,
    }
    return doc


def dump(doc: dict, path) -> None:
    path = Path(path)
    if path.suffix.lower() in (".yaml", ".yml"):
        path.write_text(yaml.safe_dump(doc, sort_keys=False))
    else:
        path.write_text(json.dumps(doc, indent=1) + "\n")
