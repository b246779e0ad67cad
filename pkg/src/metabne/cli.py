"""Command-line interface: solve, audit, sweep and run the example families."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    HypothesisViolated,
    MetaBNEError,
    SchemaError,
    TooLarge,
    UniquenessUnknown,
    UniquenessViolated,
)
from .families import cyber, platform, subsidy
from .game import FiniteBayesianGame, is_bne
from .io import load
from .meta import MetaGame, build_equilibrium_table, solve_meta_bne
from .solve import DEFAULT_TOL, Status, audit_uniqueness, enumerate_equilibria, solve
from .sweep import FAMILIES, run_sweep, sweep_summary
from .transform import apply_transformation

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_UNIQUENESS = 3
EXIT_NONCONVERGED = 4
EXIT_UNKNOWN = 5


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(f"{float(v):.12g}")
        return 0.0 if x == 0 else x
    return v


class Report:
    """Collects machine records and human lines; renders one of them."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.records: list = []
        self.lines: list = []

    def add(self, record: str, **fields) -> None:
        self.records.append({"record": record, **fields})

    def say(self, text: str = "") -> None:
        self.lines.append(text)

    def render(self) -> str:
        if self.fmt == "records":
            return "".join(json.dumps(_clean(r), sort_keys=True) + "\n" for r in self.records)
        return "\n".join(self.lines) + "\n"


def _aligned(headers: list, rows: list) -> list:
    cells = [list(map(str, headers))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(headers))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def profile_dict(game, profile) -> dict:
    return {game.player_names[i]: {game.type_labels[i][t]: dict(zip(game.action_labels[i], row))
                                   for t, row in enumerate(np.asarray(profile[i]))}
            for i in range(len(profile))}


def _profile_lines(game, profile) -> list:
    rows = []
    for i in range(len(profile)):
        for t, row in enumerate(np.asarray(profile[i])):
            mix = ", ".join(f"{a}:{_fmt(p)}" for a, p in zip(game.action_labels[i], row) if p > 1e-12)
            rows.append([game.player_names[i], game.type_labels[i][t], mix])
    return _aligned(["player", "type", "strategy"], rows)


def meta_profile_dict(mg: MetaGame, m) -> dict:
    names = _names(mg)
    out = {names[i]: {mg.type_labels[i][t]: dict(zip(mg.spaces.meta_actions[i], row))
                      for t, row in enumerate(m.players[i])} for i in range(mg.n_players)}
    out["environment"] = dict(zip(mg.spaces.env_moves, m.env))
    return out


def _names(mg: MetaGame) -> tuple:
    names = tuple(getattr(mg.base, "player_names", ()))
    return names or tuple(f"P{i + 1}" for i in range(mg.n_players))


def _meta_lines(mg: MetaGame, m) -> list:
    names = _names(mg)
    rows = []
    for i in range(mg.n_players):
        for t, row in enumerate(m.players[i]):
            mix = ", ".join(f"{x}:{_fmt(p)}" for x, p in zip(mg.spaces.meta_actions[i], row) if p > 1e-12)
            rows.append([names[i], mg.type_labels[i][t], mix])
    mix = ", ".join(f"{e}:{_fmt(p)}" for e, p in zip(mg.spaces.env_moves, m.env) if p > 1e-12)
    rows.append(["environment", "-", mix])
    return _aligned(["player", "type", "meta-strategy"], rows)


# -- commands --------------------------------------------------------------------------


def _header(rep: Report, command: str, args) -> None:
    meta = {k: getattr(args, k) for k in ("method", "seed", "tol") if hasattr(args, k)}
    rep.add("run", command=command, version=__version__, **meta)
    rep.say(f"metabne {__version__}  {command}  " + "  ".join(f"{k}={v}" for k, v in meta.items()))


def cmd_solve_bne(args, rep: Report) -> int:
    game, _, _ = load(args.file)
    _header(rep, "solve-bne", args)
    if args.method == "enumerate":
        try:
            eqs = enumerate_equilibria(game, tol=args.tol, return_info=True)
        except TooLarge as exc:
            rep.add("error", kind="TooLarge", message=str(exc))
            rep.say(f"error: {exc}")
            return EXIT_UNKNOWN
        rep.say(f"{len(eqs.equilibria)} equilibria ({eqs.singular_skips} degenerate supports skipped)")
        for k, p in enumerate(eqs.equilibria):
            regret = is_bne(game, p, args.tol)[1]
            rep.add("equilibrium", index=k, profile=profile_dict(game, p), max_regret=regret)
            rep.say(f"\nequilibrium {k}  max regret {_fmt(regret)}")
            rep.lines.extend(_profile_lines(game, p))
        rep.add("summary", count=len(eqs.equilibria), singular_skips=eqs.singular_skips,
                converged=bool(eqs.equilibria))
        return EXIT_OK if eqs.equilibria else EXIT_NONCONVERGED
    report = solve(game, method=args.method, tol=args.tol, seed=args.seed)
    rep.add("equilibrium", index=0, profile=profile_dict(game, report.profile),
            max_regret=report.max_regret)
    rep.add("summary", count=1, converged=report.converged, iterations=report.iterations,
            polished=report.polished)
    rep.say(f"converged={report.converged}  iterations={report.iterations}  max regret {_fmt(report.max_regret)}")
    rep.lines.extend(_profile_lines(game, report.profile))
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _uniqueness_failure(rep: Report, exc: Exception, game: FiniteBayesianGame | None) -> int:
    if isinstance(exc, UniquenessViolated):
        profiles = [profile_dict(game, p) for p in exc.equilibria] if game is not None else []
        rep.add("error", kind="UniquenessViolated", transformation=exc.transformation_id,
                equilibria=profiles)
        rep.say(f"error: {exc}")
        for k, p in enumerate(exc.equilibria if game is not None else []):
            rep.say(f"  equilibrium {k}")
            rep.lines.extend("    " + line for line in _profile_lines(game, p))
        return EXIT_UNIQUENESS
    rep.add("error", kind=type(exc).__name__, message=str(exc))
    rep.say(f"error: {exc}")
    return EXIT_UNKNOWN


def _table_report(rep: Report, mg: MetaGame, table) -> None:
    names = _names(mg)
    for tid in table.ids:
        sol = table[tid]
        ub = table.ubar[table.ids.index(tid)]
        rec = {"transformation": tid, "certificate": sol.certificate, "ubar": ub}
        if sol.game is not None:
            rec["profile"] = profile_dict(sol.game, sol.profile)
        rep.add("within_game", **rec)
        rep.say(f"\n{tid}  ({sol.certificate})")
        if sol.game is not None:
            rep.lines.extend("  " + line for line in _profile_lines(sol.game, sol.profile))
        rows = []
        for idx in np.ndindex(*ub.shape[1:]):
            theta = ",".join(mg.type_labels[i][j] for i, j in enumerate(idx))
            rows.append([theta] + [_fmt(ub[(i,) + idx]) for i in range(mg.n_players)])
        rep.lines.extend("  " + line for line in _aligned(["types"] + [f"ubar[{n}]" for n in names], rows))


def _solve_meta_report(rep: Report, mg: MetaGame, args) -> tuple:
    try:
        table = build_equilibrium_table(mg)
    except (UniquenessViolated, UniquenessUnknown, TooLarge) as exc:
        game = mg.base if isinstance(mg.base, FiniteBayesianGame) else None
        return _uniqueness_failure(rep, exc, game), None, None
    _table_report(rep, mg, table)
    res = solve_meta_bne(mg, method=args.method, seed=args.seed, tol=args.tol, table=table)
    for note in res.notes:
        rep.add("note", text=note)
        rep.say(f"\nnote: {note}")
    rep.say(f"\n{len(res.profiles)} meta-equilibria  converged={res.converged}  "
            f"max gain {_fmt(res.max_gain)}  degenerate supports {res.singular_skips}")
    for k, m in enumerate(res.profiles):
        rep.add("meta_equilibrium", index=k, profile=meta_profile_dict(mg, m))
        rep.say(f"\nmeta-equilibrium {k}")
        rep.lines.extend(_meta_lines(mg, m))
    rep.add("summary", count=len(res.profiles), converged=res.converged, max_gain=res.max_gain,
            singular_skips=res.singular_skips)
    return (EXIT_OK if res.converged else EXIT_NONCONVERGED), table, res


def cmd_solve_meta(args, rep: Report) -> int:
    game, mg, _ = load(args.file, strict=args.strict_uniqueness)
    _header(rep, "solve-meta", args)
    if mg is None:
        raise SchemaError("file has no meta section", "meta")
    return _solve_meta_report(rep, mg, args)[0]


def cmd_audit(args, rep: Report) -> int:
    game, mg, _ = load(args.file)
    _header(rep, "audit", args)
    games = [(T.id, apply_transformation(T, game)) for T in mg.tset] if mg else [(game.name or "base", game)]
    statuses = []
    rows = []
    for tid, g in games:
        v = audit_uniqueness(g, tol=args.tol)
        statuses.append(v.status)
        rep.add("audit", transformation=tid, status=v.status.value, equilibria=len(v.equilibria),
                singular_skips=v.singular_skips, reason=v.reason)
        rows.append([tid, v.status.value, len(v.equilibria), v.singular_skips, v.reason])
    rep.lines.extend(_aligned(["game", "status", "equilibria", "skips", "reason"], rows))
    if Status.MULTIPLE in statuses:
        code = EXIT_UNIQUENESS
    elif Status.UNKNOWN in statuses:
        code = EXIT_UNKNOWN
    else:
        code = EXIT_OK
    rep.add("summary", all_unique=code == EXIT_OK)
    return code


def _param_row(params) -> dict:
    return dataclasses.asdict(params) if params is not None else {}


def cmd_sweep(args, rep: Report) -> int:
    _header(rep, "sweep", args)
    opts = {}
    if args.family == "platform":
        opts["grid_points"] = args.grid_points
    if args.family == "cyber" and args.symmetric_types:
        opts["symmetric_types"] = True
    results = run_sweep(args.family, args.instances, seed=args.seed, max_draws=args.max_draws, **opts)
    table_rows = []
    flat = []
    for r in results:
        rep.add("instance", index=r.index, draws=r.draws, equilibria=r.n_equilibria,
                singular_skips=r.singular_skips, passed=r.passed, strict_passed=r.strict_passed,
                error=r.error, params=_param_row(r.params), summary=r.summary)
        for row in r.rows:
            d = {"instance": r.index, **row.as_dict()}
            rep.add("row", **d)
            flat.append(d)
        s = r.summary
        table_rows.append([r.index, r.draws, r.n_equilibria,
                           f"{s.get('weak_pass', 0)}/{s.get('weak_total', 0)}",
                           f"{s.get('strict_pass', 0)}/{s.get('strict_total', 0)}",
                           s.get("excluded", 0), r.error or "ok"])
    summary = sweep_summary(results)
    rep.add("summary", family=args.family, **summary)
    rep.lines.extend(_aligned(["instance", "draws", "equilibria", "weak", "strict", "excluded", "status"],
                              table_rows))
    rep.say(f"\npass rate {summary['pass_rate']:.1%} over {summary['instances']} instances "
            f"(strict claim applicable in {summary['strict_applicable_instances']})")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            if flat:
                w = csv.DictWriter(fh, fieldnames=list(flat[0]))
                w.writeheader()
                w.writerows(_clean(flat))
    return EXIT_OK


EXAMPLES = {
    "subsidy": (subsidy.SubsidyParams, subsidy.build_subsidy_metagame),
    "cyber": (cyber.CyberParams, cyber.build_cyber_metagame),
    "platform": (platform.PlatformParams, platform.build_platform_metagame),
}


def _overrides(pairs: list, cls) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    out = {}
    for pair in pairs or []:
        key, sep, raw = pair.partition("=")
        if not sep or key not in names:
            raise SchemaError(f"expected one of {sorted(names)} as key=value", f"--set {pair}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def cmd_example(args, rep: Report) -> int:
    cls, build = EXAMPLES[args.name]
    try:
        params = cls(**_overrides(args.set, cls))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), "--set") from exc
    _header(rep, f"example {args.name}", args)
    rep.add("params", **dataclasses.asdict(params))
    try:
        mg = build(params)
    except (UniquenessViolated, UniquenessUnknown) as exc:
        return _uniqueness_failure(rep, exc, None)
    code, table, res = _solve_meta_report(rep, mg, args)
    if table is None:
        return code
    try:
        if args.name == "subsidy":
            verdict = subsidy.check_proposition(params, res.profiles, mg, table)
            rows, summary = verdict.rows, verdict.summary
        else:
            out = (cyber if args.name == "cyber" else platform).check_claim(params, res.profiles, mg, table)
            rows, summary = out["rows"], out["summary"]
    except HypothesisViolated as exc:
        rep.add("claim", status="hypotheses not met", message=str(exc))
        rep.say(f"\nclaim: hypotheses not met ({exc})")
        return code
    for row in rows:
        rep.add("claim_row", **row.as_dict())
    rep.add("claim", status="checked", **summary)
    rep.say("\nmonotonicity verdict")
    rep.lines.extend(_aligned(
        ["eq", "player", "P(hi)", "P(lo)", "delta hi", "delta lo", "weak", "strict", "excluded"],
        [[r.equilibrium, r.player, _fmt(r.prob_hi), _fmt(r.prob_lo), _fmt(r.delta_hi), _fmt(r.delta_lo),
          r.weak, r.strict if r.strict_applicable else "n/a", r.excluded] for r in rows]))
    return code


# -- embedded annotations -----------------------------------------------------------------


def _profile_array(game, spec: dict) -> tuple:
    out = []
    for i, name in enumerate(game.player_names):
        rows = np.zeros((len(game.type_labels[i]), len(game.action_labels[i])))
        for t, tl in enumerate(game.type_labels[i]):
            for a, al in enumerate(game.action_labels[i]):
                rows[t, a] = spec[name][tl].get(al, 0.0)
        out.append(rows)
    return tuple(out)


def _same_sets(found: list, expected: list, radius: float = 1e-6) -> bool:
    def close(p, q):
        return max(float(np.max(np.abs(a - b))) for a, b in zip(p, q)) <= radius
    return (len(found) == len(expected)
            and all(any(close(f, e) for f in found) for e in expected)
            and all(any(close(f, e) for e in expected) for f in found))


def check_annotations(path) -> list:
    """Evaluate a file's ``expect`` block; returns ``(key, ok, detail)`` triples."""
    game, mg, expect = load(path)
    out = []
    if "solve_bne" in expect:
        want = expect["solve_bne"]
        eqs = enumerate_equilibria(game)
        ok = len(eqs) == want.get("count", len(eqs))
        if "profiles" in want:
            ok = ok and _same_sets(list(eqs), [_profile_array(game, p) for p in want["profiles"]])
        out.append(("solve_bne", ok, f"{len(eqs)} equilibria"))
    if "audit" in expect:
        want = expect["audit"]
        if isinstance(want, str):
            got = audit_uniqueness(game).status.value.lower()
            out.append(("audit", got == want.lower(), got))
        else:
            for T in mg.tset:
                got = audit_uniqueness(apply_transformation(T, game)).status.value.lower()
                out.append((f"audit[{T.id}]", got == str(want.get(T.id, got)).lower(), got))
    if "ubar" in expect:
        table = build_equilibrium_table(mg)
        for tid, vals in expect["ubar"].items():
            got = table.ubar[table.ids.index(tid)].reshape(mg.n_players, -1)[:, 0]
            out.append((f"ubar[{tid}]", bool(np.allclose(got, vals, atol=1e-9)), got.tolist()))
    if "solve_meta" in expect:
        want = expect["solve_meta"]
        try:
            table = build_equilibrium_table(mg)
        except UniquenessViolated as exc:
            ok = want.get("exit") == EXIT_UNIQUENESS and want.get("violated", exc.transformation_id) == exc.transformation_id
            out.append(("solve_meta", ok, f"violated {exc.transformation_id}"))
        else:
            res = solve_meta_bne(mg, table=table)
            ok = want.get("exit", 0) == (EXIT_OK if res.converged else EXIT_NONCONVERGED)
            ok = ok and len(res.profiles) == want.get("count", len(res.profiles))
            out.append(("solve_meta", ok, f"{len(res.profiles)} meta-equilibria"))
    if "meta_count" in expect:
        res = solve_meta_bne(mg)
        out.append(("meta_count", len(res.profiles) == expect["meta_count"], str(len(res.profiles))))
    return out


# -- entry point -------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, method: bool = True) -> None:
    if method:
        p.add_argument("--method", choices=("enumerate", "br", "logit"), default="enumerate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--format", choices=("human", "records"), default="human")
    p.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metabne", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-bne", help="equilibria of the base game in a file")
    p.add_argument("file", type=Path)
    _common(p)
    p.set_defaults(func=cmd_solve_bne)

    p = sub.add_parser("solve-meta", help="meta-equilibria of the meta-game in a file")
    p.add_argument("file", type=Path)
    _common(p)
    p.add_argument("--strict-uniqueness", action=argparse.BooleanOptionalAction, default=True,
                   help="fail when a transformed game's uniqueness cannot be certified")
    p.set_defaults(func=cmd_solve_meta)

    p = sub.add_parser("audit", help="uniqueness audit of every transformed game")
    p.add_argument("file", type=Path)
    _common(p, method=False)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="random parameter sweep over an example family")
    p.add_argument("family", choices=sorted(FAMILIES))
    p.add_argument("--instances", type=int, default=30)
    p.add_argument("--max-draws", type=int, default=2000)
    p.add_argument("--grid-points", type=int, default=51, help="platform price grid")
    p.add_argument("--symmetric-types", action="store_true",
                   help="cyber: give both types the same costs and losses")
    p.add_argument("--csv", type=Path, default=None, help="also write the per-row dataset as CSV")
    _common(p, method=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("example", help="solve one of the built-in example families")
    p.add_argument("name", choices=sorted(EXAMPLES))
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter")
    _common(p)
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    rep = Report(args.format)
    start = time.perf_counter()
    try:
        code = args.func(args, rep)
    except SchemaError as exc:
        rep.add("error", kind="SchemaError", message=str(exc), field=exc.field)
        rep.say(f"schema error: {exc}")
        code = EXIT_SCHEMA
    except MetaBNEError as exc:
        rep.add("error", kind=type(exc).__name__, message=str(exc))
        rep.say(f"error: {exc}")
        code = EXIT_UNKNOWN
    rep.say(f"\nwall time {time.perf_counter() - start:.3f} s  exit {code}")
    text = rep.render()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
