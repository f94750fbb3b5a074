"""Command-line interface: ``cogames <subcommand> ...``.

Results go to ``--out`` (stdout by default) as CSV or JSON.  ``--plot DIR`` also renders
PNG figures for the subcommands that have a natural picture.
"""

from __future__ import annotations

import os
import sys

# thread caps must be in place before numpy loads its BLAS
_threads = os.environ.get("COG_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import csv  # noqa: E402
import io as _stdio  # noqa: E402
import json  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import io as gio  # noqa: E402
from .best_response import RegularizationParams  # noqa: E402
from .core import as_profile, induce_nfg  # noqa: E402
from .errors import SolverError, ValidationError  # noqa: E402
from .metrics import (classical_exploitability, distortion_bounds, emd_exploitability,  # noqa: E402
                      hindsight_winrate, margin_of_victory, shapley_breakdown, verify_ce,
                      verify_ne)
from .reports import landscape, rbr_sweep  # noqa: E402
from .solvers import SolverConfig, fictitious_play, ftrl_solve, iterate_diffs  # noqa: E402
from .structure import harmonic_check, response_graph, sink_components  # noqa: E402
from .voting import get_rule  # noqa: E402

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors (exit 1); exit 2 is reserved for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ output


class Output:
    """Collects one primary table (or JSON document) and writes it in the chosen format."""

    def __init__(self, args):
        self.path = args.out
        self.fmt = args.format
        self.plot_dir = Path(args.plot) if args.plot else None
        if self.plot_dir:
            self.plot_dir.mkdir(parents=True, exist_ok=True)

    def _write_text(self, text):
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(self.path).write_text(text)

    def table(self, header, rows, doc=None):
        if self.fmt == "json":
            if doc is None:
                doc = [dict(zip(header, r)) for r in rows]
            self.json(doc)
            return
        buf = _stdio.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([gio.format_value(v) for v in r])
        self._write_text(buf.getvalue())

    def json(self, doc):
        self._write_text(json.dumps(gio._jsonable(doc), indent=2, sort_keys=True) + "\n")

    def figure(self, name):
        return None if self.plot_dir is None else self.plot_dir / name

    def side_file(self, suffix):
        """Secondary output next to ``--out`` (or None when writing to stdout)."""
        if self.path in (None, "-"):
            return None
        p = Path(self.path)
        return p.with_name(p.stem + suffix)


# ------------------------------------------------------------------ parsing


def _load_json_arg(text):
    p = Path(text)
    if p.is_file():
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse {text[:40]!r} as JSON ({exc})") from None


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _rules(text, n):
    ids = [r.strip() for r in text.split(",")]
    for r in ids:
        get_rule(r)
    if len(ids) == 1:
        return ids[0]
    if len(ids) != n:
        raise ValidationError(f"--rule lists {len(ids)} rules for {n} players")
    return tuple(ids)


def _mu(args, n):
    if getattr(args, "mu", None) is None:
        return None
    mu = _load_json_arg(args.mu)
    if len(mu) != n:
        raise ValidationError("--mu needs one strategy per player")
    return tuple(mu)


def _load(path):
    if not Path(path).is_file():
        raise ValidationError(f"no such file: {path}")
    return gio.load_game(path)


def _profile(args, counts):
    if args.profile is None:
        raise ValidationError("--profile is required")
    return as_profile(_load_json_arg(args.profile), counts)


def _params(args, mu=None):
    return RegularizationParams(p=args.p, q=args.q, mu=mu, num_samples=args.M, seed=args.seed)


def _solver_config(args, cog):
    return SolverConfig(rules=_rules(args.rule, cog.num_players), T=args.iters, q=args.q,
                        mu=_mu(args, cog.num_players), num_samples=args.M, seed=args.seed,
                        averaging=args.averaging, schedule=args.schedule)


# ---------------------------------------------------------------- commands


def cmd_solve(args, out):
    game = _load(args.game)
    cog = game.cog
    config = _solver_config(args, cog)
    if args.solver == "ftrl":
        traj = ftrl_solve(cog, config)
    else:
        traj = fictitious_play(game.cardinal if args.cardinal and game.cardinal else cog, config)
    diffs = np.concatenate([[np.nan], iterate_diffs(traj)])
    header = ["round"] + [f"p{i}_a{k}" for i, m in enumerate(cog.action_counts) for k in range(m)]
    header.append("iterate_diff")
    rows = [[t, *np.concatenate(avg).tolist(), diffs[t]] for t, avg in enumerate(traj.averages)]
    doc = {"averages": [[x.tolist() for x in a] for a in traj.averages],
           "iterate_diffs": diffs[1:].tolist(),
           "final": [x.tolist() for x in traj.final]}
    out.table(header, rows, doc)
    fig = out.figure("trajectory.png")
    if fig:
        from .plotting import plot_trajectory
        plot_trajectory(traj, fig, cog.player_names)


def cmd_verify(args, out):
    cog = _load(args.game).cog
    if args.joint is not None:
        joint = np.asarray(_load_json_arg(args.joint), dtype=float)
        report = verify_ce(cog, args.rule, joint)
    else:
        report = verify_ne(cog, args.rule, _profile(args, cog.action_counts))
    rows = report.to_rows()
    header = ["player", "action", "in_best_response", "epsilon", "witness"]
    out.table(header, [[r[h] for h in header] for r in rows],
              {"passed": report.passed, "verdicts": rows})


def cmd_metrics(args, out):
    if args.metric == "bounds":
        sums = _floats(args.sums)
        b = distortion_bounds(sums, args.d_plus, args.p, args.contexts, args.iters)
        out.table(list(b), [list(b.values())], b)
        return
    if args.game is None:
        raise ValidationError(f"metric {args.metric!r} needs a game file")
    game = _load(args.game)
    cog = game.cog
    if args.metric == "hindsight":
        _hindsight(args, out, cog)
        return
    prof = _profile(args, cog.action_counts)
    if args.metric == "eps":
        nfg = game.cardinal if game.cardinal is not None else induce_nfg(cog, "borda")
        eps, worst = classical_exploitability(nfg, prof)
        out.table(["player", "epsilon"], [[i, e] for i, e in enumerate(eps)],
                  {"epsilon": eps, "max": worst})
    elif args.metric == "emd":
        params = None if (args.p == 0 and args.q == 0) else _params(args, _mu(args, cog.num_players))
        eps, worst = emd_exploitability(cog, args.rule, prof, params)
        out.table(["player", "epsilon"], [[i, e] for i, e in enumerate(eps)],
                  {"epsilon": eps, "max": worst})
    elif args.metric == "mov":
        vals = [margin_of_victory(cog, args.rule, i, prof) for i in range(cog.num_players)]
        out.table(["player", "margin_of_victory"], [[i, v] for i, v in enumerate(vals)],
                  {"margin_of_victory": vals})
    elif args.metric == "shapley":
        phi = shapley_breakdown(cog, args.rule, prof, args.player, 1 - args.player)
        out.table(["action"] + [f"co_action_{j}" for j in range(phi.shape[1])],
                  [[a, *row] for a, row in enumerate(phi.tolist())], {"shapley": phi})


def _hindsight(args, out, cog):
    p_values = _floats(args.p_sweep) if args.p_sweep else [args.p]
    curves = {}
    for p in p_values:
        config = SolverConfig(rules=_rules(args.rule, cog.num_players), T=args.iters, q=args.q,
                              num_samples=args.M, seed=args.seed,
                              schedule=args.schedule if args.p_sweep is None else f"constant:{p}")
        traj = ftrl_solve(cog, config)
        params = RegularizationParams(p=p, q=args.q, num_samples=args.M, seed=args.seed)
        curves[p] = hindsight_winrate(traj, cog, args.player, config.rule_for(args.player), params)
    rows = [[p, t + 1, v] for p, c in curves.items() for t, v in enumerate(c)]
    out.table(["p", "round", "hindsight_winrate"], rows,
              {"curves": [{"p": p, "winrate": c} for p, c in curves.items()]})
    fig = out.figure("hindsight.png")
    if fig:
        from .plotting import plot_series
        x = np.arange(1, args.iters + 1)
        plot_series(x, {f"p={p:g}": c for p, c in curves.items()}, fig, ylabel="hindsight winrate")


def cmd_landscape(args, out):
    game = _load(args.game)
    if args.metric == "classical":
        target = game.cardinal if game.cardinal is not None else induce_nfg(game.cog, "borda")
        params = None
    else:
        target = game.cog
        params = None if (args.p == 0 and args.q == 0) else _params(args, _mu(args, 2))
    land = landscape(target, args.metric, args.rule, params, args.grid)
    out.table(land.header(), land.rows(),
              {"coords": land.coords, "values": land.values, "metric": land.metric})
    fig = out.figure("landscape.png")
    if fig:
        from .plotting import plot_landscape
        plot_landscape(land, fig)


def cmd_rbr_sweep(args, out):
    cog = _load(args.game).cog
    raw = _load_json_arg(args.profile) if args.profile else None
    if raw is None:
        raise ValidationError("--profile is required (co-player strategies, or a full profile)")
    n = cog.num_players
    if len(raw) == n:
        raw = [v for j, v in enumerate(raw) if j != args.player]
    counts = cog.co_player_counts(args.player)
    x_minus_i = as_profile(raw, counts)
    mu = None if args.mu is None else _load_json_arg(args.mu)
    p_values = _floats(args.p_values)
    rows = rbr_sweep(cog, args.player, x_minus_i, args.rule, p_values, args.q, mu, args.M, args.seed)
    m = cog.action_counts[args.player]
    out.table(["p"] + [f"a{k}" for k in range(m)], [[p, *r] for p, r in zip(p_values, rows.tolist())],
              {"p": p_values, "response": rows})
    fig = out.figure("rbr_sweep.png")
    if fig:
        from .plotting import plot_sweep
        names = cog.action_names[args.player] if cog.action_names else None
        plot_sweep(p_values, rows, fig, names)


def cmd_election(args, out):
    from .election import (ElectionAction, load_elections_csv, simulate_elections, solve_election,
                           verify_recorded_election, winner_probabilities)

    if not Path(args.csv).is_file():
        raise ValidationError(f"no such file: {args.csv}")
    records = load_elections_csv(args.csv)
    if args.action == "verify":
        docs = []
        for rec in records:
            rep = verify_recorded_election(rec, args.rule)
            verdicts = []
            for v in rep.verdicts:
                d = {"participant": rec.names[v.player], "action": v.action,
                     "in_best_response": v.in_best_response, "epsilon": v.epsilon}
                if v.witness is not None:
                    w = ElectionAction.from_index(v.player, v.witness)
                    d["witness"] = {"index": v.witness, "wtl": w.wtl,
                                    "vote": [rec.names[c] for c in w.vote]}
                verdicts.append(d)
            docs.append({"election_id": rec.election_id, "rule": args.rule,
                         "passed": rep.passed, "verdicts": verdicts})
        if args.format == "json":
            out.json(docs)
        else:
            rows = [[d["election_id"], v["participant"], v["action"], v["in_best_response"],
                     v["epsilon"], v.get("witness", {}).get("index", "")]
                    for d in docs for v in d["verdicts"]]
            out.table(["election_id", "participant", "action", "in_best_response", "epsilon",
                       "witness"], rows)
        return
    results = []
    rows = []
    for rec in records:
        prof = solve_election(rec, t0=args.t0, min_temperature=args.min_temperature,
                              steps=args.steps, damping=args.damping)
        freq = simulate_elections(prof, args.samples, args.seed)
        exact = winner_probabilities(prof)
        results.append({"election_id": rec.election_id, "names": list(rec.names),
                        "profile": prof, "simulated_winners": freq, "exact_winners": exact})
        for i, x in enumerate(prof):
            rows.append([rec.election_id, rec.names[i], *x.tolist()])
        fig = out.figure(f"winners_{rec.election_id or 'election'}.png")
        if fig:
            from .plotting import plot_bars
            plot_bars(list(rec.names), freq, fig, ylabel="simulated win frequency")
    header = ["election_id", "participant"] + [f"a{k}" for k in range(66)]
    out.table(header, rows, results)
    side = out.side_file("_winners.csv")
    winner_rows = [[r["election_id"], n, f, e] for r in results
                   for n, f, e in zip(r["names"], r["simulated_winners"], r["exact_winners"])]
    winner_header = ["election_id", "participant", "simulated", "exact"]
    if side is not None:
        gio.write_csv(side, winner_header, winner_rows)
    else:
        sys.stderr.write("# winner frequencies\n")
        w = csv.writer(sys.stderr, lineterminator="\n")
        w.writerow(winner_header)
        for r in winner_rows:
            w.writerow([gio.format_value(v) for v in r])


def cmd_analyze(args, out):
    game = _load(args.game)
    nfg = game.cardinal if game.cardinal is not None else induce_nfg(game.cog, args.rule)
    graph = response_graph(nfg, strict=args.strict)
    counter = {}
    comps = sink_components(graph, counter)
    report = harmonic_check(nfg)
    doc = {
        "harmonic": report.is_harmonic,
        "rank": report.rank,
        "nullspace_dim": report.nullspace_dim,
        "deviation_matrix": report.deviation_matrix,
        "row_labels": [list(r) for r in report.row_labels],
        "column_labels": [list(c) for c in report.column_labels],
        "weights": report.weights,
        "sink_components": [[list(v) for v in c.nodes] for c in comps if c.is_sink],
        "num_components": len(comps),
        "operations": counter["ops"],
    }
    rows = [[" ".join(map(str, a.source)), " ".join(map(str, a.target)), a.player, a.weight]
            for a in graph.arcs]
    if args.format == "json":
        doc["edges"] = rows
        out.json(doc)
        return
    out.table(["source", "target", "player", "gain"], rows)
    side = Path(args.report) if args.report else out.side_file("_report.json")
    if side is not None:
        gio.write_json(side, doc)
    else:
        sys.stderr.write(json.dumps(gio._jsonable(doc), sort_keys=True) + "\n")


def cmd_ingest(args, out):
    if not Path(args.csv).is_file():
        raise ValidationError(f"no such file: {args.csv}")
    cog = gio.ingest_performance_csv(args.csv, args.grades)
    out.json(gio.game_to_json(cog))


# ------------------------------------------------------------------ parser


def _add_reg(p, q=0.1, M=100):
    p.add_argument("--p", type=float, default=0.0, help="usurper replacement probability")
    p.add_argument("--q", type=float, default=q, help="Dirichlet smoothing scale")
    p.add_argument("--M", type=int, default=M, help="Monte Carlo samples")
    p.add_argument("--mu", help="target strategies as JSON (uniform by default)")


def _add_globals(p, defaults):
    def d(key):
        return defaults.get(key, argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d("seed"))
    p.add_argument("--out", default=d("out"), help="output file (stdout by default)")
    p.add_argument("--format", choices=("csv", "json"), default=d("format"))
    p.add_argument("--plot", metavar="DIR", default=d("plot"), help="also write PNG figures to DIR")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cogames", description="Context-ordinal games and social-choice best responses.")
    _add_globals(ap, {"seed": 0, "out": None, "format": "csv", "plot": None})
    # the same flags are accepted after the subcommand; SUPPRESS keeps earlier values
    common = _Parser(add_help=False)
    _add_globals(common, {})
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _orig = sub.add_parser

    def add_parser(name, **kw):
        return _orig(name, parents=[common], **kw)

    sub.add_parser = add_parser

    s = sub.add_parser("solve", help="run FTRL or fictitious play")
    s.add_argument("game")
    s.add_argument("--rule", default="borda", help="rule id, or one per player comma separated")
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--q", type=float, default=0.1)
    s.add_argument("--M", type=int, default=100)
    s.add_argument("--mu")
    s.add_argument("--schedule", default="one_over_t")
    s.add_argument("--averaging", choices=("average", "last"), default="average")
    s.add_argument("--solver", choices=("ftrl", "fp"), default="ftrl")
    s.add_argument("--cardinal", action="store_true", help="fictitious play on cardinal payoffs")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("verify", help="check a profile (or a joint distribution) for equilibrium")
    s.add_argument("game")
    s.add_argument("--rule", default="borda")
    s.add_argument("--profile")
    s.add_argument("--joint", help="joint distribution as nested JSON for a correlated check")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("metrics", help="exploitability, margins, hindsight, Shapley, bounds")
    s.add_argument("game", nargs="?")
    s.add_argument("--metric", choices=("eps", "emd", "mov", "hindsight", "shapley", "bounds"),
                   default="eps")
    s.add_argument("--rule", default="borda")
    s.add_argument("--profile")
    s.add_argument("--player", type=int, default=0)
    _add_reg(s)
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--schedule", default="one_over_t")
    s.add_argument("--p-sweep", help="comma-separated p values for hindsight curves")
    s.add_argument("--sums", default="1,1", help="per-context payoff sums for bounds")
    s.add_argument("--d-plus", type=float, default=0.0)
    s.add_argument("--contexts", type=int, default=1)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("landscape", help="exploitability grid of a 2x2 game")
    s.add_argument("game")
    s.add_argument("--metric", choices=("classical", "emd"), default="emd")
    s.add_argument("--rule", default="borda")
    s.add_argument("--grid", type=int, default=21)
    _add_reg(s)
    s.set_defaults(func=cmd_landscape)

    s = sub.add_parser("rbr-sweep", help="regularized best response as p varies")
    s.add_argument("game")
    s.add_argument("--player", type=int, default=0)
    s.add_argument("--profile")
    s.add_argument("--rule", default="borda")
    s.add_argument("--p-values", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
    s.add_argument("--q", type=float, default=0.0)
    s.add_argument("--M", type=int, default=1000)
    s.add_argument("--mu")
    s.set_defaults(func=cmd_rbr_sweep)

    s = sub.add_parser("election", help="verify or solve recorded four-person elections")
    s.add_argument("action", choices=("verify", "solve"))
    s.add_argument("--csv", required=True)
    s.add_argument("--rule", default="maximal_lottery")
    s.add_argument("--t0", type=float, default=10.0)
    s.add_argument("--min-temperature", type=float, default=0.1)
    s.add_argument("--steps", type=int, default=50)
    s.add_argument("--damping", type=float, default=0.5)
    s.add_argument("--samples", type=int, default=10_000)
    s.set_defaults(func=cmd_election)

    s = sub.add_parser("analyze", help="response graph, sink components and harmonic test")
    s.add_argument("game")
    s.add_argument("--rule", default="borda", help="scoring used to induce payoffs from a COG")
    s.add_argument("--strict", action="store_true", help="only strictly improving arcs")
    s.add_argument("--report", help="where to write the JSON report (CSV mode)")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("ingest", help="turn an agents x tasks score matrix into a game JSON")
    s.add_argument("csv")
    s.add_argument("--grades", type=int, default=4)
    s.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("COG_THREADS")
    if threads is not None and not (threads.isdigit() and int(threads) > 0):
        sys.stderr.write("cogames: error: COG_THREADS must be a positive integer\n")
        return EXIT_INVALID
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        out = Output(args)
        args.func(args, out)
    except SolverError as exc:
        sys.stderr.write(f"cogames: solver did not converge: {exc}\n")
        return EXIT_SOLVER
    except (ValidationError, FileNotFoundError, KeyError, IndexError) as exc:
        sys.stderr.write(f"cogames: error: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
