"""Command-line interface.

Exit codes: 0 success, 1 an acceptance band failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import band_from, build_model, build_problem, build_scorer, load_config
from .core import GLOBAL, SeedSpec, model_from_dict, read_csv, score_dataset, write_csv
from .erm import erm
from .errors import InputError, ToprankError
from .experiments import Band, decomposition_study, identity_suite, rate_study
from .oracle import sample
from .rankcrit import full_report, roc_points, write_roc_csv

EXIT_OK, EXIT_BAND, EXIT_INPUT = 0, 1, 2


def _parse_u0(text: str):
    if text.strip().lower() == "global":
        return GLOBAL
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"u0 must be a number in (0, 1) or 'global', got {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _scores(data_path: str, score_spec: str):
    """Scores from a CSV column name, a model JSON file, or an inline model JSON."""
    data, extras = read_csv(data_path)
    if score_spec in extras:
        return data, extras[score_spec]
    p = Path(score_spec)
    if p.suffix == ".json" and p.exists():
        spec = json.loads(p.read_text(encoding="utf-8"))
    else:
        try:
            spec = json.loads(score_spec)
        except json.JSONDecodeError:
            raise InputError(
                f"score spec {score_spec!r} is neither a column of {data_path} ({sorted(extras)}) nor model JSON"
            ) from None
    return data, score_dataset(model_from_dict(spec), data)


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise InputError("--n must be at least 1")
    model = build_model(load_config(args.config))
    data = sample(model, args.n, SeedSpec(args.seed).child_stream(0))
    write_csv(data, args.out)
    print(f"n={data.n} n_pos={data.n_pos} n_neg={data.n_neg} p_hat={data.n_pos / data.n:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    data, s = _scores(args.data, args.score)
    rep = full_report(s, data.labels, args.u0, rank_stats=not args.skip_rank_stats)
    print(rep.to_json())
    return EXIT_OK


def cmd_roc(args) -> int:
    data, s = _scores(args.data, args.score)
    if data.n_pos == 0 or data.n_neg == 0:
        raise InputError("ROC points need both classes present")
    grid = [i / (args.grid + 1) for i in range(1, args.grid + 1)]
    pts = roc_points(s, data.labels, grid)
    p_hat = data.n_pos / data.n
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_roc_csv(pts, p_hat, fh)
    else:
        write_roc_csv(pts, p_hat, sys.stdout)
    return EXIT_OK


def cmd_erm(args) -> int:
    data, _ = read_csv(args.data)
    cfg = load_config(args.config)
    problem = build_problem(cfg, seed=args.seed)
    res = erm(problem, data, workers=args.workers)
    print(json.dumps(res.to_dict(), sort_keys=True))
    return EXIT_OK


def _finish(result, out_dir: str | None, stem: str) -> int:
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}.json").write_text(result.to_json() + "\n", encoding="utf-8")
        (d / f"{stem}.csv").write_text(result.to_csv(), encoding="utf-8")
    for w in result.warnings():
        print(f"warning: {w}", file=sys.stderr)
    fails = result.failures()
    for f in fails:
        print(f"FAIL: {f}")
    print("PASS" if not fails else "FAILED")
    return EXIT_OK if not fails else EXIT_BAND


def _grid(cfg):
    g = cfg.get("grid", {})
    n = g.get("n")
    if not n:
        raise InputError("config [grid] needs a list n")
    return g, [int(v) for v in n]


def cmd_rates(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    g, n_grid = _grid(cfg)
    seed = args.seed if args.seed is not None else int(g.get("seed", 0))
    problem = build_problem(cfg, model, seed)
    res = rate_study(
        model,
        problem,
        n_grid,
        int(g.get("reps", 200)),
        seed,
        reference=g.get("reference", "bayes"),
        band=band_from(g.get("band"), Band(-0.9, -0.45)),
        workers=args.workers,
        config=cfg,
    )
    print(f"{'n':>8} {'mean excess':>14} {'stderr':>12}")
    for n, m, se in zip(res.n_grid, res.mean, res.stderr):
        print(f"{n:>8} {m:>14.6g} {se:>12.3g}")
    if res.slope is not None:
        se = "" if res.slope_stderr is None else f" (stderr {res.slope_stderr:.3f})"
        print(f"slope {res.slope:.4f}{se}, band [{res.band.lo}, {res.band.hi}]")
    return _finish(res, args.out_dir, "rates")


def cmd_decomp(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    g, n_grid = _grid(cfg)
    seed = args.seed if args.seed is not None else int(g.get("seed", 0))
    res = decomposition_study(
        model,
        build_scorer(cfg.get("scorer")),
        float(g.get("v", 0.8)),
        n_grid,
        int(g.get("reps", 1000)),
        seed,
        band=band_from(g.get("band"), Band(-1.4, -0.6)),
        var_tolerance=float(g.get("var_tolerance", 0.10)),
        var_min_n=int(g.get("var_min_n", 1000)),
        workers=args.workers,
        config=cfg,
    )
    print(f"{'n':>8} {'median|Lambda|':>16} {'n Var(Z)':>12}")
    for n, m, nv in zip(res.n_grid, res.median_abs_lambda, res.n_var_z):
        print(f"{n:>8} {m:>16.6g} {nv:>12.5f}")
    print(f"sigma^2 {res.sigma_sq:.6f}")
    if res.slope is not None:
        print(f"slope {res.slope:.4f}, band [{res.band.lo}, {res.band.hi}]")
    return _finish(res, args.out_dir, "decomp")


def cmd_identities(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg)
    sec = cfg.get("identities", {})
    seed = args.seed if args.seed is not None else int(sec.get("seed", 0))
    scorers = [build_scorer(s) for s in cfg.get("scorers", [{"kind": "identity"}])]
    res = identity_suite(
        model,
        scorers,
        [float(u) for u in sec.get("u0", [0.2])],
        int(sec.get("n_empirical", 100000)),
        seed,
        population_tol=float(sec.get("population_tol", 1e-6)),
        locauc_tol=float(sec.get("locauc_tol", 5e-3)),
        config=cfg,
    )
    names = sorted({(e.kind, e.name) for e in res.entries})
    print(f"{'kind':<11} {'identity':<22} {'max |residual|':>15}")
    for kind, name in names:
        worst = max(abs(e.residual) for e in res.entries if e.name == name and e.kind == kind)
        print(f"{kind:<11} {name:<22} {worst:>15.3g}")
    return _finish(res, args.out_dir, "identities")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toprank", description="Ranking criteria for the top of a scored list.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a labelled sample from a synthetic model")
    p.add_argument("--config", required=True, help="model config (TOML/JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    def scored(p):
        p.add_argument("data", help="CSV with x1..xd,y")
        p.add_argument("--score", required=True, help="score column, model JSON file, or inline model JSON")

    p = sub.add_parser("eval", help="all empirical criteria as JSON")
    scored(p)
    p.add_argument("--u0", type=_parse_u0, required=True, help="rate in (0, 1) or 'global'")
    p.add_argument("--skip-rank-stats", action="store_true", help="omit Wilcoxon-type fields (allows ties)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="ROC points on an even grid of rates")
    scored(p)
    p.add_argument("--grid", type=_positive_int, default=99, help="number of rates u = i/(k+1)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("erm", help="fit a scorer by empirical risk minimization")
    p.add_argument("data")
    p.add_argument("--config", required=True, help="config with [family] and [criterion]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_erm)

    for name, func, helptext in (
        ("rates", cmd_rates, "excess-risk rate study"),
        ("decomp", cmd_decomp, "decomposition scaling study"),
        ("identities", cmd_identities, "population and finite-sample identity residuals"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="study config; shipped names such as decomp.toml also work")
        p.add_argument("--out-dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=_positive_int, default=1)
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToprankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
