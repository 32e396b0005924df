"""Command-line entry point.

Exit codes: 0 success, 1 a ``verify`` check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from .exceptions import ModelDomainError
from .induction import foc_residuals, second_order_conditions, solve_backward
from .model import MarketParams, Regime, RegimeKind, solve_closed_form, theoretical_outcomes
from .simulation import (
    SimConfig,
    estimate_posterior_variance,
    estimate_price_moments,
    estimate_profits,
    simulate_paths,
    write_paths_csv,
)
from .verification import check_competition_inequalities, check_informed_indifference, check_maker_deviation

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _market_flags(p, n_default=50):
    p.add_argument("--N", type=int, default=n_default, help="number of trading rounds (default %(default)s)")
    p.add_argument("--M", type=int, default=3, help="number of market makers, must exceed 2 (default %(default)s)")
    p.add_argument("--sigma-v", type=float, default=1.0, help="fundamental standard deviation (default %(default)s)")
    p.add_argument("--sigma-u", type=float, default=1.0, help="noise-flow volatility (default %(default)s)")


def _output_flags(p, formats=("json", "table"), default="json"):
    p.add_argument("--format", choices=formats, default=default, help="output format (default %(default)s)")
    p.add_argument("--out", help="write the report to this file instead of stdout")


def _dgp_flags(p):
    p.add_argument("--stocks", type=int, default=500, help="number of stocks (default %(default)s)")
    p.add_argument("--days", type=int, default=200, help="trading days per stock (default %(default)s)")
    p.add_argument("--event-day", type=int, default=100, help="first post-event day (default %(default)s)")
    p.add_argument("--beta1", type=float, default=-0.374, help="planted event effect (default %(default)s)")
    p.add_argument("--beta2", type=float, default=-0.378, help="planted competition effect (default %(default)s)")
    p.add_argument("--beta3", type=float, default=0.105, help="planted interaction (default %(default)s)")
    p.add_argument("--rho", type=float, default=0.3, help="within-stock error correlation (default %(default)s)")
    p.add_argument("--noise-sd", type=float, default=0.4, help="error standard deviation (default %(default)s)")
    p.add_argument(
        "--errors", choices=("equicorrelated", "ar1"), default="equicorrelated", help="within-stock error process"
    )
    p.add_argument(
        "--effect-mode",
        choices=("linear", "model_implied"),
        default="linear",
        help="plant beta1 + beta3 log(1+MMCNT), or the equilibrium log impact ratio",
    )
    p.add_argument("--seed", type=int, default=42, help="panel seed (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kyle-disclosure",
        description="Equilibrium, simulation, verification and DiD tools for a Kyle market "
        "with mandatory disclosure and M market makers.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve", help="closed-form equilibrium coefficients")
    _market_flags(p, n_default=4)
    p.add_argument("--method", choices=("closed", "backward"), default="closed", help="solver (default %(default)s)")
    _output_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimates against theory")
    _market_flags(p)
    p.add_argument("--paths", type=int, default=100_000, help="number of simulated paths (default %(default)s)")
    p.add_argument("--seed", type=int, default=42, help="simulation seed (default %(default)s)")
    p.add_argument("--antithetic", action="store_true", help="use antithetic path pairs")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; output does not depend on it")
    p.add_argument("--dump-paths", metavar="CSV", help="also write per-path trajectories to CSV")
    p.add_argument("--dump-limit", type=int, default=1000, help="paths written by --dump-paths (default %(default)s)")
    _output_flags(p)

    p = sub.add_parser("verify", help="optimality and consistency checks; exit 1 on failure")
    _market_flags(p, n_default=10)
    p.add_argument("--tol", type=float, default=1e-10, help="analytic tolerance (default %(default)s)")
    _output_flags(p, default="table")

    p = sub.add_parser("compare", help="equilibrium outcomes across the four market structures")
    p.add_argument("--M", type=int, default=3, help="market makers in the imperfect regimes (default %(default)s)")
    p.add_argument("--sigma-v", type=float, default=1.0)
    p.add_argument("--sigma-u", type=float, default=1.0)
    p.add_argument(
        "--regime", choices=[k.value for k in RegimeKind], help="report a single regime instead of all four"
    )
    _output_flags(p, default="table")

    p = sub.add_parser("did-generate", help="write a synthetic stock-day panel as CSV")
    _dgp_flags(p)
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("did-fit", help="fit the DiD regression with stock-clustered errors")
    _dgp_flags(p)
    p.add_argument("--csv-in", help="panel CSV (generated panel or CRSP-style quotes); synthetic if omitted")
    p.add_argument("--event-date", default="2002-08-29", help="event date for CRSP-style input")
    _output_flags(p, default="table")

    p = sub.add_parser("did-effect", help="event effect by average maker count")
    p.add_argument("--beta1", type=float, default=-0.374)
    p.add_argument("--beta3", type=float, default=0.105)
    p.add_argument("--mmcnt", type=float, nargs="+", default=[3.0, 18.0], help="average maker counts")
    _output_flags(p, formats=("json", "table", "csv"), default="table")
    return parser


def _params(args) -> MarketParams:
    return MarketParams(n_rounds=args.N, n_makers=args.M, sigma_v=args.sigma_v, sigma_u=args.sigma_u)


def _fmt(x) -> str:
    if x is None:
        return "-"
    return f"{x: .6f}" if isinstance(x, float) else str(x)


def _table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False)


def cmd_solve(args):
    params = _params(args)
    eq = solve_closed_form(params) if args.method == "closed" else solve_backward(params)
    if args.format == "json":
        return EXIT_OK, eq.to_json()
    rows = [[n + 1, eq.beta[n], eq.sigma_z2[n], eq.sigma_path[n + 1]] for n in range(params.n_rounds)]
    text = _table(["round", "beta", "sigma_z2", "Sigma"], rows)
    text += f"\ngamma={eq.gamma:.10g} psi={eq.psi:.10g} phi={eq.phi:.10g} lambda={eq.lam:.10g}"
    return EXIT_OK, text


def cmd_simulate(args):
    params = _params(args)
    cfg = SimConfig(n_paths=args.paths, seed=args.seed, antithetic=args.antithetic, n_jobs=args.jobs)
    eq = solve_closed_form(params)
    pi_i, pi_m, pi_n = estimate_profits(params, eq, cfg)
    theory = theoretical_outcomes(Regime(RegimeKind.IMPERFECT_DISCLOSURE, params.n_makers), params.sigma_v, params.sigma_u)
    estimates = {"informed_profit": pi_i, "makers_profit_total": pi_m, "noise_profit": pi_n}
    targets = {
        "informed_profit": theory.informed_profit,
        "makers_profit_total": theory.makers_profit_total,
        "noise_profit": theory.noise_profit,
    }
    if params.n_rounds >= 3:
        var_dp, cov_dp, corr = estimate_price_moments(params, eq, cfg)
        M, dt = params.n_makers, params.dt
        estimates.update(var_dp=var_dp, cov_dp=cov_dp, autocorr=corr)
        targets.update(
            var_dp=(M - 1) / (M - 2) * params.sigma_v**2 * dt,
            cov_dp=-params.sigma_v**2 * dt / (2 * (M - 2)),
            autocorr=theory.autocorr,
        )
    post_var = estimate_posterior_variance(params, eq, cfg)
    for n, est in enumerate(post_var):
        estimates[f"Sigma_{n}"] = est
        targets[f"Sigma_{n}"] = float(eq.sigma_path[n])

    floor = 1e-12 * params.sigma_v**2

    def z(est, target):
        # undefined for one path, meaningless when sampling error is pure rounding
        if not est.std_err > floor:
            return None
        return est.z_score(target)

    def finite(x):
        return None if math.isnan(x) else x

    report = {
        "command": "simulate",
        "params": params.to_dict(),
        "eq_hash": eq.digest(),
        "n_paths": cfg.n_paths,
        "seed": cfg.seed,
        "antithetic": cfg.antithetic,
        "estimates": {k: {"mean": e.mean, "std_err": finite(e.std_err)} for k, e in estimates.items()},
        "theory": targets,
        "z_scores": {k: z(e, targets[k]) for k, e in estimates.items()},
    }
    if args.dump_paths:
        dump_cfg = SimConfig(n_paths=min(args.dump_limit, cfg.n_paths), seed=cfg.seed)
        batch = simulate_paths(params, eq, dump_cfg)
        with open(args.dump_paths, "w", newline="", encoding="utf-8") as fh:
            write_paths_csv(batch, fh)
        report["paths_csv"] = args.dump_paths
    if args.format == "json":
        return EXIT_OK, _json(report)
    rows = [[k, estimates[k].mean, estimates[k].std_err, targets[k], report["z_scores"][k]] for k in estimates]
    head = f"params={params.to_dict()} paths={cfg.n_paths} seed={cfg.seed} eq_hash={report['eq_hash']}\n"
    return EXIT_OK, head + _table(["quantity", "estimate", "std_err", "theory", "z"], rows)


def run_checks(params: MarketParams, tol: float = 1e-10) -> list[dict]:
    """Named pass/fail checks with the residual each one measured."""
    closed = solve_closed_form(params)
    back = solve_backward(params)
    checks = []

    def add(name, residual, passed):
        checks.append({"check": name, "residual": float(residual), "pass": bool(passed)})

    worst = 0.0
    for f in ("beta", "sigma_z2", "sigma_path", "gamma", "psi", "phi", "lam"):
        a, b = np.atleast_1d(getattr(closed, f)), np.atleast_1d(getattr(back, f))
        scale = np.max(np.abs(a))
        den = np.where(a != 0, np.abs(a), scale)
        worst = max(worst, float(np.max(np.abs(a - b) / den)))
    add("backward induction = closed form (rel)", worst, worst < tol)

    ident = float(np.max(np.abs(closed.variance_identity_residuals())))
    add("flow variance identity", ident, ident < 1e-12 * max(1.0, params.sigma_u**2))
    M = params.n_makers
    add("psi * M * gamma = 2", closed.psi * M * closed.gamma - 2, abs(closed.psi * M * closed.gamma - 2) < 1e-12)

    foc = max(max(abs(r) for r in foc_residuals(params, closed, n)) for n in range(1, params.n_rounds + 1))
    add("first-order conditions", foc, foc < 1e-12)

    indiff = check_informed_indifference(
        params, closed, [-2.0, -0.5, 0.5, 2.0], rounds=range(1, params.n_rounds), gaps=(-1.0, 1.0)
    )
    worst_indiff = max((abs(r.delta) for r in indiff), default=0.0)
    add("informed indifference (interior rounds)", worst_indiff, worst_indiff < tol)
    term = check_informed_indifference(params, closed, [-0.5, 0.5], rounds=[params.n_rounds])
    add("terminal informed best response", max(r.delta for r in term), all(r.delta < 0 for r in term))

    maker = [check_maker_deviation(params, closed, s) for s in (0.5, 0.8, 1.2, 3.0)]
    add("maker slope deviations unprofitable", max(r.delta for r in maker), all(r.delta < 0 for r in maker))

    socs = [second_order_conditions(params, closed, n) for n in range(1, params.n_rounds + 1)]
    inf_soc = min(s[0] for s in socs)
    add("informed SOC >= 0", inf_soc, inf_soc >= -1e-12)
    add("maker SOC > 0", min(s[1] for s in socs), min(s[1] for s in socs) > 0)

    comp = check_competition_inequalities(M)
    add("disclosure-vs-competition inequalities", min(
        comp.item1.margin, comp.item2.margin, comp.item2_makers.margin, comp.item3.margin, comp.item4.margin
    ), comp.all_hold)
    return checks


def cmd_verify(args):
    params = _params(args)
    checks = run_checks(params, args.tol)
    code = EXIT_OK if all(c["pass"] for c in checks) else EXIT_FAIL
    if args.format == "json":
        return code, _json({"command": "verify", "params": params.to_dict(), "tol": args.tol, "checks": checks})
    rows = [[c["check"], f"{c['residual']:.3e}", "PASS" if c["pass"] else "FAIL"] for c in checks]
    return code, f"params={params.to_dict()}\n" + _table(["check", "residual", "result"], rows)


def cmd_compare(args):
    if args.M < 3:
        raise ModelDomainError(f"M={args.M}: a symmetric linear equilibrium requires M > 2")
    regimes = Regime.all_for(args.M)
    if args.regime:
        regimes = [r for r in regimes if r.kind.value == args.regime]
    outcomes = {r.kind.value: theoretical_outcomes(r, args.sigma_v, args.sigma_u) for r in regimes}
    if args.format == "json":
        doc = {
            "command": "compare",
            "M": args.M,
            "sigma_v": args.sigma_v,
            "sigma_u": args.sigma_u,
            "regimes": {k: o.to_dict() for k, o in outcomes.items()},
        }
        return EXIT_OK, _json(doc)
    fields = [
        ("Price impact", "price_impact"),
        ("Informed trader's profit", "informed_profit"),
        ("Market makers' profit", "makers_profit_total"),
        ("Noise traders' profit", "noise_profit"),
        ("Price autocorrelation", "autocorr"),
    ]
    rows = [[label] + [f"{getattr(o, f):.15g}" for o in outcomes.values()] for label, f in fields]
    head = f"M={args.M} sigma_v={args.sigma_v} sigma_u={args.sigma_u}\n"
    return EXIT_OK, head + _table([""] + list(outcomes), rows)


def _dgp(args):
    from .econometrics import DgpConfig

    return DgpConfig(
        n_stocks=args.stocks,
        n_days=args.days,
        event_day=args.event_day,
        beta1=args.beta1,
        beta2=args.beta2,
        beta3=args.beta3,
        noise_sd=args.noise_sd,
        cluster_rho=args.rho,
        error_structure=args.errors,
        effect_mode=args.effect_mode,
    )


def cmd_did_generate(args):
    from .econometrics import generate_panel

    panel = generate_panel(_dgp(args), seed=args.seed)
    buf = io.StringIO()
    panel.to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
    return EXIT_OK, buf.getvalue().rstrip("\n")


def cmd_did_fit(args):
    import pandas as pd

    from .econometrics import PANEL_COLUMNS, fit_did, generate_panel, ingest_csv

    config = {}
    drops = {}
    if args.csv_in:
        head = pd.read_csv(args.csv_in, nrows=0).columns
        if set(PANEL_COLUMNS) <= {c.strip().lower() for c in head}:
            panel = pd.read_csv(args.csv_in)
            panel.columns = [c.strip().lower() for c in panel.columns]
        else:
            panel, drops = ingest_csv(args.csv_in, event_date=args.event_date)
            for reason, count in drops.items():
                if count:
                    print(f"dropped {count} rows: {reason}", file=sys.stderr)
        config = {"csv_in": args.csv_in, "event_date": args.event_date}
    else:
        dgp = _dgp(args)
        panel = generate_panel(dgp, seed=args.seed)
        config = {"dgp": dgp.to_dict(), "seed": args.seed}
    result = fit_did(panel)
    if args.format == "json":
        return EXIT_OK, _json({"command": "did-fit", "config": config, "dropped": drops, **result.to_dict()})
    return EXIT_OK, result.format_table()


def cmd_did_effect(args):
    from .econometrics import total_effect

    class _Coefs:
        coefficients = {"post": args.beta1, "post_x_log_mm": args.beta3}

    rows = []
    for m in args.mmcnt:
        eff, pct = total_effect(_Coefs, m)
        rows.append({"mmcnt": m, "effect_log": eff, "pct_change": pct})
    if args.format == "json":
        return EXIT_OK, _json({"command": "did-effect", "beta1": args.beta1, "beta3": args.beta3, "effects": rows})
    if args.format == "csv":
        lines = ["mmcnt,effect_log,pct_change"] + [f"{r['mmcnt']!r},{r['effect_log']!r},{r['pct_change']!r}" for r in rows]
        return EXIT_OK, "\n".join(lines)
    body = _table(
        ["MMCNT", "log effect", "% change"], [[r["mmcnt"], r["effect_log"], 100 * r["pct_change"]] for r in rows]
    )
    return EXIT_OK, f"beta1={args.beta1} beta3={args.beta3}\n" + body


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "compare": cmd_compare,
    "did-generate": cmd_did_generate,
    "did-fit": cmd_did_fit,
    "did-effect": cmd_did_effect,
}


def run(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        code, text = COMMANDS[args.command](args)
    except (ModelDomainError, UsageError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text + "\n")
    else:
        stdout.write(text + "\n")
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
