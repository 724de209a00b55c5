"""Command-line front end.

Every subcommand reads a JSON config (``--config``), writes one or more CSV
tables into the output directory together with a ``.meta.json`` sidecar,
and prints a one-line summary.  Failures exit nonzero with a JSON object
``{"error": <category>, "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from ._backend import BACKEND
from .config import RunConfig, config_hash, load_config
from .errors import CheckFailed, ParseError, SolarPlannerError, ValidationError
from .general import builtin_model, classify_extreme_stopping, main_model_sign_change
from .household import (
    Offer,
    SubsidyPolicy,
    adoption_laplace,
    adoption_probability,
    adoption_time_density,
    household_arrays,
    product_choice_threshold,
)
from .montecarlo import (
    asian_compensation,
    net_metering_value,
    simulate_first_passage,
    simulate_population_cost,
    subsidy_for_threshold_ratio,
)
from .planner import (
    GridSpec,
    PlannerTargets,
    iso_preference_line,
    objective_z,
    solve_heterogeneous,
    solve_homogeneous,
    sweep_targets,
)
from .population import immediate_adoption_mass, population_adoption_density, population_adoption_probability

log = logging.getLogger("solar_planner")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse calls this on bad usage
        _emit_error("UsageError", message)
        raise SystemExit(EXIT_USAGE)


def _emit_error(category: str, message: str, field: str | None = None) -> None:
    payload = {"error": category, "message": message}
    if field:
        payload["field"] = field
    sys.stderr.write(json.dumps(payload) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return "" if v is None else str(v)


class Output:
    """Writes CSV tables and their metadata sidecars into one directory."""

    def __init__(self, out_dir: Path, cfg: RunConfig, command: str, seed: int | None, argv: Sequence[str]):
        self.dir = out_dir
        self.cfg = cfg
        self.command = command
        self.seed = seed
        self.argv = list(argv)
        self.files: list[Path] = []

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence], extra: dict | None = None) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        meta = {
            "command": self.command,
            "argv": self.argv,
            "config_hash": config_hash(self.cfg),
            "seed": self.seed,
            "version": __version__,
            "kernel_backend": BACKEND,
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        if extra:
            meta.update(extra)
        (self.dir / f"{name}.meta.json").write_text(json.dumps(meta, indent=2, default=_fmt) + "\n")
        self.files.append(path)
        return path


def _pair(text: str, flag: str) -> SubsidyPolicy:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError("expected two comma-separated numbers", flag) from None
    return SubsidyPolicy(a, b)


def _offer(text: str) -> Offer:
    return {"both": Offer.BOTH, "rooftop": Offer.ROOFTOP, "subscription": Offer.SUBSCRIPTION}[text]


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    sim = cfg.simulation
    if args.seed is not None:
        sim = dataclasses.replace(sim, seed=args.seed)
    if args.paths is not None:
        sim = dataclasses.replace(sim, n_paths=args.paths)
    targets = cfg.targets
    if args.lambda_ is not None:
        targets = PlannerTargets(args.lambda_, targets.T, targets.interval)
    if args.horizon is not None:
        targets = PlannerTargets(targets.Lambda, args.horizon, targets.interval)
        if args.command == "simulate":
            sim = dataclasses.replace(sim, horizon=max(sim.horizon, args.horizon))
    grid = GridSpec(args.prec) if args.prec is not None else cfg.grid
    return dataclasses.replace(cfg, simulation=sim, targets=targets, grid=grid)


# subcommands -----------------------------------------------------------------

def cmd_choice_threshold(cfg: RunConfig, args, out: Output) -> int:
    vals = cfg.grid.values()
    rows = []
    for d1 in vals:
        for d2 in vals:
            s = SubsidyPolicy(float(d1), float(d2))
            gap = (1 - d1) * cfg.costs.rooftop_cost - (1 - d2) * cfg.costs.subscription_fee
            if gap < cfg.costs.epsilon:
                rows.append((d1, d2, math.nan, math.nan, "infeasible"))
                continue
            th = product_choice_threshold(cfg.costs, s, cfg.income_model)
            rows.append((d1, d2, th.lambda_star, th.r_star, th.kind.value))
    out.table("choice-threshold", ["delta1", "delta2", "lambda_star_per_yr", "r_star_usd_per_yr", "kind"], rows)
    print(f"choice-threshold: {len(rows)} subsidy pairs at spacing {cfg.grid.prec}")
    return EXIT_OK


def _income_grid(cfg: RunConfig, n: int = 199) -> np.ndarray:
    return cfg.distribution.quantile(np.linspace(0.005, 0.995, n))


def cmd_threshold_curve(cfg: RunConfig, args, out: Output) -> int:
    s = _pair(args.delta, "--delta")
    r = _income_grid(cfg)
    h = household_arrays(r, s, cfg.costs, cfg.income_model, offer=_offer(args.offer))
    rows = [
        (r[i], cfg.distribution.cdf(r[i]), "subscription" if h.subscription[i] else "rooftop",
         h.lam[i], h.mu[i], h.f_adopt[i], h.x_bar[i], h.x_bar[i] / cfg.income_model.x0, h.immediate[i])
        for i in range(r.size)
    ]
    out.table("threshold-curve", ["r_usd_per_yr", "income_rank", "product", "lambda_per_yr", "mu_per_yr",
                                  "adoption_cost_usd", "x_bar_kwh_per_yr", "x_bar_over_x0", "immediate"],
              rows, {"delta": s.as_tuple()})
    print(f"threshold-curve: delta={s.as_tuple()} x_bar/x0 in "
          f"[{np.min(h.x_bar) / cfg.income_model.x0:.4g}, {np.max(h.x_bar) / cfg.income_model.x0:.4g}]")
    return EXIT_OK


def _time_grid(horizon: float, n: int = 200) -> np.ndarray:
    return np.linspace(horizon / n, horizon, n)


def cmd_density(cfg: RunConfig, args, out: Output) -> int:
    s = _pair(args.delta, "--delta")
    offer = _offer(args.offer)
    horizon = cfg.targets.T if args.horizon is not None else max(cfg.targets.T, 50.0)
    t = _time_grid(horizon)
    ranks = (0.1, 0.25, 0.5, 0.75, 0.9)
    incomes = [float(cfg.distribution.quantile(q)) for q in ranks]
    cols = []
    for r in incomes:
        try:
            cols.append(np.asarray(adoption_time_density(t, r, s, cfg.costs, cfg.income_model, offer)))
        except SolarPlannerError:
            cols.append(np.full(t.size, math.nan))  # immediate adopter: point mass at zero
    pop = np.asarray(population_adoption_density(t, s, cfg.costs, cfg.income_model, cfg.distribution, offer))
    atom = immediate_adoption_mass(s, cfg.costs, cfg.income_model, cfg.distribution, offer)
    header = ["t_yr"] + [f"density_r{int(round(r))}_per_yr" for r in incomes] + ["population_density_per_yr"]
    rows = [[t[i]] + [c[i] for c in cols] + [pop[i]] for i in range(t.size)]
    mode = float(t[int(np.argmax(pop))])
    out.table("density", header, rows, {"delta": s.as_tuple(), "offer": offer.value,
                                        "immediate_mass": atom, "population_mode_yr": mode})
    print(f"density: population mode at t={mode:.6g} yr, immediate-adoption mass {atom:.6g}")
    return EXIT_OK


def cmd_adoption_prob(cfg: RunConfig, args, out: Output) -> int:
    s = _pair(args.delta, "--delta")
    offer = _offer(args.offer)
    horizon = cfg.targets.T
    t = np.linspace(0.0, horizon, 101)
    rows = [(ti, population_adoption_probability(ti, cfg.targets.interval, s, cfg.costs, cfg.income_model,
                                                 cfg.distribution, offer), cfg.targets.Lambda) for ti in t]
    out.table("adoption-prob", ["T_yr", "adoption_prob", "target_Lambda"], rows, {"delta": s.as_tuple()})
    print(f"adoption-prob: P(adopt by {horizon:g} yr) = {rows[-1][1]:.6g} (target {cfg.targets.Lambda:g})")
    return EXIT_OK


def cmd_solve(cfg: RunConfig, args, out: Output) -> int:
    if args.mode == "homogeneous":
        sol = solve_homogeneous(cfg.targets, cfg.costs, cfg.income_model, cfg.distribution)
        e = sol.evaluation
        out.table("solve-homogeneous", ["delta", "z_usd", "adoption_prob", "feasible"],
                  [(sol.subsidy.delta1, e.z, e.adoption_prob, e.feasible)],
                  {"Lambda": cfg.targets.Lambda, "T_yr": cfg.targets.T, "evaluations": sol.feasible_count})
        print(f"solve homogeneous: delta*={sol.subsidy.delta1:.10g} z*={e.z:.10g} "
              f"adoption_prob={e.adoption_prob:.6g}")
    else:
        sol = solve_heterogeneous(cfg.targets, cfg.grid, cfg.costs, cfg.income_model, cfg.distribution)
        e = sol.evaluation
        out.table("solve-heterogeneous", ["delta1", "delta2", "z_usd", "adoption_prob", "feasible"],
                  [(*sol.subsidy.as_tuple(), e.z, e.adoption_prob, e.feasible)],
                  {"Lambda": cfg.targets.Lambda, "T_yr": cfg.targets.T, "prec": cfg.grid.prec,
                   "feasible_points": sol.feasible_count})
        out.table("solve-heterogeneous-grid", ["delta1", "delta2", "z_usd", "adoption_prob", "feasible"],
                  [(*ev.subsidy, ev.z, ev.adoption_prob, ev.feasible) for ev in sol.evaluated])
        print(f"solve heterogeneous: delta*={sol.subsidy.as_tuple()} z*={e.z:.10g} "
              f"adoption_prob={e.adoption_prob:.6g} ({sol.feasible_count} feasible grid points)")
    return EXIT_OK


def cmd_iso_preference(cfg: RunConfig, args, out: Output) -> int:
    anchor = _pair(args.delta0, "--delta0")
    line = iso_preference_line(anchor)
    out.table("iso-preference", ["anchor_delta1", "anchor_delta2", "slope", "intercept"],
              [(*line.anchor, line.slope, line.intercept)])
    rows = []
    for d1 in np.linspace(0.0, 1.0, 101):
        d2 = line.slope * d1 + line.intercept
        if not 0 <= d2 <= 1:
            continue
        try:
            th = product_choice_threshold(cfg.costs, SubsidyPolicy(float(d1), float(d2)), cfg.income_model)
            rows.append((d1, d2, th.lambda_star, th.r_star))
        except SolarPlannerError:
            rows.append((d1, d2, math.nan, math.nan))
    out.table("iso-preference-points", ["delta1", "delta2", "lambda_star_per_yr", "r_star_usd_per_yr"], rows)
    print(f"iso-preference: slope={line.slope:.17g} intercept={line.intercept:.17g}")
    return EXIT_OK


def _check_rows_closed_forms(cfg: RunConfig):
    costs, inc, spec = cfg.costs, cfg.income_model, cfg.simulation
    rows = []
    for q, ratio in ((0.1, 2.0), (0.5, 2.5), (0.9, 3.0)):
        r = float(cfg.distribution.quantile(q))
        s = subsidy_for_threshold_ratio(r, ratio, costs, inc)
        times = tuple(t for t in (2.0, 5.0, 10.0) if t <= spec.horizon)
        est = simulate_first_passage(r, s, spec, costs, inc, times=times)
        for t in times:
            target = float(adoption_probability(t, r, s, costs, inc))
            e = est.probability[t]
            rows.append(("first_passage_cdf", r, s.delta1, s.delta2, f"P(tau<={t:g})", e.mean, target,
                         e.std_error, e.z_score(target), 0.0, e.covers(target)))
        target = adoption_laplace(r, s, costs, inc)
        e = est.laplace
        slack = est.truncation_bound
        ok = target - slack - 3 * e.std_error <= e.mean <= target + 3 * e.std_error
        rows.append(("laplace", r, s.delta1, s.delta2, "E[exp(-lambda tau)]", e.mean, target,
                     e.std_error, e.z_score(target), slack, ok))
        alt = adoption_laplace(r, s, costs, inc, exponent="uncorrected")
        rows.append(("laplace_uncorrected_exponent", r, s.delta1, s.delta2, "E[exp(-lambda tau)]", e.mean, alt,
                     e.std_error, e.z_score(alt), slack, None))
    s = SubsidyPolicy(0.4, 0.4)
    e = simulate_population_cost(s, spec, costs, inc, cfg.distribution)
    target = objective_z(s, costs, inc, cfg.distribution)
    pay = max(s.delta1 * costs.rooftop_cost,
              s.delta2 * costs.subscription_fee / (-math.expm1(-inc.lambda_low * costs.t_b)))
    slack = pay * math.exp(-inc.lambda_low * spec.n_steps * spec.dt)
    ok = target - slack - 3 * e.std_error <= e.mean <= target + 3 * e.std_error
    rows.append(("population_cost", math.nan, 0.4, 0.4, "z_usd", e.mean, target, e.std_error,
                 e.z_score(target), slack, ok))
    return rows


def _check_rows_asian(cfg: RunConfig):
    costs, inc, spec = cfg.costs, cfg.income_model, cfg.simulation
    r = float(cfg.distribution.median)
    c = costs.eta / costs.t_b
    n_cycles = 240
    lam, mu = float(inc.lambda_of_r(r)), float(inc.mu_of_r(r))
    fine = dataclasses.replace(spec, dt=min(spec.dt, costs.t_b / 4))
    est = asian_compensation(r, c, costs.p_b, costs.p_b, fine, inc, n_cycles, costs.t_b)
    rows = []
    target = net_metering_value(inc.x0, lam, mu, costs.p_b, c, costs.t_b, n_cycles)
    rows.append(("net_metering_limit", r, c, n_cycles, "h_usd", est.h.mean, target, est.h.std_error,
                 est.h.z_score(target), est.tail_bound, est.h.covers(target)))
    for n, e, target in est.parity:
        rows.append(("put_call_parity", r, c, n, "call_minus_put_kwh_per_yr", e.mean, target, e.std_error,
                     e.z_score(target), 0.0, e.covers(target)))
    zero = asian_compensation(r, 0.0, costs.p_s, costs.p_b, dataclasses.replace(fine, n_paths=min(fine.n_paths, 10_000)),
                              inc, 12, costs.t_b)
    rows.append(("zero_generation_put", r, 0.0, 12, "put_leg_usd", zero.put_leg.mean, 0.0,
                 zero.put_leg.std_error, 0.0, 0.0, zero.put_leg.mean == 0.0))
    return rows


def cmd_simulate(cfg: RunConfig, args, out: Output) -> int:
    rows = _check_rows_closed_forms(cfg) if args.check == "closed-forms" else _check_rows_asian(cfg)
    header = ["check", "r_usd_per_yr", "param1", "param2", "quantity", "estimate", "target", "std_error",
              "z_score", "truncation_allowance", "passed"]
    out.table(f"simulate-{args.check}", header, rows, {"paths": cfg.simulation.n_paths})
    graded = [row for row in rows if row[-1] is not None]
    failed = [row for row in graded if not row[-1]]
    for row in rows:
        status = "info" if row[-1] is None else ("PASS" if row[-1] else "FAIL")
        print(f"{status:4s} {row[0]:<28s} {row[4]:<24s} estimate={row[5]:.8g} target={row[6]:.8g} "
              f"se={row[7]:.3g}")
    print(f"simulate --check {args.check}: {len(graded) - len(failed)}/{len(graded)} comparisons passed")
    if failed:
        raise CheckFailed(f"{len(failed)} of {len(graded)} comparisons outside 3 standard errors")
    return EXIT_OK


def cmd_sweep_targets(cfg: RunConfig, args, out: Output) -> int:
    lambdas = [args.lambda_] if args.lambda_ is not None else [0.1, 0.3, 0.5, 0.7, 0.9]
    horizons = [args.horizon] if args.horizon is not None else [2.0, 5.0, 10.0, 15.0, 20.0]
    rows = sweep_targets(lambdas, horizons, cfg.costs, cfg.income_model, cfg.distribution,
                         interval=cfg.targets.interval)
    out.table("sweep-targets", ["Lambda", "T_yr", "delta", "z_usd", "adoption_prob", "feasible"],
              [(r["Lambda"], r["T"], r["delta"], r["z"], r["adoption_prob"], r["feasible"]) for r in rows])
    print(f"sweep-targets: {sum(r['feasible'] for r in rows)}/{len(rows)} targets attainable")
    return EXIT_OK


def cmd_extreme_stopping(cfg: RunConfig, args, out: Output) -> int:
    s = _pair(args.delta, "--delta")
    r = float(cfg.distribution.median) if args.income is None else args.income
    dyn, cst = builtin_model(cfg.general_model["dynamics"], cfg.general_model["costs"], cfg.costs, cfg.income_model)
    x_ref = main_model_sign_change(r, s, cfg.costs, cfg.income_model)
    hi = max(3 * x_ref, 10 * cfg.income_model.x0) if x_ref > 0 else 10 * cfg.income_model.x0
    x = np.linspace(hi / 1000, hi, 1000)
    res = classify_extreme_stopping(dyn, cst, r, s, x)
    out.table("extreme-stopping", ["x_kwh_per_yr", "z_usd_per_yr"], zip(res.x, res.z),
              {"rule": res.rule.value, "checked_range_kwh_per_yr": res.checked_range,
               "sign_changes_kwh_per_yr": res.sign_changes, "closed_form_sign_change_kwh_per_yr": x_ref})
    print(f"extreme-stopping: {res.rule.value} on [{res.checked_range[0]:.6g}, {res.checked_range[1]:.6g}] kWh/yr; "
          f"sign changes {[round(v, 3) for v in res.sign_changes]}")
    return EXIT_OK


COMMANDS = {
    "choice-threshold": cmd_choice_threshold,
    "threshold-curve": cmd_threshold_curve,
    "density": cmd_density,
    "adoption-prob": cmd_adoption_prob,
    "solve": cmd_solve,
    "iso-preference": cmd_iso_preference,
    "simulate": cmd_simulate,
    "sweep-targets": cmd_sweep_targets,
    "extreme-stopping": cmd_extreme_stopping,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed (unsigned 64-bit)")
    common.add_argument("--paths", type=int, help="Monte Carlo path count")
    common.add_argument("--prec", type=float, help="subsidy grid spacing")
    common.add_argument("--lambda", dest="lambda_", type=float, help="adoption target share")
    common.add_argument("--horizon", type=float, help="adoption deadline T, years")
    common.add_argument("-v", "--verbose", action="store_true", help="log unit conversions")

    p = _Parser(prog="solar-planner", description="Solar product choice and subsidy design.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("choice-threshold", parents=[common], help="r*(delta) over the subsidy grid")
    for name, helptext in (("threshold-curve", "adoption threshold versus income"),
                           ("density", "adoption-time densities"),
                           ("adoption-prob", "population adoption probability versus T")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--delta", default="0,0", help="subsidy pair delta1,delta2")
        sp.add_argument("--offer", choices=["both", "rooftop", "subscription"], default="both")
    sp = sub.add_parser("solve", parents=[common], help="optimal subsidy")
    sp.add_argument("--mode", choices=["homogeneous", "heterogeneous"], required=True)
    sp = sub.add_parser("iso-preference", parents=[common], help="iso-preference line through delta0")
    sp.add_argument("--delta0", required=True, help="anchor pair delta1,delta2")
    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo cross-checks")
    sp.add_argument("--check", choices=["closed-forms", "asian"], required=True)
    sub.add_parser("sweep-targets", parents=[common], help="optimal common subsidy over (Lambda, T)")
    sp = sub.add_parser("extreme-stopping", parents=[common], help="adopt-now / never-adopt test")
    sp.add_argument("--delta", default="0,0", help="subsidy pair delta1,delta2")
    sp.add_argument("--income", type=float, help="household income, $/yr (default: median)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _apply_flags(load_config(args.config), args)
        out = Output(Path(args.out or cfg.output_dir), cfg, args.command, cfg.simulation.seed, argv)
        return COMMANDS[args.command](cfg, args, out)
    except CheckFailed as exc:
        _emit_error(exc.category, str(exc))
        return EXIT_CHECK_FAILED
    except (ParseError, ValidationError) as exc:
        _emit_error(exc.category, str(exc), getattr(exc, "field", None))
        return EXIT_USAGE
    except SolarPlannerError as exc:
        _emit_error(exc.category, str(exc))
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort reporting for the CLI
        _emit_error("InternalError", f"{type(exc).__name__}: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
