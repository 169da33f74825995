"""Command-line front end: analytical solve, simulation, and cross-validation."""

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import report as rpt
from .errors import ConfigError, ConvergenceError, InconsistencyError
from .params import ScenarioConfig, load_config
from .sim import run_sim, trace_export
from .solver import NthModel, SolverOptions, calibrate_aggregation, solve_throughput

log = logging.getLogger("mlocoex")


def main(argv=None):
    logging.basicConfig(level=os.environ.get("MLOCOEX_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ConfigError as exc:
        parser.exit(2, f"error: {exc}\n")
    except ConvergenceError as exc:
        print(f"solver failed to converge: {exc}", file=sys.stderr)
        return 1
    except InconsistencyError as exc:
        print(f"model inconsistency: {exc}", file=sys.stderr)
        return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mlocoex",
        description="Coexistence throughput of dual-link and legacy Wi-Fi devices",
    )
    sub = parser.add_subparsers(required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file ([scenario]/[backoff]/[phy])")
    common.add_argument("--gamma", type=float, help="override destination split")
    common.add_argument("--n-mld", type=int, dest="n_mld")
    common.add_argument("--n-sld", type=int, dest="n_sld")
    common.add_argument("--na", type=int, help="override aggregation level")
    common.add_argument("--strict-paper", action="store_true",
                        help="reproduce the printed event/throughput forms verbatim")
    common.add_argument("--out", help="CSV output path (figure lands alongside)")
    common.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    p_solve = sub.add_parser("solve", parents=[common],
                             help="analytical fixed point and throughput")
    p_solve.add_argument("--calibrate", type=float, nargs="?", const=158.4,
                         metavar="MBPS", help="calibrate n_a at the joint N=2 point")
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare", parents=[common],
                           help="sweep analysis against simulation")
    p_cmp.add_argument("--sweep", default="joint=2..7",
                       help="axis=range, e.g. joint=2..7 or nsld=2..5")
    p_cmp.add_argument("--seeds", type=int, default=1, help="simulation seeds per point")
    p_cmp.add_argument("--seed-base", type=int, default=1)
    p_cmp.add_argument("--engines", choices=("analysis", "sim", "both"), default="both")
    p_cmp.add_argument("--duration-s", type=float, default=5.0)
    p_cmp.add_argument("--calibrate", type=float, nargs="?", const=158.4, metavar="MBPS")
    p_cmp.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("sim", parents=[common], help="single simulation run")
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--duration-s", type=float, default=5.0)
    p_sim.add_argument("--ap-mode", choices=("mld", "legacy", "off"), default="mld")
    p_sim.add_argument("--permissive-wait", action="store_true")
    p_sim.add_argument("--trace", help="stats CSV path (trace CSV lands alongside)")
    p_sim.add_argument("--trace-limit", type=int, default=10_000)
    p_sim.set_defaults(func=cmd_sim)

    return parser


def _scenario(args, parser, n_mld=None, n_sld=None):
    overrides = {}
    if args.gamma is not None:
        if not 0.0 <= args.gamma <= 1.0:
            parser.error(f"--gamma must lie in [0, 1], got {args.gamma}")
        overrides["scenario.gamma"] = args.gamma
    if args.na is not None:
        overrides["phy.n_a"] = args.na
    eff_n_mld = n_mld if n_mld is not None else args.n_mld
    eff_n_sld = n_sld if n_sld is not None else args.n_sld
    if eff_n_mld is not None:
        overrides["scenario.n_mld"] = eff_n_mld
    if eff_n_sld is not None:
        overrides["scenario.n_sld"] = eff_n_sld
    if args.config:
        return load_config(args.config, overrides)
    kwargs = {}
    if "scenario.gamma" in overrides:
        kwargs["gamma"] = overrides["scenario.gamma"]
    if "scenario.n_mld" in overrides:
        kwargs["n_mld"] = overrides["scenario.n_mld"]
    if "scenario.n_sld" in overrides:
        kwargs["n_sld"] = overrides["scenario.n_sld"]
    cfg = ScenarioConfig(**kwargs)
    if "phy.n_a" in overrides:
        cfg = cfg.with_na(overrides["phy.n_a"])
    return cfg


def cmd_solve(args, parser):
    cfg = _scenario(args, parser)
    if getattr(args, "calibrate", None) is not None:
        n_a, achieved = calibrate_aggregation(cfg, target_mbps=args.calibrate)
        print(f"calibrated n_a = {n_a} ({achieved:.3f} Mbps at joint N=2)")
        cfg = cfg.with_na(n_a)
    opts = SolverOptions(strict_paper=args.strict_paper)
    state, report = solve_throughput(cfg, opts)

    print(f"converged in {state.iterations} iterations, residual {state.residual_norm:.2e}")
    t, p, b = state.taus, state.ps, state.busy
    print(f"tau: ap_sld={t.tau_ap_sld:.6f} ap_mld={t.tau_ap_mld:.6f} "
          f"mld=({t.tau_mld_1:.6f}, {t.tau_mld_2:.6f}) sld=({t.tau_sld_1:.6f}, {t.tau_sld_2:.6f})")
    print(f"p:   ap_sld={p.p_ap_sld:.6f} ap_mld={p.p_ap_mld:.6f} "
          f"mld=({p.p_mld_1:.6f}, {p.p_mld_2:.6f}) sld=({p.p_sld_1:.6f}, {p.p_sld_2:.6f})")
    print(f"x_ap={b.x_ap:.6f} x_mld={b.x_mld:.6f} y=({b.y_case1:.6f}, {b.y_case2:.6f})")
    print()
    print(f"{'class':<18}{'Mbps per device per link':>26}")
    for cls in rpt.CLASSES:
        print(f"{rpt.CLASS_LABELS[cls]:<18}{getattr(report, cls):>26.3f}")

    if args.out:
        row = {
            "n_mld": cfg.n_mld, "n_sld": cfg.n_sld, "gamma": cfg.gamma,
            "n_a": cfg.phy.n_a, "engine": "analysis",
            "iterations": state.iterations, "residual": state.residual_norm,
        }
        row.update(report.rows())
        rpt.write_solve_csv(args.out, [row])
        if not args.no_plot:
            rpt.render_solve_figure(rpt.figure_path(args.out), report)
        print(f"\nwrote {args.out}")
    return 0


def parse_sweep(text):
    """Parse axis=range where range is lo..hi or a comma list."""
    try:
        axis, rng = text.split("=", 1)
    except ValueError:
        raise ConfigError(f"sweep must look like axis=lo..hi, got {text!r}")
    axis = axis.strip().lower()
    if axis not in ("joint", "nsld"):
        raise ConfigError(f"unknown sweep axis {axis!r} (use joint or nsld)")
    rng = rng.strip()
    if ".." in rng:
        lo, hi = rng.split("..", 1)
        points = list(range(int(lo), int(hi) + 1))
    else:
        points = [int(v) for v in rng.split(",") if v]
    if not points:
        raise ConfigError("empty sweep range")
    return axis, points


def _sim_point(cfg, seed, duration_s):
    _, report = run_sim(cfg, seed, duration_s)
    return report


def cmd_compare(args, parser):
    axis, points = parse_sweep(args.sweep)
    base = _scenario(args, parser)
    if getattr(args, "calibrate", None) is not None:
        n_a, achieved = calibrate_aggregation(base, target_mbps=args.calibrate)
        print(f"calibrated n_a = {n_a} ({achieved:.3f} Mbps at joint N=2)")
        base = base.with_na(n_a)
    opts = SolverOptions(strict_paper=args.strict_paper)
    nth = NthModel.table_default(base.backoff)

    configs = []
    for v in points:
        if axis == "joint":
            cfg = replace(base, n_mld=v, n_sld=v,
                          gamma=None if base.gamma_mode == "proportional" else base.gamma)
        else:
            cfg = replace(base, n_sld=v,
                          gamma=None if base.gamma_mode == "proportional" else base.gamma)
        configs.append(cfg)

    sim_results = {i: [] for i in range(len(configs))}
    if args.engines in ("sim", "both"):
        seeds = [args.seed_base + r for r in range(args.seeds)]
        jobs = []
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for i, cfg in enumerate(configs):
                for seed in seeds:
                    jobs.append((i, pool.submit(_sim_point, cfg, seed, args.duration_s)))
            for i, fut in jobs:
                sim_results[i].append(fut.result())

    rows = []
    failures = 0
    for i, cfg in enumerate(configs):
        ana = None
        if args.engines in ("analysis", "both"):
            try:
                state, ana = solve_throughput(cfg, opts, nth)
            except (ConvergenceError, InconsistencyError) as exc:
                print(f"point {points[i]} (n_mld={cfg.n_mld}, n_sld={cfg.n_sld}): {exc}",
                      file=sys.stderr)
                failures += 1
        rows.append(rpt.compare_row(points[i], cfg, ana, sim_results[i]))

    _print_compare(rows, args.engines)
    if args.out:
        rpt.write_compare_csv(args.out, rows)
        if not args.no_plot:
            label = "N_MLD = N_SLD" if axis == "joint" else f"N_SLD (N_MLD = {base.n_mld})"
            rpt.render_compare_figure(rpt.figure_path(args.out), rows, label)
        print(f"wrote {args.out}")
    return 1 if failures else 0


def _print_compare(rows, engines):
    cols = ["point"]
    if engines in ("analysis", "both"):
        cols += [f"ana_{c}" for c in rpt.CLASSES]
    if engines in ("sim", "both"):
        cols += [f"sim_mean_{c}" for c in rpt.CLASSES]
    if engines == "both":
        cols.append("err_pct_s_u_sld")
    print("  ".join(f"{c:>16}" for c in cols))
    for r in rows:
        cells = []
        for c in cols:
            v = r.get(c, "")
            cells.append(f"{v:>16.4f}" if isinstance(v, float) else f"{str(v):>16}")
        print("  ".join(cells))
    flagged = [str(r["point"]) for r in rows if r.get("flagged")]
    if flagged:
        print(f"points beyond tolerance: {', '.join(flagged)}")


def cmd_sim(args, parser):
    cfg = _scenario(args, parser)
    stats, report = run_sim(
        cfg, args.seed, args.duration_s, ap_mode=args.ap_mode,
        conservative_wait=not args.permissive_wait,
        trace_limit=args.trace_limit if args.trace else 0,
    )
    print(f"simulated {stats.slots} grid slots "
          f"({stats.elapsed_ns[0] / 1e9:.3f} s accounted on link 0)")
    print(f"nstr_violations={stats.nstr_violations} align_violations={stats.align_violations}")
    for cls in rpt.CLASSES:
        print(f"{rpt.CLASS_LABELS[cls]:<18}{getattr(report, cls):>12.3f} Mbps")
    if args.trace:
        trace_export(stats, args.trace)
        print(f"wrote {args.trace}")
    if args.out:
        row = {
            "n_mld": cfg.n_mld, "n_sld": cfg.n_sld, "gamma": cfg.gamma,
            "n_a": cfg.phy.n_a, "engine": "sim", "iterations": "", "residual": "",
        }
        row.update(report.rows())
        rpt.write_solve_csv(args.out, [row])
        if not args.no_plot:
            rpt.render_solve_figure(rpt.figure_path(args.out), report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
