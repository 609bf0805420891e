"""pendctl command line: analyze | simulate | locus | identify | tune | surface.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import reporting
from .config import ConfigError, RunConfig
from .control import ControlError
from .dynamics import DynamicsError
from .fuzzy import FuzzyError
from .harness import ScenarioError, compute_metrics, run_closed_loop
from .identification import (
    DEFAULT_TUNE_BUDGET,
    GainSpace,
    IdentProblem,
    TuneObjective,
    TuningError,
    identify,
    tune_gains,
)
from .linear_analysis import (
    RootFindingError,
    augment_integrator,
    controller_transfer_function,
    match_poles,
    find_roots,
    closed_loop_polynomial,
    meets_design_targets,
    plant_transfer_function,
    RootLocusSample,
)

log = logging.getLogger("pendctl")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PENDCTL_THREADS", "1")))
    except ValueError:
        raise UsageError("PENDCTL_THREADS must be an integer")


def _poles_arg(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty pole list")
    return vals


def _check_distinct(args, *names):
    seen = {}
    for name in names:
        v = getattr(args, name, None)
        if v is None:
            continue
        key = os.path.abspath(v)
        if key in seen:
            raise UsageError(f"--{seen[key].replace('_', '-')} and --{name.replace('_', '-')} name the same file {v}")
        seen[key] = name


def _emit(args, payload_text: str, cfg: RunConfig) -> None:
    if args.out:
        reporting.atomic_write(args.out, payload_text)
        reporting.atomic_write(reporting.sidecar_path(args.out), reporting.dumps(cfg.resolved()))
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(payload_text)


def _config(args, **overrides) -> RunConfig:
    return RunConfig.from_file(args.config, overrides)


def cmd_analyze(args) -> int:
    cfg = _config(args)
    p = cfg.params()
    tf = plant_transfer_function(p)
    poles, zeros = tf.poles(), tf.zeros()
    aug = augment_integrator(tf).poles()
    report = reporting.pole_zero_report(poles, zeros)
    report["augmented_poles"] = reporting.complex_list(aug)
    report["transfer_function"] = {
        "numerator": list(tf.numerator.coeffs),
        "denominator": list(tf.denominator.coeffs),
    }
    report["design_targets"] = {"open_loop": meets_design_targets(poles).to_dict()}
    ctrl = cfg.data.get("controller")
    if ctrl and ctrl.get("kind") in ("pid", "pd"):
        c = controller_transfer_function(ctrl.get("kp", 0.0), ctrl.get("ki", 0.0), ctrl.get("kd", 0.0))
        loop = tf.series(c).cancel_origin()
        cl = find_roots(closed_loop_polynomial(loop, 1.0))
        report["closed_loop_poles"] = reporting.complex_list(cl)
        report["design_targets"]["closed_loop"] = meets_design_targets(cl).to_dict()
    if not args.out:
        print("poles: " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in poles), file=sys.stderr)
        print("zeros: " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in zeros), file=sys.stderr)
    _emit(args, reporting.dumps(report), cfg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    _check_distinct(args, "out", "svg", "figure", "metrics")
    cfg = _config(args, dt=args.dt, duration=args.duration)
    sc = cfg.scenario()
    tr = run_closed_loop(sc)
    metrics = compute_metrics(tr, sc.reference_theta, 2.0, sc.metric_window_start)
    _emit(args, tr.to_csv(), cfg)
    mtext = reporting.dumps(metrics.to_dict())
    if args.metrics:
        reporting.atomic_write(args.metrics, mtext)
    else:
        sys.stderr.write(mtext)
    scale = abs(tr.theta[0] - sc.reference_theta) or float(np.max(np.abs(tr.theta - sc.reference_theta)))
    band = 0.02 * scale
    if args.svg:
        from .svg import stacked_plot

        svg = stacked_plot(
            tr.t.tolist(),
            [("theta [rad]", tr.theta.tolist()), ("u [N]", tr.column("u").tolist())],
            bands={0: (sc.reference_theta - band, sc.reference_theta + band)},
        )
        reporting.atomic_write(args.svg, svg)
    if args.figure:
        from .plotting import plot_trajectory

        plot_trajectory(tr, args.figure, band=band, reference=sc.reference_theta,
                        title=f"{sc.controller.kind} controller")
    if tr.blew_up:
        log.error("simulation blew up at t=%s", tr.t[-1])
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_locus(args) -> int:
    _check_distinct(args, "out", "figure")
    cfg = _config(args)
    opts = dict(cfg.data.get("locus", {}))
    k_min = args.k_min if args.k_min is not None else opts.get("k_min", 1e-3)
    k_max = args.k_max if args.k_max is not None else opts.get("k_max", 1e3)
    points = args.points if args.points is not None else opts.get("points", 200)
    if not (0 < k_min < k_max) or points < 2:
        raise UsageError("need 0 < --k-min < --k-max and --points >= 2")
    tf = plant_transfer_function(cfg.params())
    ctrl = cfg.data.get("controller") or {"kind": "pd", "kp": 1.0}
    c = controller_transfer_function(ctrl.get("kp", 1.0), ctrl.get("ki", 0.0), ctrl.get("kd", 0.0))
    loop = tf.series(c).cancel_origin()
    gains = np.logspace(np.log10(k_min), np.log10(k_max), int(points)).tolist()

    def solve(k):
        try:
            return find_roots(closed_loop_polynomial(loop, k))
        except RootFindingError as exc:
            raise RootFindingError(f"root locus failed at K={k}: {exc}", exc.roots, exc.residuals)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        raw = list(pool.map(solve, gains))
    samples, prev = [], None
    for k, poles in zip(gains, raw):
        if prev is not None:
            poles = match_poles(prev, poles)
        samples.append(RootLocusSample(k, tuple(poles)))
        prev = poles
    _emit(args, reporting.locus_csv(samples), cfg)
    if args.figure:
        from .plotting import plot_locus

        plot_locus(samples, loop.poles(), loop.zeros(), args.figure)
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = _config(args)
    opts = dict(cfg.data.get("identify", {}))
    if args.poles is not None:
        if "target_poles" in opts and [float(v) for v in opts["target_poles"]] != args.poles:
            raise UsageError("--poles conflicts with config key identify.target_poles")
        opts["target_poles"] = args.poles
    prob = IdentProblem(
        target_poles=tuple(opts.get("target_poles", IdentProblem().target_poles)),
        free_params={k: tuple(v) for k, v in opts["free_params"].items()} if "free_params" in opts
        else IdentProblem().free_params,
        slave_inertia=bool(opts.get("slave_inertia", True)),
    )
    res = identify(prob, cfg.params(), seed=args.seed)
    out = res.to_dict()
    out["provenance"]["problem"] = prob.to_dict()
    out["poles"] = reporting.complex_list(res.poles())
    print(f"residual {res.residual!r} converged={res.converged}", file=sys.stderr)
    _emit(args, reporting.dumps(out), cfg)
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_tune(args) -> int:
    from .experiments import pd_space, pid_space, tuning_scenario

    cfg = _config(args, dt=args.dt, duration=args.duration)
    opts = dict(cfg.data.get("tune", {}))
    p = cfg.params()
    if "controller" in cfg.data or "initial" in cfg.data:
        sc = cfg.scenario()
    else:
        sc = tuning_scenario(p).with_(**{k: cfg.data[k] for k in ("dt", "duration") if k in cfg.data})
    mode = args.mode or opts.get("mode", "pd")
    if "space" in opts:
        space = GainSpace(**{k: tuple(v) for k, v in opts["space"].items()})
    else:
        space = pd_space() if mode == "pd" else pid_space(p)
    if mode == "pd" and not space.is_pd:
        raise UsageError("--mode pd conflicts with a tune.space that frees ki")
    budget = args.budget if args.budget is not None else int(opts.get("budget", DEFAULT_TUNE_BUDGET))
    weights = opts.get("weights", {})
    objective = TuneObjective(sc, **weights)
    res = tune_gains(objective, space, budget=budget, seed=args.seed)
    out = res.to_dict()
    out["mode"] = mode
    out["space"] = space.to_dict()
    _emit(args, reporting.dumps(out), cfg)
    return EXIT_OK


def cmd_surface(args) -> int:
    from .fuzzy import export_surface

    _check_distinct(args, "out", "figure")
    cfg = _config(args)
    fis = cfg.scheduler_fis() if args.controller == "scheduler" else cfg.direct_fis()
    header, rows = export_surface(fis, args.grid)
    _emit(args, reporting.table_csv(header, rows), cfg)
    if args.figure:
        from .plotting import plot_surface

        plot_surface(header, rows, len(fis.inputs), args.figure)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pendctl", description="Inverted pendulum control design toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_help):
        p.add_argument("--config", metavar="PATH", help="JSON run configuration file")
        p.add_argument("--out", metavar="PATH", help=out_help + " (default: stdout)")

    p = sub.add_parser("analyze", help="poles, zeros and design-target verdicts of the plant")
    common(p, "pole/zero report JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="closed-loop simulation to trajectory CSV")
    common(p, "trajectory CSV t,x,x_dot,theta,theta_dot,u,d")
    p.add_argument("--dt", type=float, metavar="S", help="integration step [s]")
    p.add_argument("--duration", type=float, metavar="S", help="simulated time [s]")
    p.add_argument("--svg", metavar="PATH", help="standalone SVG plot of theta [rad] and u [N] vs t [s]")
    p.add_argument("--figure", metavar="PATH", help="matplotlib figure (png/pdf/svg by extension)")
    p.add_argument("--metrics", metavar="PATH", help="step metrics JSON (default: stderr)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("locus", help="root locus samples to CSV K,re_1,im_1,...")
    common(p, "locus CSV")
    p.add_argument("--k-min", type=float, metavar="K", help="smallest loop gain [dimensionless]")
    p.add_argument("--k-max", type=float, metavar="K", help="largest loop gain [dimensionless]")
    p.add_argument("--points", type=int, metavar="N", help="number of log-spaced gains")
    p.add_argument("--figure", metavar="PATH", help="matplotlib locus figure")
    p.set_defaults(func=cmd_locus)

    p = sub.add_parser("identify", help="fit plant parameters to target poles")
    common(p, "identified parameters JSON with provenance")
    p.add_argument("--poles", type=_poles_arg, metavar="A,B,C", help="target real poles [1/s]")
    p.add_argument("--seed", type=int, default=0, metavar="U64", help="restart RNG seed")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("tune", help="search PD/PID gains against step metrics")
    common(p, "tuned gains and metrics JSON")
    p.add_argument("--mode", choices=("pd", "pid"), help="gain space (default pd)")
    p.add_argument("--budget", type=int, metavar="N", help="closed-loop simulations allowed")
    p.add_argument("--seed", type=int, default=0, metavar="U64", help="probe/restart RNG seed")
    p.add_argument("--dt", type=float, metavar="S", help="integration step [s]")
    p.add_argument("--duration", type=float, metavar="S", help="simulated time per evaluation [s]")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("surface", help="fuzzy controller surface to CSV")
    common(p, "surface CSV (inputs then outputs)")
    p.add_argument("--controller", choices=("direct", "scheduler"), default="direct",
                   help="direct: theta [rad], theta_dot [rad/s] -> force [N]; scheduler: error [rad] -> kp, kd")
    p.add_argument("--grid", type=int, default=101, metavar="N", help="grid points per input")
    p.add_argument("--figure", metavar="PATH", help="matplotlib surface figure")
    p.set_defaults(func=cmd_surface)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ScenarioError, ControlError, FuzzyError, DynamicsError,
            ValueError, TypeError, KeyError) as exc:
        print(f"pendctl {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RootFindingError, TuningError, ArithmeticError) as exc:
        print(f"pendctl {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
