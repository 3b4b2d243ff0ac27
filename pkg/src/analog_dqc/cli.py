"""``analog-dqc`` command line: plan, run, calibrate, derive, report."""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from . import io
from .calibration import CalibrationError, fit_detuning_offset, fit_detuning_offset_per_theta
from .config import Problem, ProblemFileError, load_problem, problem_from_dict
from .gpsr import agpsr_derivative
from .pipeline import EXACT, SAMPLED, Executor, RunSettings, build_plan, run_pipeline
from .qel import GRID_ARGMIN, INTERPOLATION
from .trainer import value_at

log = logging.getLogger("analog_dqc")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        raise StageError(name, str(exc) or type(exc).__name__) from exc


def _parse_override(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"override must be KEY=VALUE, got {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip(), parsed


def load_config(args) -> Problem:
    """The problem file with any ``--set`` circuit overrides applied."""
    with stage("config"):
        problem = load_problem(args.problem)
        overrides = dict(getattr(args, "set", None) or [])
        if overrides:
            doc = copy.deepcopy(problem.source)
            doc.setdefault("circuit", {}).update(overrides)
            problem = problem_from_dict(doc, problem.name)
        return problem


def settings_from(args) -> RunSettings:
    with stage("config"):
        return RunSettings(
            mode=args.mode,
            shots=args.shots,
            seed=args.seed,
            failure_rate=args.failure_rate,
            jobs=args.jobs,
            copies=args.copies,
        )


def _out(args) -> Path:
    out = Path(args.out)
    with stage("output"):
        out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands -----------------------------------------------------------------


def cmd_plan(args) -> int:
    problem = load_config(args)
    with stage("plan"):
        plan = build_plan(problem)
    out = _out(args)
    io.write_json(out / "plan.json", json.loads(plan.to_json()), problem.config_hash())
    print(f"sequences: {len(plan)}")
    for theta, n in plan.counts_per_theta().items():
        print(f"  theta={theta:g}: {n}")
    return 0


def cmd_run(args) -> int:
    problem = load_config(args)
    settings = settings_from(args)
    out = _out(args)
    h = problem.config_hash(run=settings.identity())
    executor = Executor(problem, settings)
    cache = out / "cache" / f"evaluations-{h}.json"
    if not args.no_cache:
        with stage("cache"):
            n = executor.load(cache)
        if n:
            log.info("reusing %d cached evaluations from %s", n, cache)
    with stage("run"):
        result = run_pipeline(problem, settings, executor, args.qel_mode)
    log.info("executed %d of %d planned sequences", result.executed, len(result.plan))
    if not args.no_cache:
        with stage("cache"):
            executor.save(cache)

    with stage("output"):
        sc = problem.scaling
        tol = problem.coincidence_tolerance
        derivs = {t: o.derivatives for t, o in result.outcomes.items()}
        scaled = {t: {x: d.scaled(sc.multiplier) for x, d in ds.items()} for t, ds in derivs.items()}
        values = {}
        for t, ds in derivs.items():
            evals = executor.evaluations(t)
            values[t] = {x: sc.value(value_at(evals, x, tol)[0]) for x in ds}
        qel_scaled = {x: d.scaled(sc.multiplier) for x, d in result.qel_derivatives.items()}

        io.write_evaluations(out / "evaluations.csv", result.evaluations, h)
        io.write_derivatives(out / "derivatives.csv", derivs, h)
        io.write_fig2(out / "fig2_derivatives.csv", scaled, values, h)
        io.write_baseline(out / "fig2_baseline.csv", {t: o.baseline for t, o in result.outcomes.items()}, h)
        io.write_losses(out / "fig3a_losses.csv", result.losses, h)
        io.write_qel(out / "fig3b_qel.csv", qel_scaled, result.qel_values, h)
        summary = result.summary()
        summary["extremum"] = result.extremum.to_dict()
        summary["settings"] = settings.identity()
        io.write_json(out / "summary.json", summary, h)
    s = result.summary()
    print(f"theta_opt: {s['theta_opt']:g}")
    print(f"x_opt: {s['x_opt']:.4f} (analytic {s['x_bar_analytic']:.4f}, error {s['x_opt_error']:.4f})")
    print(f"sequences: {s['sequences']}, shots_used: {s['shots_used']}")
    return 0


def cmd_calibrate(args) -> int:
    problem = load_config(args)
    out = _out(args)
    with stage("calibrate"):
        data = io.read_evaluations(args.data)
        spec, geo = problem.circuit, problem.sub_register()
        kwargs = {"search_interval": (-args.half_width, args.half_width)}
        h = problem.config_hash(data=str(args.data))
        if args.per_theta:
            results = fit_detuning_offset_per_theta(data, spec, geo, **kwargs)
            for theta, r in results.items():
                io.write_calibration(out, r, h, stem=f"calibration_theta_{theta:g}")
                print(f"theta={theta:g}: delta_offset {r.delta_offset:.5f} rad/us "
                      f"(rmsd {r.weighted_rmsd_before:.4g} -> {r.weighted_rmsd_after:.4g})")
        else:
            r = fit_detuning_offset(data, spec, geo, **kwargs)
            io.write_calibration(out, r, h)
            print(f"delta_offset: {r.delta_offset:.5f} rad/us")
            print(f"weighted_rmsd: {r.weighted_rmsd_before:.4g} -> {r.weighted_rmsd_after:.4g}")
    return 0


def cmd_derive(args) -> int:
    problem = load_config(args)
    settings = settings_from(args)
    out = _out(args)
    with stage("derive"):
        ex = Executor(problem, settings)
        f = ex.evaluator(args.theta, problem.coincidence_tolerance)
        d = agpsr_derivative(f, args.x, problem.gaps(), problem.shifts)
        doc = {
            "x": d.x,
            "theta": args.theta,
            "derivative": d.value,
            "std_error": d.std_error,
            "scaled_derivative": problem.scaling.derivative(d.value),
            "condition_number": d.condition_number,
            "effective_gaps": list(problem.gaps().gaps),
            "shifts": list(problem.shifts.shifts),
            "evaluations": [{"x": x, "value": e.value, "std_error": e.std_error} for x, e in d.evaluations],
        }
        io.write_json(out / "derive.json", doc, problem.config_hash(run=settings.identity()))
    print(f"df/dx({args.x:g}; theta={args.theta:g}) = {d.value:.6f} +/- {d.std_error:.6f}")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    with stage("report"):
        summary = json.loads((out / "summary.json").read_text())
        losses = io.read_csv(out / "fig3a_losses.csv", ("theta", "sqrt_l_d", "l_b", "total"))
    print(f"config_hash: {summary.get('config_hash', '')}")
    print(f"mode: {summary['mode']}")
    print(f"{'theta':>6} {'sqrt_l_d':>10} {'l_b':>10} {'total':>10}")
    for row in losses:
        mark = " *" if float(row["theta"]) == summary["theta_opt"] else ""
        print(f"{float(row['theta']):6.2f} {float(row['sqrt_l_d']):10.4f} {float(row['l_b']):10.4f} "
              f"{float(row['total']):10.4f}{mark}")
    print(f"theta_opt: {summary['theta_opt']:g}")
    print(f"x_opt: {summary['x_opt']:.4f} ({summary['x_opt_method']}); analytic {summary['x_bar_analytic']:.4f}")
    print(f"sequences: {summary['sequences']}, shots_used: {summary['shots_used']}")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="analog-dqc", description="Closed-loop DQC and extremal learning on a Rydberg pair.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, run_flags=True):
        sp.add_argument("--problem", default="benchmark", help="TOML/JSON problem file or 'benchmark' (bundled)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--set", action="append", type=_parse_override, metavar="KEY=VALUE",
                        help="override a [circuit] field, e.g. modulation_bandwidth=5")
        if run_flags:
            sp.add_argument("--mode", choices=(EXACT, SAMPLED), default=EXACT)
            sp.add_argument("--shots", type=int, default=200)
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--jobs", type=int, default=1)
            sp.add_argument("--copies", type=int, default=None, help="multiplexed copies (default: from problem)")
            sp.add_argument("--failure-rate", type=float, default=0.0, help="state-preparation failure probability")

    sp = sub.add_parser("plan", help="write the deduplicated sequence plan")
    common(sp, run_flags=False)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="run the full closed loop and write figure data")
    common(sp)
    sp.add_argument("--qel-mode", choices=(GRID_ARGMIN, INTERPOLATION), default=GRID_ARGMIN)
    sp.add_argument("--no-cache", action="store_true")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("calibrate", help="fit a detuning offset to measured magnetizations")
    common(sp, run_flags=False)
    sp.add_argument("--data", required=True, help="CSV with columns x, theta, value, std_error[, shots]")
    sp.add_argument("--per-theta", action="store_true", help="fit one offset per theta")
    sp.add_argument("--half-width", type=float, default=3.141592653589793, help="search +/- this (rad/us)")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("derive", help="single-point aGPSR derivative")
    common(sp)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("report", help="print a run summary from an output directory")
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (ProblemFileError, CalibrationError, io.SchemaError) as exc:
        print(f"error [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
