"""Closed-loop DQC + QEL run: execute the plan, differentiate, select theta, extremize."""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import SequencePlan, derived_seed, plan_experiment, run_circuit
from .config import Problem
from .gpsr import DerivativeEstimate, GapSet, agpsr_derivative
from .problem import Extremum, analytic_extremum
from .qel import GRID_ARGMIN, ExtremizationResult, extend_derivative_grid, find_extremum
from .sampling import DEFAULT_SHOTS, MagnetizationEstimate
from .smoothing import inverse_variance_weights, smoothed_derivative
from .trainer import LossReport, evaluate_loss, fit_scaling_to_solution, grid_search, value_at

log = logging.getLogger(__name__)

EXACT = "exact"
SAMPLED = "sampled"

Key = tuple[float, float]


def _key(x: float, theta: float) -> Key:
    return (round(float(x), 9), round(float(theta), 9))


@dataclass(frozen=True)
class RunSettings:
    mode: str = EXACT
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    failure_rate: float = 0.0
    jobs: int = 1
    copies: int | None = None  # None: one per copy in the problem's register

    def __post_init__(self):
        if self.mode not in (EXACT, SAMPLED):
            raise ValueError(f"mode must be {EXACT!r} or {SAMPLED!r}")
        if self.mode == SAMPLED and self.shots < 1:
            raise ValueError("sampled mode needs shots >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def identity(self) -> dict:
        """Fields that change results (``jobs`` does not)."""
        if self.mode == EXACT:
            return {"mode": EXACT}
        return {
            "mode": SAMPLED,
            "shots": self.shots,
            "seed": self.seed,
            "failure_rate": self.failure_rate,
            "copies": self.copies,
        }


class Executor:
    """Runs (x, theta) sequences once each and remembers the results."""

    def __init__(self, problem: Problem, settings: RunSettings):
        self.problem = problem
        self.settings = settings
        self.spec = problem.circuit
        self.geometry = problem.sub_register()
        self.copies = settings.copies or problem.copies
        self.results: dict[Key, MagnetizationEstimate] = {}
        self.executed = 0
        self._lock = threading.Lock()

    def _run(self, key: Key) -> MagnetizationEstimate:
        x, theta = key
        s = self.settings
        if s.mode == EXACT:
            return run_circuit(x, theta, self.spec, self.geometry)
        return run_circuit(
            x,
            theta,
            self.spec,
            self.geometry,
            shots=s.shots,
            seed=derived_seed(s.seed, x, theta),
            copies=self.copies,
            failure_rate=s.failure_rate,
        )

    def run_many(self, keys) -> None:
        todo = sorted({_key(*k) for k in keys} - self.results.keys())
        if not todo:
            return
        if self.settings.jobs > 1:
            with ThreadPoolExecutor(self.settings.jobs) as pool:
                out = list(pool.map(self._run, todo))
        else:
            out = [self._run(k) for k in todo]
        with self._lock:
            self.results.update(zip(todo, out))
            self.executed += len(todo)

    def get(self, x: float, theta: float) -> MagnetizationEstimate:
        key = _key(x, theta)
        if key not in self.results:
            self.run_many([key])
        return self.results[key]

    def evaluations(self, theta: float) -> dict[float, MagnetizationEstimate]:
        t = round(float(theta), 9)
        return dict(sorted((k[0], v) for k, v in self.results.items() if k[1] == t))

    def evaluator(self, theta: float, tol: float):
        """``x -> estimate`` reusing any stored point within ``tol`` of ``x``."""

        def f(x: float) -> MagnetizationEstimate:
            stored = self.evaluations(theta)
            near = [k for k in stored if abs(k - x) <= tol]
            if near:
                return stored[min(near, key=lambda k: abs(k - x))]
            return self.get(x, theta)

        return f

    def shots_used(self) -> int:
        return sum(v.shots or 0 for v in self.results.values())

    # disk cache
    def save(self, path: Path) -> None:
        doc = [
            {"x": k[0], "theta": k[1], "value": v.value, "std_error": v.std_error, "shots": v.shots}
            for k, v in sorted(self.results.items())
        ]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc))

    def load(self, path: Path) -> int:
        if not path.exists():
            return 0
        for row in json.loads(path.read_text()):
            self.results[_key(row["x"], row["theta"])] = MagnetizationEstimate(
                row["value"], row["std_error"], row["shots"]
            )
        return len(self.results)


@dataclass(frozen=True)
class ThetaOutcome:
    theta: float
    derivatives: dict[float, DerivativeEstimate]
    loss: LossReport
    baseline: tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class PipelineResult:
    problem: Problem
    settings: RunSettings
    plan: SequencePlan
    gaps: GapSet
    outcomes: dict[float, ThetaOutcome]
    theta_opt: float
    qel_derivatives: dict[float, DerivativeEstimate]
    qel_values: dict[float, tuple[float, float]]
    extremum: ExtremizationResult
    analytic: Extremum
    evaluations: dict[Key, MagnetizationEstimate]
    new_qel_points: list[float] = field(default_factory=list)
    executed: int = 0

    @property
    def losses(self) -> list[LossReport]:
        return [o.loss for o in self.outcomes.values()]

    def summary(self) -> dict:
        ext = self.extremum
        return {
            "theta_opt": self.theta_opt,
            "x_opt": ext.x_opt,
            "f_at_opt": ext.f_at_opt,
            "x_opt_method": ext.method,
            "x_bar_analytic": self.analytic.x,
            "f_bar_analytic": self.analytic.value,
            "x_opt_error": abs(ext.x_opt - self.analytic.x),
            "sequences": len(self.plan),
            "shots_used": sum(v.shots or 0 for v in self.evaluations.values()),
            "mode": self.settings.mode,
            "effective_gaps": list(self.gaps.gaps),
            "shifts": list(self.problem.shifts.shifts),
            "scaling": {"multiplier": self.problem.scaling.multiplier, "offset": self.problem.scaling.offset},
        }


def build_plan(problem: Problem) -> SequencePlan:
    return plan_experiment(
        problem.collocation.points,
        problem.thetas,
        problem.shifts.shifts,
        boundary_x=problem.de.boundary_x,
        qel_theta=problem.qel_theta,
        qel_points=problem.collocation.extra_qel_points,
        tol=problem.coincidence_tolerance,
    )


def smoothing_baseline(problem: Problem, evaluations: dict[float, MagnetizationEstimate]):
    """Smoothed magnetization and its x-derivative over the evaluated points of one theta."""
    xs = np.array(sorted(evaluations))
    ys = np.array([evaluations[x].value for x in xs])
    se = np.array([evaluations[x].std_error for x in xs])
    config = problem.smoothing.with_weights(inverse_variance_weights(se))
    z, dz = smoothed_derivative(xs, ys, config)
    return xs, z, dz


def run_pipeline(
    problem: Problem,
    settings: RunSettings = RunSettings(),
    executor: Executor | None = None,
    qel_mode: str = GRID_ARGMIN,
) -> PipelineResult:
    executor = executor or Executor(problem, settings)
    plan = build_plan(problem)
    executor.run_many((e.x, e.theta) for e in plan.entries)
    gaps = problem.gaps()
    tol = problem.coincidence_tolerance
    de = problem.de

    outcomes = {}
    for theta in sorted(problem.thetas):
        f = executor.evaluator(theta, tol)
        derivs = {c: agpsr_derivative(f, c, gaps, problem.shifts) for c in problem.collocation.points}
        evals = executor.evaluations(theta)
        loss = evaluate_loss(
            theta, evals, derivs, de, problem.collocation.points, problem.scaling, problem.boundary_weight, tol
        )
        outcomes[theta] = ThetaOutcome(theta, derivs, loss, smoothing_baseline(problem, evals))
    theta_opt, _ = grid_search([o.loss for o in outcomes.values()])

    f_opt = executor.evaluator(theta_opt, tol)
    before = executor.executed
    qel_derivs, new_points = extend_derivative_grid(
        outcomes[theta_opt].derivatives,
        problem.collocation.extra_qel_points,
        lambda x: agpsr_derivative(f_opt, x, gaps, problem.shifts),
        domain=de.domain,
    )
    if executor.executed > before:
        log.info("QEL stage executed %d additional sequences", executor.executed - before)
    evals = executor.evaluations(theta_opt)
    sc = problem.scaling
    qel_values = {}
    for x in qel_derivs:
        v, e = value_at(evals, x, tol)
        qel_values[x] = (sc.value(v), abs(sc.multiplier) * e)
    extremum = find_extremum(
        {x: sc.derivative(d.value) for x, d in qel_derivs.items()}, {x: v for x, (v, _) in qel_values.items()}, qel_mode
    )
    return PipelineResult(
        problem=problem,
        settings=settings,
        plan=plan,
        gaps=gaps,
        outcomes=outcomes,
        theta_opt=theta_opt,
        qel_derivatives=qel_derivs,
        qel_values=qel_values,
        extremum=extremum,
        analytic=analytic_extremum(de),
        evaluations=dict(sorted(executor.results.items())),
        new_qel_points=new_points,
        executed=executor.executed,
    )


def dense_sweep(problem: Problem, theta: float, xs) -> np.ndarray:
    """Noiseless magnetization on an arbitrary x grid."""
    geo = problem.sub_register()
    return np.array([run_circuit(x, theta, problem.circuit, geo).value for x in xs])


def fit_benchmark_scaling(problem: Problem, theta: float | None = None, points: int = 241):
    """Least-squares affine map from the noiseless sweep at ``theta`` onto the exact solution."""
    theta = problem.qel_theta if theta is None else theta
    lo, hi = problem.de.domain
    xs = np.linspace(lo, hi, points)
    return fit_scaling_to_solution(xs, dense_sweep(problem, theta, xs), problem.de)

