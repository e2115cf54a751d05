"""Line-searched descent loop with gradient, nonlinear-CG and natural directions."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .metric import CgNotConverged, CgSolverConfig, MetricOperator, cg_solve, default_ridge

METHODS = ("gd", "nonlinear_cg", "ngd")
TERMINAL_REASONS = ("converged", "max_iters", "line_search_failed")

# metric_id -> factory(x0, seed) -> (x -> MetricOperator)
MetricFactory = Callable[[np.ndarray, int], Callable[[np.ndarray], MetricOperator]]


class LineSearchFailed(RuntimeError):
    pass


class NonFiniteError(FloatingPointError):
    """Cost or gradient became non-finite; ``trace`` holds the run so far."""

    def __init__(self, message: str, trace: "RunTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class Problem:
    """Cost, gradient and the named metrics available for natural descent.

    ``min_cost`` is the known optimum when there is one; it only feeds the
    relative-error column of benchmark output.
    """

    cost: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    metrics: Dict[str, MetricFactory] = field(default_factory=dict)
    min_cost: Optional[float] = None
    name: str = "problem"
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LineSearchConfig:
    initial_step: float = 1.0
    shrink_factor: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 40
    normalize_direction: bool = True

    def __post_init__(self):
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if self.max_backtracks <= 0:
            raise ValueError("max_backtracks must be positive")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "gd"
    max_iterations: int = 1000
    grad_tol: float = 1e-12
    cost_tol: float = 0.0
    metric_id: Optional[str] = None
    seed: int = 0
    cg: CgSolverConfig = CgSolverConfig()
    ridge_scale: float = 1e-10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.grad_tol < 0 or self.cost_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if (self.method == "ngd") != (self.metric_id is not None):
            raise ValueError("metric_id must be given exactly when method is 'ngd'")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    cost: float
    grad_norm: float
    step_size: float
    elapsed_seconds: float


@dataclass
class RunTrace:
    records: List[StepRecord] = field(default_factory=list)
    terminal_reason: str = "max_iters"
    initial_cost: float = float("nan")
    initial_grad_norm: float = float("nan")
    x_final: Optional[np.ndarray] = None
    cost_evals: int = 0
    grad_evals: int = 0
    metric_applies: int = 0
    fallback_iterations: List[int] = field(default_factory=list)

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    @property
    def final_cost(self) -> float:
        return self.records[-1].cost if self.records else self.initial_cost


@dataclass(frozen=True)
class LineSearchResult:
    step: float
    x_new: np.ndarray
    cost: float
    direction: np.ndarray
    evaluations: int


def gradient_descent_direction(grad: np.ndarray) -> np.ndarray:
    return -np.asarray(grad, dtype=float)


def nonlinear_cg_direction(grad, prev_grad=None, prev_dir=None) -> np.ndarray:
    """Polak-Ribiere+ direction; falls back to steepest descent when beta clamps to 0."""
    grad = np.asarray(grad, dtype=float)
    if prev_grad is None or prev_dir is None:
        return -grad
    if grad.shape != np.shape(prev_grad) or grad.shape != np.shape(prev_dir):
        raise ValueError("grad, prev_grad and prev_dir must have equal length")
    denom = prev_grad @ prev_grad
    if denom == 0.0:
        return -grad
    beta = max(0.0, grad @ (grad - prev_grad) / denom)
    if beta == 0.0:
        return -grad
    return -grad + beta * np.asarray(prev_dir, dtype=float)


def natural_direction(grad, metric: MetricOperator, cg: CgSolverConfig = CgSolverConfig()) -> np.ndarray:
    """Descent direction ``-G^{-1} grad`` with ``G`` solved by linear CG."""
    return -cg_solve(metric, np.asarray(grad, dtype=float), cg)


def line_search(
    problem: Problem,
    x: np.ndarray,
    direction: np.ndarray,
    cfg: LineSearchConfig = LineSearchConfig(),
    cost0: Optional[float] = None,
    grad0: Optional[np.ndarray] = None,
) -> LineSearchResult:
    """Backtracking Armijo search along ``direction`` (unit-normalized if configured).

    Tries ``eta = initial_step * shrink_factor**k`` for ``k = 0..max_backtracks``
    and accepts the first (largest) one with sufficient decrease.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    evals = 0
    if cost0 is None:
        cost0 = problem.cost(x)
        evals += 1
    if grad0 is None:
        grad0 = problem.gradient(x)
    if cfg.normalize_direction:
        nd = np.linalg.norm(d)
        if nd == 0.0:
            raise ValueError("cannot normalize a zero direction")
        d = d / nd
    slope = d @ grad0
    if not slope < 0:
        raise ValueError(f"not a descent direction (d.grad = {slope:.3e})")

    eta = cfg.initial_step
    for _ in range(cfg.max_backtracks + 1):
        x_new = x + eta * d
        f_new = problem.cost(x_new)
        evals += 1
        if np.isfinite(f_new) and f_new <= cost0 + cfg.armijo_c * eta * slope:
            return LineSearchResult(eta, x_new, float(f_new), d, evals)
        eta *= cfg.shrink_factor
    raise LineSearchFailed(f"no Armijo step within {cfg.max_backtracks} backtracks")


class _CountingOperator:
    def __init__(self, op: MetricOperator, counter: list):
        self._op = op
        self._counter = counter
        self.dim = op.dim

    def apply(self, v):
        self._counter[0] += 1
        return self._op.apply(v)


def optimize(
    problem: Problem,
    x0: np.ndarray,
    opt_cfg: OptimizerConfig = OptimizerConfig(),
    ls_cfg: LineSearchConfig = LineSearchConfig(),
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> RunTrace:
    """Run the configured descent method from ``x0``.

    Stops when the gradient norm drops to ``grad_tol``, an accepted step
    changes the cost by at most ``cost_tol``, the iteration budget is used up,
    or the line search fails.  One record is kept per accepted step.
    """
    x = np.array(x0, dtype=float, copy=True)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    trace = RunTrace()
    metric_at = None
    if opt_cfg.method == "ngd":
        if opt_cfg.metric_id not in problem.metrics:
            raise KeyError(
                f"problem {problem.name!r} has no metric {opt_cfg.metric_id!r}; "
                f"available: {sorted(problem.metrics)}"
            )
        metric_at = problem.metrics[opt_cfg.metric_id](x, opt_cfg.seed)
    applies = [0]

    f = float(problem.cost(x))
    g = problem.gradient(x)
    trace.cost_evals += 1
    trace.grad_evals += 1
    trace.initial_cost = f
    trace.initial_grad_norm = float(np.linalg.norm(g))
    trace.x_final = x
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NonFiniteError("non-finite cost or gradient at x0", trace)

    prev_g = prev_d = None
    t_start = time.perf_counter()
    for it in range(1, opt_cfg.max_iterations + 1):
        if np.linalg.norm(g) <= opt_cfg.grad_tol:
            trace.terminal_reason = "converged"
            return trace

        if opt_cfg.method == "gd":
            d = gradient_descent_direction(g)
        elif opt_cfg.method == "nonlinear_cg":
            d = nonlinear_cg_direction(g, prev_g, prev_d)
            if d @ g >= 0:
                d = -g
                trace.fallback_iterations.append(it)
        else:
            op = metric_at(x)
            if opt_cfg.ridge_scale > 0 and op.ridge == 0 and op.info.get("kind") != "identity":
                op = op.with_ridge(default_ridge(op, seed=opt_cfg.seed, scale=opt_cfg.ridge_scale))
            counted = _CountingOperator(op, applies)
            try:
                d = natural_direction(g, counted, opt_cfg.cg)
            except CgNotConverged as exc:
                d = -exc.solution
            if not np.all(np.isfinite(d)) or d @ g >= 0:
                d = -g
                trace.fallback_iterations.append(it)

        try:
            res = line_search(problem, x, d, ls_cfg, cost0=f, grad0=g)
        except LineSearchFailed:
            trace.terminal_reason = "line_search_failed"
            return trace
        finally:
            trace.metric_applies = applies[0]
        trace.cost_evals += res.evaluations

        x_new = res.x_new
        g_new = problem.gradient(x_new)
        trace.grad_evals += 1
        if not np.all(np.isfinite(g_new)):
            raise NonFiniteError(f"non-finite gradient at iteration {it}", trace)

        prev_g, prev_d = g, d
        df = f - res.cost
        x, f, g = x_new, res.cost, g_new
        trace.x_final = x
        trace.records.append(
            StepRecord(it, f, float(np.linalg.norm(g)), res.step, time.perf_counter() - t_start)
        )
        if callback is not None:
            callback(it, x)
        if abs(df) <= opt_cfg.cost_tol:
            trace.terminal_reason = "converged"
            return trace

    if np.linalg.norm(g) <= opt_cfg.grad_tol and opt_cfg.max_iterations > 0:
        trace.terminal_reason = "converged"
    else:
        trace.terminal_reason = "max_iters"
    return trace
