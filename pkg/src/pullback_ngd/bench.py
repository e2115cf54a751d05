"""Benchmark harness: configured problems, method sweeps, traces and oracle checks.

Configs are INI files::

    [benchmark]
    problem = rayleigh          ; rayleigh | spin | mps_lsm
    seed = 11
    output_dir = out/rayleigh
    jobs = 1

    [problem]
    n = 200

    [defaults]
    max_iterations = 1000

    [method:ngd_pullback]
    method = ngd
    metric = rayleigh_pullback
    cg_max_iters = 50           ; any [defaults] key may be overridden here

Relative paths inside a config resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import mps, oracles, rayleigh, spin
from .metric import CgSolverConfig, euclidean_reference, hessian_reference
from .optim import LineSearchConfig, OptimizerConfig, NonFiniteError, RunTrace, optimize

log = logging.getLogger(__name__)

PROBLEMS = ("rayleigh", "spin", "mps_lsm")
METRIC_IDS = (
    "density", "hilbert_identity", "hilbert_hessian", "mps_amplitude",
    "rayleigh_pullback", "fisher", "spin_pullback", "identity",
)
THRESHOLDS = (1e-3, 1e-6, 1e-10)
CSV_HEADER = ("iteration", "cost", "relative_error", "grad_norm", "step_size", "elapsed_seconds")

# offsets from the master seed
START_SEED_OFFSET = 1
METHOD_SEED_OFFSET = 100

PROBLEM_DEFAULTS = {
    "rayleigh": {"n": 200, "matrix_file": "", "power_iters": 300},
    "spin": {"width": 32, "height": 32, "periodic": True, "power_iters": 100},
    "mps_lsm": {"length": 10, "bond_dim": 3, "noise": 0.1, "data_file": "", "power_iters": 100},
}

METHOD_DEFAULTS = {
    "max_iterations": 1000,
    "grad_tol": 1e-12,
    "cost_tol": 0.0,
    "initial_step": 1.0,
    "shrink_factor": 0.5,
    "armijo_c": 1e-4,
    "max_backtracks": 40,
    "normalize_direction": True,
    "cg_rel_tol": 1e-10,
    "cg_abs_tol": 0.0,
    "cg_max_iters": 0,  # 0 -> 10 * n
    "ridge_scale": 1e-10,
}


class ConfigError(ValueError):
    pass


@dataclass
class MethodEntry:
    name: str
    method: str
    metric_id: Optional[str]
    settings: dict

    @property
    def label(self) -> str:
        return self.method if self.metric_id is None else f"{self.method}-{self.metric_id}"


@dataclass
class BenchmarkConfig:
    problem: str
    problem_params: dict
    methods: List[MethodEntry]
    output_dir: Path
    seed: int = 0
    jobs: int = 1
    source: Optional[Path] = None

    def resolved(self) -> dict:
        return {
            "problem": self.problem,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "jobs": self.jobs,
            "problem_params": dict(self.problem_params),
            "methods": [asdict(m) for m in self.methods],
        }


def _coerce(value: str, like):
    if isinstance(like, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value.strip()


def _merge(defaults: dict, section, where: str) -> dict:
    out = dict(defaults)
    for key, raw in section.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in {where}")
        try:
            out[key] = _coerce(raw, defaults[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} in {where}: {exc}") from exc
    return out


def parse_config(text: str, base_dir: Path = Path(".")) -> BenchmarkConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), default_section="__none__")
    cp.read_string(text)
    if not cp.has_section("benchmark"):
        raise ConfigError("missing [benchmark] section")
    b = cp["benchmark"]
    problem = b.get("problem", "").strip()
    if problem not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {problem!r}")
    try:
        seed = int(b.get("seed", "0"))
        jobs = int(b.get("jobs", "1"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if jobs < 1:
        raise ConfigError("jobs must be positive")
    out = Path(b.get("output_dir", f"out/{problem}"))
    if not out.is_absolute():
        out = Path(os.path.normpath(base_dir / out))

    params = _merge(PROBLEM_DEFAULTS[problem], cp["problem"] if cp.has_section("problem") else {}, "[problem]")
    for key in ("matrix_file", "data_file"):
        if params.get(key) and not Path(params[key]).is_absolute():
            params[key] = str(base_dir / params[key])
    base = _merge(METHOD_DEFAULTS, cp["defaults"] if cp.has_section("defaults") else {}, "[defaults]")

    methods = []
    for name in cp.sections():
        if not name.startswith("method:"):
            if name not in ("benchmark", "problem", "defaults"):
                raise ConfigError(f"unknown section [{name}]")
            continue
        sec = dict(cp[name])
        method = sec.pop("method", "").strip()
        metric = sec.pop("metric", "").strip() or None
        settings = _merge(base, sec, f"[{name}]")
        entry = MethodEntry(name.split(":", 1)[1].strip(), method, metric, settings)
        _check_entry(problem, params, entry)
        methods.append(entry)
    if not methods:
        raise ConfigError("no [method:NAME] sections; at least one method is required")
    return BenchmarkConfig(problem, params, methods, out, seed, jobs)


def load_config(path) -> BenchmarkConfig:
    path = Path(path)
    cfg = parse_config(path.read_text(), path.parent)
    cfg.source = path
    return cfg


def _valid_metrics(problem: str, params: dict):
    if problem == "rayleigh":
        return {"rayleigh_pullback", "fisher", "identity"}
    if problem == "spin":
        return {"spin_pullback", "identity"}
    ids = {"density", "mps_amplitude", "identity"}
    if params["length"] <= mps.DENSE_MAX_LENGTH:
        ids |= {"hilbert_identity", "hilbert_hessian"}
    return ids


def _check_entry(problem, params, entry: MethodEntry):
    where = f"[method:{entry.name}]"
    if entry.method not in ("gd", "nonlinear_cg", "ngd"):
        raise ConfigError(f"{where}: unknown method {entry.method!r}")
    if entry.method == "ngd":
        if entry.metric_id is None:
            raise ConfigError(f"{where}: method ngd needs a metric")
        if entry.metric_id not in METRIC_IDS:
            raise ConfigError(f"{where}: unknown metric {entry.metric_id!r}")
        if entry.metric_id not in _valid_metrics(problem, params):
            raise ConfigError(f"{where}: metric {entry.metric_id!r} is not available for {problem}")
    elif entry.metric_id is not None:
        raise ConfigError(f"{where}: metric is only meaningful for method ngd")


# -- problem construction -------------------------------------------------------


@dataclass
class BuiltProblem:
    problem: object
    x0: np.ndarray
    min_cost: Optional[float]
    description: dict = field(default_factory=dict)


def build_problem(name: str, params: dict, seed: int) -> BuiltProblem:
    start_seed = seed + START_SEED_OFFSET
    if name == "rayleigh":
        if params["matrix_file"]:
            inst = rayleigh.RayleighInstance.from_file(params["matrix_file"])
        else:
            inst = rayleigh.RayleighInstance.random(params["n"], seed)
        lmin = float(np.linalg.eigvalsh(inst.H)[0])
        prob = rayleigh.make_problem(inst, params["power_iters"], min_cost=lmin)
        return BuiltProblem(prob, rayleigh.random_start(inst.n, start_seed), lmin, {"n": inst.n})
    if name == "spin":
        lat = spin.SpinLattice(params["width"], params["height"], params["periodic"])
        prob = spin.make_problem(lat, params["power_iters"])
        return BuiltProblem(prob, lat.random_spins(start_seed), prob.min_cost, {"sites": lat.n_sites})
    if name == "mps_lsm":
        if params["data_file"]:
            data = mps.TargetData.read(params["data_file"])
            if data.length != params["length"]:
                raise ConfigError(f"data file has L={data.length}, config says {params['length']}")
        else:
            data = mps.generate_target_data(params["length"], params["noise"], seed)
        layout = mps.MPSLayout(params["length"], params["bond_dim"])
        prob = mps.make_problem(layout, data, params["power_iters"])
        x0 = mps.MPSState.random(layout.length, layout.bond_dim, start_seed).to_vector()
        return BuiltProblem(prob, x0, None, {"n_params": layout.n_params})
    raise ConfigError(f"unknown problem {name!r}")


def optimizer_configs(entry: MethodEntry, seed: int):
    s = entry.settings
    cg = CgSolverConfig(s["cg_rel_tol"], s["cg_abs_tol"], s["cg_max_iters"] or None)
    opt = OptimizerConfig(
        method=entry.method,
        max_iterations=s["max_iterations"],
        grad_tol=s["grad_tol"],
        cost_tol=s["cost_tol"],
        metric_id=entry.metric_id,
        seed=seed,
        cg=cg,
        ridge_scale=s["ridge_scale"],
    )
    ls = LineSearchConfig(
        s["initial_step"], s["shrink_factor"], s["armijo_c"], s["max_backtracks"], s["normalize_direction"]
    )
    return opt, ls


# -- runs -------------------------------------------------------------------------


def relative_error(cost: float, min_cost: Optional[float]) -> Optional[float]:
    if min_cost is None or min_cost == 0.0:
        return None
    return abs((cost - min_cost) / min_cost)


def iterations_to(trace: RunTrace, min_cost, threshold: float) -> Optional[int]:
    """First accepted iteration whose relative error is at most ``threshold``."""
    if min_cost is None:
        return None
    if relative_error(trace.initial_cost, min_cost) <= threshold:
        return 0
    for r in trace.records:
        if relative_error(r.cost, min_cost) <= threshold:
            return r.iteration
    return None


def trace_csv(trace: RunTrace, min_cost) -> str:
    """CSV text; the timing column is last so it can be stripped for comparison."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)

    def rel(c):
        e = relative_error(c, min_cost)
        return "" if e is None else repr(e)

    w.writerow([0, repr(trace.initial_cost), rel(trace.initial_cost), repr(trace.initial_grad_norm), "", repr(0.0)])
    for r in trace.records:
        w.writerow([
            r.iteration, repr(r.cost), rel(r.cost), repr(r.grad_norm), repr(r.step_size), repr(r.elapsed_seconds),
        ])
    return buf.getvalue()


@dataclass
class RunResult:
    entry: MethodEntry
    trace: RunTrace
    min_cost: Optional[float]
    wall_seconds: float
    problem_info: dict
    error: Optional[str] = None

    def summary(self) -> dict:
        t = self.trace
        return {
            "name": self.entry.name,
            "method": self.entry.method,
            "metric": self.entry.metric_id,
            "terminal_reason": "error" if self.error else t.terminal_reason,
            "error": self.error,
            "iterations": len(t.records),
            "initial_cost": t.initial_cost,
            "final_cost": t.final_cost,
            "final_relative_error": relative_error(t.final_cost, self.min_cost),
            "iterations_to": {repr(th): iterations_to(t, self.min_cost, th) for th in THRESHOLDS},
            "cost_evals": t.cost_evals,
            "grad_evals": t.grad_evals,
            "metric_applies": t.metric_applies,
            "fallback_iterations": len(t.fallback_iterations),
            "wall_seconds": self.wall_seconds,
            "problem_info": self.problem_info,
        }


def run_method(cfg: BenchmarkConfig, index: int, built: Optional[BuiltProblem] = None) -> RunResult:
    entry = cfg.methods[index]
    if built is None:
        built = build_problem(cfg.problem, cfg.problem_params, cfg.seed)
    opt, ls = optimizer_configs(entry, cfg.seed + METHOD_SEED_OFFSET * (index + 1))
    t0 = time.perf_counter()
    error = None
    try:
        trace = optimize(built.problem, built.x0, opt, ls)
    except NonFiniteError as exc:
        trace, error = exc.trace, str(exc)
    wall = time.perf_counter() - t0
    log.info("%s: %s after %d steps, cost %r", entry.name, trace.terminal_reason, len(trace.records), trace.final_cost)
    return RunResult(entry, trace, built.min_cost, wall, dict(built.problem.info), error)


def _run_in_worker(args):
    cfg, index = args
    return run_method(cfg, index)


def run_benchmark(cfg: BenchmarkConfig) -> dict:
    """Run every method entry, write traces and summaries, return the summary dict."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    idx = range(len(cfg.methods))
    if cfg.jobs > 1 and len(cfg.methods) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(cfg.methods))) as pool:
            results = list(pool.map(_run_in_worker, [(cfg, i) for i in idx]))
    else:
        built = build_problem(cfg.problem, cfg.problem_params, cfg.seed)
        results = [run_method(cfg, i, built) for i in idx]

    min_cost = results[0].min_cost
    for res in results:
        path = out / f"{cfg.problem}__{res.entry.name}.csv"
        path.write_text(trace_csv(res.trace, min_cost))
    summary = {
        "problem": cfg.problem,
        "min_cost": min_cost,
        "thresholds": list(THRESHOLDS),
        "runs": [r.summary() for r in results],
    }
    resolved = cfg.resolved()
    resolved["min_cost"] = min_cost
    resolved["method_seeds"] = {m.name: cfg.seed + METHOD_SEED_OFFSET * (i + 1) for i, m in enumerate(cfg.methods)}
    resolved["start_seed"] = cfg.seed + START_SEED_OFFSET
    resolved["problem_info"] = {r.entry.name: r.problem_info for r in results}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "summary.txt").write_text(format_summary(summary))
    (out / "resolved_config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return summary


def format_summary(summary: dict) -> str:
    head = f"{'name':<22}{'reason':<20}{'iters':>7}{'final cost':>24}"
    head += "".join(f"{'to ' + format(t, '.0e'):>10}" for t in THRESHOLDS)
    head += f"{'f evals':>9}{'G applies':>11}{'wall s':>9}"
    lines = [f"problem: {summary['problem']}   min cost: {summary['min_cost']!r}", head]
    for r in summary["runs"]:
        row = f"{r['name']:<22}{r['terminal_reason']:<20}{r['iterations']:>7}{r['final_cost']!r:>24}"
        for t in THRESHOLDS:
            k = r["iterations_to"][repr(t)]
            row += f"{'-' if k is None else k:>10}"
        row += f"{r['cost_evals']:>9}{r['metric_applies']:>11}{r['wall_seconds']:>9.2f}"
        lines.append(row)
    return "\n".join(lines) + "\n"


# -- verification -----------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | skip
    defect: Optional[float] = None
    tol: Optional[float] = None
    note: str = ""

    def line(self) -> str:
        d = "" if self.defect is None else f" defect={self.defect:.3e} tol={self.tol:.0e}"
        n = f" ({self.note})" if self.note else ""
        return f"{self.status.upper():<5}{self.name}{d}{n}"


@dataclass
class OracleCase:
    """A metric exposed as a pullback, with what the dense oracles need."""

    metric_id: str
    fmap: object
    ref_metric: object
    x: np.ndarray
    operator: object
    grad_y: Optional[np.ndarray] = None


def oracle_cases(problem: str, params: dict, seed: int):
    """Build the problem at ``params`` and one OracleCase per pullback metric."""
    built = build_problem(problem, params, seed)
    x = built.x0
    cases = []
    if problem == "rayleigh":
        n = x.size
        H = _rayleigh_matrix(params, seed)
        inst = rayleigh.RayleighInstance(H)
        reg = rayleigh.rayleigh_regularization(inst, params["power_iters"], seed)
        cases.append(OracleCase(
            "rayleigh_pullback", rayleigh.normalized_vector_map(n), rayleigh.rayleigh_hessian_reference(inst, reg),
            x, rayleigh.rayleigh_pullback_metric(x, inst, reg), rayleigh.reference_gradient(x, inst),
        ))
    elif problem == "spin":
        lat = spin.SpinLattice(params["width"], params["height"], params["periodic"])
        reg = spin.spin_regularization(lat, params["power_iters"], seed)
        ref = hessian_reference(lambda y, u: spin.reference_hessian_apply(lat, u), reg)
        cases.append(OracleCase(
            "spin_pullback", spin.spin_normalization_map(lat), ref, x,
            spin.spin_pullback_metric(lat, x, reg), spin.reference_gradient(lat, x),
        ))
    else:
        layout = mps.MPSLayout(params["length"], params["bond_dim"])
        data = _mps_data(params, seed)
        cases.append(OracleCase(
            "density", mps.density_map(layout), euclidean_reference(), x,
            mps.metric_density_reference(layout, x), mps.density_reference_gradient(layout, x, data),
        ))
        if layout.length <= mps.DENSE_MAX_LENGTH:
            cases.append(OracleCase(
                "mps_amplitude", mps.amplitude_map(layout), euclidean_reference(), x,
                mps.metric_mps_amplitude(layout, x),
            ))
            hmap = mps.hilbert_map(layout)
            quartic = mps.QuarticReference(data)
            cases.append(OracleCase(
                "hilbert_identity", hmap, euclidean_reference(), x,
                mps.metric_hilbert_identity(layout, x), quartic.gradient(hmap.eval(x)),
            ))
            reg = mps.hilbert_regularization(layout, x, data, params["power_iters"], seed)
            cases.append(OracleCase(
                "hilbert_hessian", hmap, hessian_reference(quartic.hessian_apply, reg), x,
                mps.metric_hilbert_hessian(layout, x, data, reg), quartic.gradient(hmap.eval(x)),
            ))
    return built, cases


def _rayleigh_matrix(params, seed):
    if params["matrix_file"]:
        return rayleigh.RayleighInstance.from_file(params["matrix_file"]).H
    return rayleigh.RayleighInstance.random(params["n"], seed).H


def _mps_data(params, seed):
    if params["data_file"]:
        return mps.TargetData.read(params["data_file"])
    return mps.generate_target_data(params["length"], params["noise"], seed)


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def verify(cfg: BenchmarkConfig, projection_tol: Optional[float] = None) -> List[CheckResult]:
    """Dense cross-checks of the configured problem; oversized pieces are skipped."""
    if projection_tol is None:
        projection_tol = 1e-8 if cfg.problem == "rayleigh" else 1e-6
    results = []
    try:
        built, cases = oracle_cases(cfg.problem, cfg.problem_params, cfg.seed)
    except oracles.GuardExceeded as exc:
        return [CheckResult("build", "skip", note=str(exc))]
    prob, x = built.problem, built.x0

    if x.size <= oracles.DENSE_GUARD:
        fd = oracles.finite_difference_gradient(prob.cost, x)
        results.append(CheckResult("gradient vs finite differences", _status(_rel_err(prob.gradient(x), fd), 1e-6),
                                   _rel_err(prob.gradient(x), fd), 1e-6))
    else:
        results.append(CheckResult("gradient vs finite differences", "skip", note=f"n={x.size} over guard"))

    for c in cases:
        tag = f"[{c.metric_id}] "
        d = oracles.adjoint_defect(c.fmap, x, trials=20, seed=cfg.seed)
        results.append(CheckResult(tag + "jvp/vjp adjointness", _status(d, 1e-10), d, 1e-10))
        try:
            G = oracles.assemble_dense_metric(c.fmap, c.ref_metric, x)
            n = x.size
            eye = np.eye(n)
            free = np.column_stack([c.operator.apply(eye[:, i]) for i in range(n)])
            d = float(np.abs(free - G).max())
            results.append(CheckResult(tag + "matrix-free vs dense metric", _status(d, 1e-10), d, 1e-10))
        except oracles.GuardExceeded as exc:
            results.append(CheckResult(tag + "matrix-free vs dense metric", "skip", note=str(exc)))
        try:
            d = oracles.projection_identity_check(c.fmap, c.ref_metric, x, prob.gradient(x), c.grad_y)
            results.append(CheckResult(tag + "projection identity", _status(d, projection_tol), d, projection_tol))
        except oracles.GuardExceeded as exc:
            results.append(CheckResult(tag + "projection identity", "skip", note=str(exc)))
        except np.linalg.LinAlgError as exc:
            results.append(CheckResult(tag + "projection identity", "fail", note=str(exc)))
    return results


def _status(defect, tol):
    return "pass" if defect <= tol else "fail"
