"""Matrix-free metric operators and the linear solver used for natural directions.

The parameter-space metric is built as the pullback ``J^T G_Y J`` of a metric
``G_Y`` on a reference space through the Jacobian ``J`` of a map ``f: X -> Y``.
Only Jacobian-vector and vector-Jacobian products are needed, so neither ``J``
nor the metric is ever stored densely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

EPSILON_OFFSET = 0.1


class DimensionError(ValueError):
    pass


class CgNotConverged(RuntimeError):
    """Raised when linear CG exhausts its iteration budget.

    The last iterate is kept on ``solution`` so callers may still use it.
    """

    def __init__(self, residual: float, iterations: int, solution: np.ndarray):
        super().__init__(
            f"CG did not converge in {iterations} iterations "
            f"(residual norm {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations
        self.solution = solution


@dataclass(frozen=True)
class ReferenceMap:
    """A differentiable map ``f: R^dim_x -> R^dim_y``.

    ``jvp(x, v)`` returns ``J v`` and ``vjp(x, w)`` returns ``J^T w`` where
    ``J[a, i] = d y_a / d x_i``.  ``linearize`` is an optional fast path that
    returns ``(y, jvp_at_x, vjp_at_x)`` sharing cached intermediates.
    """

    dim_x: int
    dim_y: int
    eval: Callable[[np.ndarray], np.ndarray]
    jvp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    vjp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    linearize: Optional[Callable] = None

    def linearized(self, x):
        if self.linearize is not None:
            return self.linearize(x)
        return (
            self.eval(x),
            lambda v: self.jvp(x, v),
            lambda w: self.vjp(x, w),
        )


@dataclass(frozen=True)
class ReferenceMetric:
    apply: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: str = "custom"


@dataclass(frozen=True)
class HessianRegularization:
    """Shift making a reference Hessian positive definite.

    ``epsilon = |epsilon_h_estimate| + offset`` where ``epsilon_h_estimate``
    approximates the smallest Hessian eigenvalue.
    """

    epsilon_h_estimate: float
    power_iters: int = 100
    offset: float = EPSILON_OFFSET

    @property
    def epsilon(self) -> float:
        return abs(self.epsilon_h_estimate) + self.offset


@dataclass(frozen=True)
class CgSolverConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 0.0
    max_iters: Optional[int] = None  # None -> 10 * dim

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be nonnegative")
        if self.max_iters is not None and self.max_iters <= 0:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class MetricOperator:
    """Symmetric positive semidefinite operator ``v -> G v`` (plus ``ridge * v``)."""

    matvec: Callable[[np.ndarray], np.ndarray]
    dim: int
    ridge: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionError(f"expected vector of length {self.dim}, got {v.shape}")
        out = self.matvec(v)
        if self.ridge:
            out = out + self.ridge * v
        return out

    def with_ridge(self, ridge: float) -> "MetricOperator":
        return MetricOperator(self.matvec, self.dim, ridge, dict(self.info))

    def to_dense(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return np.column_stack([self.apply(eye[:, i]) for i in range(self.dim)])


def identity_operator(dim: int) -> MetricOperator:
    return MetricOperator(lambda v: v.copy(), dim, 0.0, {"kind": "identity"})


def euclidean_reference() -> ReferenceMetric:
    return ReferenceMetric(lambda y, u: np.array(u, dtype=float, copy=True), "euclidean")


def hessian_reference(ref_hessian_apply, reg: HessianRegularization) -> ReferenceMetric:
    """Reference metric ``H(y) + epsilon * I`` from a Hessian-vector product."""
    eps = reg.epsilon

    def apply(y, u):
        return ref_hessian_apply(y, u) + eps * u

    return ReferenceMetric(apply, "hessian_regularized")


def pullback_metric(
    fmap: ReferenceMap,
    ref_metric: ReferenceMetric,
    x: np.ndarray,
    ridge: float = 0.0,
) -> MetricOperator:
    """Pullback ``v -> J^T G_Y(f(x)) J v + ridge * v`` evaluated matrix-free."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fmap.dim_x,):
        raise DimensionError(f"map expects x of length {fmap.dim_x}, got {x.shape}")
    y, jvp, vjp = fmap.linearized(x)
    if np.shape(y) != (fmap.dim_y,):
        raise DimensionError(f"map produced y of shape {np.shape(y)}, expected ({fmap.dim_y},)")
    g_apply = ref_metric.apply

    def matvec(v):
        return vjp(g_apply(y, jvp(v)))

    return MetricOperator(matvec, fmap.dim_x, float(ridge), {"kind": ref_metric.kind})


def fisher_metric(probability_model, x: np.ndarray, tol: float = 1e-10) -> MetricOperator:
    """Fisher information operator ``v -> sum_s p_s (dlogp_s . v) dlogp_s``.

    ``probability_model(x)`` returns ``(p, dlogp)`` with ``p`` of shape ``(S,)``
    and ``dlogp`` of shape ``(S, n)``.
    """
    p, dlogp = probability_model(np.asarray(x, dtype=float))
    p = np.asarray(p, dtype=float)
    dlogp = np.asarray(dlogp, dtype=float)
    if np.any(p < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum():.15g}, not 1")
    if dlogp.shape[0] != p.shape[0]:
        raise DimensionError("dlogp must have one row per outcome")

    def matvec(v):
        return dlogp.T @ (p * (dlogp @ v))

    return MetricOperator(matvec, dlogp.shape[1], 0.0, {"kind": "fisher"})


def cg_solve(op: MetricOperator, b: np.ndarray, cfg: CgSolverConfig = CgSolverConfig()) -> np.ndarray:
    """Solve ``op x = b`` by linear conjugate gradients starting from zero.

    Iterates stay in the Krylov space of ``b``, so singular but consistent
    systems converge to the minimum-norm-like solution.  The recursive residual
    is re-checked against the true residual before returning.
    """
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    max_iters = cfg.max_iters if cfg.max_iters is not None else 10 * op.dim
    bnorm = np.linalg.norm(b)
    tol = max(cfg.abs_tol, cfg.rel_tol * bnorm)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x

    r = b.copy()
    p = r.copy()
    rr = r @ r
    it = 0
    while it < max_iters:
        if np.sqrt(rr) <= tol:
            true_r = b - op.apply(x)
            if np.linalg.norm(true_r) <= tol:
                return x
            # drifted recursive residual; restart from the true one
            r = true_r
            p = r.copy()
            rr = r @ r
        ap = op.apply(p)
        pap = p @ ap
        if pap <= 0.0:
            break
        alpha = rr / pap
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1

    resid = float(np.linalg.norm(b - op.apply(x)))
    if resid <= tol:
        return x
    raise CgNotConverged(resid, it, x)


def estimate_min_eigenvalue(op_apply, dim: int, power_iters: int = 100, seed: int = 0) -> float:
    """Smallest eigenvalue of a symmetric operator by shifted power iteration.

    A first power iteration gives the spectral radius ``rho``; power iteration
    on ``H - rho I`` then converges to ``lambda_min - rho``.
    """
    if dim <= 0:
        raise ValueError("dim must be positive")
    if power_iters < 10:
        raise ValueError("power_iters must be at least 10")
    rng = np.random.default_rng(seed)

    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(power_iters):
        w = op_apply(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        rho = nw
        v = w / nw
    # power iteration underestimates rho; pad so the shifted spectrum is <= 0
    shift = 1.01 * rho

    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(power_iters):
        w = op_apply(v) - shift * v
        mu = v @ w
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    return float(mu + shift)


def trace_estimate(op: MetricOperator, probes: int = 8, seed: int = 0) -> float:
    """Hutchinson trace estimate with Rademacher probes."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(probes):
        z = rng.choice([-1.0, 1.0], size=op.dim)
        total += z @ op.apply(z)
    return total / probes


def default_ridge(op: MetricOperator, seed: int = 0, scale: float = 1e-10) -> float:
    """Safety ridge ``scale * trace(G) / n`` for rank-deficient pullbacks."""
    return max(scale * trace_estimate(op, seed=seed) / op.dim, 0.0)
