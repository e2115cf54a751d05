"""Smallest eigenvalue of a symmetric matrix by Rayleigh-quotient minimization.

The reference space is the unit sphere, ``Y = x / |x|``, on which the cost is
the quadratic form ``Y^T H Y``.  Two metrics are offered: the pullback of the
shifted matrix ``H + eps I``, and the Fisher information of the Born weights
``p_s = x_s^2 / |x|^2`` (which only rescales the gradient).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metric import (
    HessianRegularization,
    MetricOperator,
    ReferenceMap,
    estimate_min_eigenvalue,
    fisher_metric,
    hessian_reference,
    identity_operator,
    pullback_metric,
)
from .optim import Problem

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RayleighInstance:
    H: np.ndarray
    seed: int = 0

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        if H.shape[0] < 2:
            raise ValueError("n must be at least 2")
        if not np.array_equal(H, H.T):
            log.info("symmetrizing non-symmetric input matrix")
        H = 0.5 * (H + H.T)
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @classmethod
    def random(cls, n: int, seed: int = 0) -> "RayleighInstance":
        """Symmetrized i.i.d. standard normal matrix."""
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((n, n))
        return cls(0.5 * (m + m.T), seed)

    @classmethod
    def from_file(cls, path) -> "RayleighInstance":
        """Read ``n`` then ``n*n`` row-major reals, whitespace separated."""
        tokens = Path(path).read_text().split()
        n = int(tokens[0])
        vals = np.array([float(t) for t in tokens[1:]])
        if vals.size != n * n:
            raise ValueError(f"expected {n * n} matrix entries, found {vals.size}")
        return cls(vals.reshape(n, n))

    def to_file(self, path) -> None:
        lines = [str(self.n)]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.H]
        Path(path).write_text("\n".join(lines) + "\n")


def _check_nonzero(x):
    x = np.asarray(x, dtype=float)
    nrm2 = x @ x
    if nrm2 == 0.0:
        raise ValueError("x must be nonzero")
    return x, nrm2


def rayleigh_cost(x, inst: RayleighInstance) -> float:
    x, nrm2 = _check_nonzero(x)
    return float(x @ inst.H @ x / nrm2)


def rayleigh_gradient(x, inst: RayleighInstance) -> np.ndarray:
    x, nrm2 = _check_nonzero(x)
    hx = inst.H @ x
    return 2.0 * (hx - (x @ hx / nrm2) * x) / nrm2


def _normalize_linearize(x):
    x, nrm2 = _check_nonzero(x)
    z = np.sqrt(nrm2)
    y = x / z

    def jvp(v):
        return (v - y * (y @ v)) / z

    # J is symmetric
    return y, jvp, jvp


def normalized_vector_map(n: int) -> ReferenceMap:
    return ReferenceMap(
        dim_x=n,
        dim_y=n,
        eval=lambda x: _normalize_linearize(x)[0],
        jvp=lambda x, v: _normalize_linearize(x)[1](v),
        vjp=lambda x, w: _normalize_linearize(x)[2](w),
        linearize=_normalize_linearize,
    )


def rayleigh_regularization(inst: RayleighInstance, power_iters: int = 300, seed: int = 0) -> HessianRegularization:
    """Shift from a power-iteration estimate of ``lambda_min(H)``."""
    est = estimate_min_eigenvalue(lambda u: inst.H @ u, inst.n, power_iters, seed)
    return HessianRegularization(est, power_iters)


def rayleigh_hessian_reference(inst: RayleighInstance, reg: HessianRegularization):
    return hessian_reference(lambda y, u: inst.H @ u, reg)


def rayleigh_pullback_metric(x, inst: RayleighInstance, reg: HessianRegularization, ridge: float = 0.0) -> MetricOperator:
    """``v -> J^T (H + eps I) J v`` with ``J = (I - Y Y^T) / |x|``."""
    return pullback_metric(normalized_vector_map(inst.n), rayleigh_hessian_reference(inst, reg), x, ridge)


def born_probability_model(x):
    """Born weights ``x_s^2 / Z^2`` and their log-derivatives."""
    x, nrm2 = _check_nonzero(x)
    if np.any(x == 0):
        raise ValueError("log-derivative undefined where x_s = 0")
    p = x * x / nrm2
    dlogp = 2.0 * np.diag(1.0 / x) - (2.0 / nrm2) * x[None, :]
    return p, dlogp


def rayleigh_fisher_metric(x, inst: RayleighInstance) -> MetricOperator:
    return fisher_metric(born_probability_model, x)


def reference_gradient(x, inst: RayleighInstance) -> np.ndarray:
    """Gradient of ``Y^T H Y`` in reference coordinates."""
    y = _normalize_linearize(x)[0]
    return 2.0 * inst.H @ y


def random_start(n: int, seed: int) -> np.ndarray:
    """Uniform point on the unit sphere."""
    v = np.random.default_rng(seed).standard_normal(n)
    return v / np.linalg.norm(v)


def make_problem(inst: RayleighInstance, power_iters: int = 300, min_cost=None) -> Problem:
    info = {}

    def pullback_factory(x0, seed):
        reg = rayleigh_regularization(inst, power_iters, seed)
        info["epsilon_h_estimate"] = reg.epsilon_h_estimate
        info["epsilon"] = reg.epsilon
        return lambda x: rayleigh_pullback_metric(x, inst, reg)

    return Problem(
        cost=lambda x: rayleigh_cost(x, inst),
        gradient=lambda x: rayleigh_gradient(x, inst),
        metrics={
            "rayleigh_pullback": pullback_factory,
            "fisher": lambda x0, seed: lambda x: rayleigh_fisher_metric(x, inst),
            "identity": lambda x0, seed: lambda x: identity_operator(inst.n),
        },
        min_cost=min_cost,
        name="rayleigh",
        info=info,
    )
