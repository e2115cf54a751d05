"""Classical Heisenberg antiferromagnet on a square lattice.

Parameters are unnormalized spin vectors ``S_i``; the cost only sees the unit
vectors ``S_i / |S_i|``, which form the reference space.  In those coordinates
the cost is quadratic with a constant Hessian (the scaled adjacency operator).
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
    hessian_reference,
    identity_operator,
    pullback_metric,
)
from .optim import Problem

log = logging.getLogger(__name__)

MIN_SPIN_NORM = 1e-8


@dataclass(frozen=True)
class SpinLattice:
    """Lattice geometry; spin configurations travel separately as flat vectors.

    A flat vector of length ``3 N`` holds site ``(ix, iy)`` at rows
    ``iy * width + ix`` of its ``(N, 3)`` reshape.
    """

    width: int
    height: int
    periodic: bool = True

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("lattice dimensions must be positive")

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    @property
    def dim(self) -> int:
        return 3 * self.n_sites

    def grid(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} spin components, got {x.shape}")
        return x.reshape(self.height, self.width, 3)

    def neighbor_sum(self, u) -> np.ndarray:
        """``sum_{j in nbr(i)} u_j`` per site, on a ``(H, W, 3)`` field."""
        if self.periodic:
            return (
                np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0)
                + np.roll(u, 1, axis=1) + np.roll(u, -1, axis=1)
            )
        out = np.zeros_like(u)
        out[1:] += u[:-1]
        out[:-1] += u[1:]
        out[:, 1:] += u[:, :-1]
        out[:, :-1] += u[:, 1:]
        return out

    def bond_sum(self, y) -> float:
        """``sum_<ij> y_i . y_j`` over horizontal and vertical bonds."""
        if self.periodic:
            return float(
                np.sum(y * np.roll(y, -1, axis=1)) + np.sum(y * np.roll(y, -1, axis=0))
            )
        return float(np.sum(y[:, :-1] * y[:, 1:]) + np.sum(y[:-1] * y[1:]))

    def neel(self) -> np.ndarray:
        iy, ix = np.indices((self.height, self.width))
        sign = np.where((ix + iy) % 2 == 0, 1.0, -1.0)
        s = np.zeros((self.height, self.width, 3))
        s[..., 2] = sign
        return s.ravel()

    def random_spins(self, seed: int) -> np.ndarray:
        """I.i.d. standard normal 3-vectors, redrawing any shorter than 1e-8."""
        rng = np.random.default_rng(seed)
        s = rng.standard_normal((self.n_sites, 3))
        short = np.linalg.norm(s, axis=1) < MIN_SPIN_NORM
        while np.any(short):
            s[short] = rng.standard_normal((int(short.sum()), 3))
            short = np.linalg.norm(s, axis=1) < MIN_SPIN_NORM
        return s.ravel()

    def dump(self, x, path) -> None:
        """One line per site: ``ix iy Sx Sy Sz``."""
        g = self.grid(x)
        lines = [
            f"{ix} {iy} " + " ".join(repr(float(v)) for v in g[iy, ix])
            for iy in range(self.height)
            for ix in range(self.width)
        ]
        Path(path).write_text("\n".join(lines) + "\n")

    def load(self, path) -> np.ndarray:
        g = np.zeros((self.height, self.width, 3))
        for line in Path(path).read_text().splitlines():
            if line.strip():
                ix, iy, *s = line.split()
                g[int(iy), int(ix)] = [float(v) for v in s]
        return g.ravel()


def _unit(lattice: SpinLattice, x):
    s = lattice.grid(x)
    norms = np.linalg.norm(s, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-length spin")
    return s / norms, norms


def spin_cost(lattice: SpinLattice, x) -> float:
    y, _ = _unit(lattice, x)
    return lattice.bond_sum(y) / lattice.n_sites


def spin_gradient(lattice: SpinLattice, x) -> np.ndarray:
    y, norms = _unit(lattice, x)
    h = lattice.neighbor_sum(y) / lattice.n_sites
    g = (h - y * np.sum(y * h, axis=-1, keepdims=True)) / norms
    return g.ravel()


def _normalization_linearize(lattice: SpinLattice):
    def linearize(x):
        y, norms = _unit(lattice, x)

        def jvp(v):
            v = v.reshape(y.shape)
            return ((v - y * np.sum(y * v, axis=-1, keepdims=True)) / norms).ravel()

        # per-site blocks (I - y y^T) / |S| are symmetric
        return y.ravel(), jvp, jvp

    return linearize


def spin_normalization_map(lattice: SpinLattice) -> ReferenceMap:
    lin = _normalization_linearize(lattice)
    return ReferenceMap(
        dim_x=lattice.dim,
        dim_y=lattice.dim,
        eval=lambda x: lin(x)[0],
        jvp=lambda x, v: lin(x)[1](v),
        vjp=lambda x, w: lin(x)[2](w),
        linearize=lin,
    )


def reference_hessian_apply(lattice: SpinLattice, u) -> np.ndarray:
    """Constant Hessian of ``(1/N) sum_<ij> Y_i . Y_j``: adjacency / N per component."""
    u = np.asarray(u, dtype=float).reshape(lattice.height, lattice.width, 3)
    return (lattice.neighbor_sum(u) / lattice.n_sites).ravel()


def reference_gradient(lattice: SpinLattice, x) -> np.ndarray:
    y, _ = _unit(lattice, x)
    return (lattice.neighbor_sum(y) / lattice.n_sites).ravel()


def spin_regularization(lattice: SpinLattice, power_iters: int = 100, seed: int = 0) -> HessianRegularization:
    """Exact ``-4/N`` for periodic even lattices, power iteration otherwise."""
    if lattice.periodic and lattice.width % 2 == 0 and lattice.height % 2 == 0:
        est = -4.0 / lattice.n_sites
        log.info("spin eps_H analytic: %r", est)
    else:
        est = estimate_min_eigenvalue(
            lambda u: reference_hessian_apply(lattice, u), lattice.dim, power_iters, seed
        )
        log.info("spin eps_H by power iteration: %r", est)
    return HessianRegularization(est, power_iters)


def spin_hessian_reference_apply(lattice: SpinLattice, u, reg: HessianRegularization) -> np.ndarray:
    return reference_hessian_apply(lattice, u) + reg.epsilon * np.asarray(u, dtype=float)


def spin_pullback_metric(lattice: SpinLattice, x, reg: HessianRegularization, ridge: float = 0.0) -> MetricOperator:
    ref = hessian_reference(lambda y, u: reference_hessian_apply(lattice, u), reg)
    return pullback_metric(spin_normalization_map(lattice), ref, x, ridge)


def min_cost(lattice: SpinLattice):
    """Neel energy ``-2`` when it is the exact ground state, else None."""
    if lattice.periodic and lattice.width % 2 == 0 and lattice.height % 2 == 0:
        return -2.0
    return None


def make_problem(lattice: SpinLattice, power_iters: int = 100) -> Problem:
    info = {}

    def pullback_factory(x0, seed):
        reg = spin_regularization(lattice, power_iters, seed)
        info["epsilon_h_estimate"] = reg.epsilon_h_estimate
        info["epsilon"] = reg.epsilon
        return lambda x: spin_pullback_metric(lattice, x, reg)

    return Problem(
        cost=lambda x: spin_cost(lattice, x),
        gradient=lambda x: spin_gradient(lattice, x),
        metrics={
            "spin_pullback": pullback_factory,
            "identity": lambda x0, seed: lambda x: identity_operator(lattice.dim),
        },
        min_cost=min_cost(lattice),
        name="spin",
        info=info,
    )
