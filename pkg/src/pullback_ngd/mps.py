"""Least-squares reconstruction of two-site density matrices with a real MPS.

Conventions
-----------
Boundary tensors are stored as ``(2, D)`` and interior ones as ``(2, D, D)``,
concatenated in site order to form the flat parameter vector.  Internally every
tensor is viewed as ``(2, Dl, Dr)`` with ``Dl = 1`` on the first site and
``Dr = 1`` on the last, so all contractions look the same.

Environment matrices carry the bra index first: ``E[a, b]`` with ``a`` from the
bra copy of the state and ``b`` from the ket copy.  Two-site density matrices
are indexed ``rho[(s t), (u v)]`` with ``(s, t)`` the bra physical indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import List

import numpy as np

from .metric import (
    HessianRegularization,
    MetricOperator,
    ReferenceMap,
    estimate_min_eigenvalue,
    euclidean_reference,
    hessian_reference,
    identity_operator,
    pullback_metric,
)
from .optim import Problem

DENSE_MAX_LENGTH = 14


# -- layout -------------------------------------------------------------------


@dataclass(frozen=True)
class MPSLayout:
    length: int
    bond_dim: int

    def __post_init__(self):
        if self.length < 3:
            raise ValueError("MPS length must be at least 3")
        if self.bond_dim < 1:
            raise ValueError("bond dimension must be at least 1")

    @cached_property
    def shapes(self):
        D = self.bond_dim
        inner = [(2, D, D)] * (self.length - 2)
        return [(2, 1, D)] + inner + [(2, D, 1)]

    @cached_property
    def offsets(self):
        sizes = [int(np.prod(s)) for s in self.shapes]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def n_params(self) -> int:
        return 2 * 2 * self.bond_dim + (self.length - 2) * 2 * self.bond_dim**2

    def split(self, x) -> List[np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} MPS parameters, got {x.shape}")
        o = self.offsets
        return [x[o[k]:o[k + 1]].reshape(s) for k, s in enumerate(self.shapes)]

    def join(self, tensors) -> np.ndarray:
        return np.concatenate([np.asarray(t, dtype=float).ravel() for t in tensors])


@dataclass(frozen=True, eq=False)
class MPSState:
    """Open-boundary real MPS: ``tensors[0]``/``tensors[-1]`` are ``(2, D)``."""

    tensors: tuple

    def __post_init__(self):
        ts = tuple(np.asarray(t, dtype=float) for t in self.tensors)
        if len(ts) < 3:
            raise ValueError("MPS length must be at least 3")
        D = ts[0].shape[-1]
        want = [(2, D)] + [(2, D, D)] * (len(ts) - 2) + [(2, D)]
        for k, (t, w) in enumerate(zip(ts, want)):
            if t.shape != w:
                raise ValueError(f"tensor {k} has shape {t.shape}, expected {w}")
            if not np.all(np.isfinite(t)):
                raise ValueError(f"tensor {k} has non-finite entries")
        object.__setattr__(self, "tensors", ts)

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def bond_dim(self) -> int:
        return self.tensors[0].shape[-1]

    @property
    def layout(self) -> MPSLayout:
        return MPSLayout(self.length, self.bond_dim)

    def to_vector(self) -> np.ndarray:
        return self.layout.join(self.tensors)

    @classmethod
    def from_vector(cls, layout: MPSLayout, x) -> "MPSState":
        parts = layout.split(x)
        parts[0] = parts[0][:, 0, :]
        parts[-1] = parts[-1][:, :, 0]
        return cls(tuple(p.copy() for p in parts))

    @classmethod
    def random(cls, length: int, bond_dim: int, seed: int = 0) -> "MPSState":
        """Entries i.i.d. normal with standard deviation ``1/sqrt(D)``."""
        layout = MPSLayout(length, bond_dim)
        rng = np.random.default_rng(seed)
        x = rng.normal(0.0, 1.0 / np.sqrt(bond_dim), layout.n_params)
        return cls.from_vector(layout, x)


# -- contractions ---------------------------------------------------------------


def _left(E, B, C):
    """``sum_s B[s]^T E C[s]``: extend a left environment by one site."""
    return (B.transpose(0, 2, 1) @ E @ C).sum(axis=0)


def _right(B, C, F):
    """``sum_s B[s] F C[s]^T``: extend a right environment by one site."""
    return (B @ F @ C.transpose(0, 2, 1)).sum(axis=0)


def _two_site(A, B):
    return np.tensordot(A, B, axes=(2, 1)).transpose(0, 2, 1, 3)


def _sandwich(E, block, F):
    """``E block F^T`` on the bond indices of a two-site block."""
    return E @ block @ F.T


def _bond_matrix(E, bra, ket, F):
    """Unnormalized two-site matrix ``N[(s t), (u v)]`` between bra and ket blocks."""
    return bra.reshape(4, -1) @ _sandwich(E, ket, F).reshape(4, -1).T


def _apply_op(S, block):
    """Two-site operator (4x4) acting on the physical legs of a block."""
    return (S @ block.reshape(4, -1)).reshape(block.shape)


def _dense_amplitudes(As):
    p = np.ones((1, 1))
    for A in As:
        p = np.einsum("la,sab->lsb", p, A).reshape(-1, A.shape[2])
    return p[:, 0]


class MPSLinearization:
    """Cached environments of an MPS at a fixed parameter vector.

    Provides the two-site density matrices and their Jacobian products, plus
    the Gram operator of the unnormalized amplitude map, all in ``O(L D^3)``
    per call without touching the ``2^L`` amplitudes.
    """

    def __init__(self, layout: MPSLayout, x):
        self.layout = layout
        self.L = layout.length
        A = layout.split(x)
        self.A = A
        L = self.L
        E = [np.ones((1, 1))]
        for k in range(L):
            E.append(_left(E[k], A[k], A[k]))
        F = [None] * (L + 1)
        F[L] = np.ones((1, 1))
        for k in range(L - 1, -1, -1):
            F[k] = _right(A[k], A[k], F[k + 1])
        self.E, self.F = E, F
        self.z2 = float(E[L][0, 0])
        if not self.z2 > 0:
            raise ValueError("MPS has zero norm")
        self.theta = [_two_site(A[i], A[i + 1]) for i in range(L - 1)]
        self.N = [_bond_matrix(E[i], th, th, F[i + 2]) for i, th in enumerate(self.theta)]

    @cached_property
    def rdms(self) -> List[np.ndarray]:
        return [n / self.z2 for n in self.N]

    def rdm_jvp(self, v) -> List[np.ndarray]:
        A, E, F, L = self.A, self.E, self.F, self.L
        V = self.layout.split(v)
        Ed = [np.zeros((1, 1))]
        for k in range(L - 1):
            Ed.append(_left(Ed[k], A[k], A[k]) + _left(E[k], V[k], A[k]))
        Fd = [None] * (L + 1)
        Fd[L] = np.zeros((1, 1))
        for k in range(L - 1, 1, -1):
            Fd[k] = _right(A[k], A[k], Fd[k + 1]) + _right(V[k], A[k], F[k + 1])
        out = []
        dz2 = None
        for i, th in enumerate(self.theta):
            dth = _two_site(V[i], A[i + 1]) + _two_site(A[i], V[i + 1])
            M = (
                _bond_matrix(Ed[i], th, th, F[i + 2])
                + _bond_matrix(E[i], dth, th, F[i + 2])
                + _bond_matrix(E[i], th, th, Fd[i + 2])
            )
            if dz2 is None:
                dz2 = 2.0 * np.trace(M)
            out.append((M + M.T - self.rdms[i] * dz2) / self.z2)
        return out

    def rdm_vjp(self, W) -> np.ndarray:
        """Gradient of ``sum_i <W_i, rho_i>`` with respect to the parameters."""
        A, E, F, L, z2 = self.A, self.E, self.F, self.L, self.z2
        S = []
        for w, rho in zip(W, self.rdms):
            w = np.asarray(w, dtype=float).reshape(4, 4)
            S.append((w + w.T) / z2 - (2.0 * np.sum(w * rho) / z2) * np.eye(4))
        # Q[i][s,t,a,c]: bond i with its bra two-site block removed
        Q = [
            _apply_op(S[i], _sandwich(E[i], th, F[i + 2])) for i, th in enumerate(self.theta)
        ]
        G = [np.zeros((1, 1)), np.zeros((A[1].shape[1],) * 2)]
        for k in range(1, L - 1):
            G.append(_left(G[k], A[k], A[k]) + self._closed_left(k - 1, S[k - 1]))
        K = [None] * (L + 1)
        K[L] = np.zeros((1, 1))
        K[L - 1] = np.zeros((A[L - 1].shape[1],) * 2)
        for k in range(L - 2, 0, -1):
            K[k] = _right(A[k], A[k], K[k + 1]) + self._closed_right(k, S[k])
        grads = []
        for k in range(L):
            g = np.zeros_like(A[k])
            if k >= 2:
                g += G[k] @ A[k] @ F[k + 1].T
            if k <= L - 3:
                g += E[k] @ A[k] @ K[k + 1].T
            if k <= L - 2:
                g += (Q[k] @ A[k + 1].transpose(0, 2, 1)).sum(axis=1)
            if k >= 1:
                g += (A[k - 1].transpose(0, 2, 1)[:, None] @ Q[k - 1]).sum(axis=0)
            grads.append(g)
        return self.layout.join(grads)

    def _closed_left(self, i, Si):
        # bond i fully contracted; open indices sit right of site i+1
        th = self.theta[i]
        return (th.transpose(0, 1, 3, 2) @ self.E[i] @ _apply_op(Si, th)).sum(axis=(0, 1))

    def _closed_right(self, i, Si):
        # bond i fully contracted; open indices sit left of site i
        th = self.theta[i]
        return (th @ self.F[i + 2] @ _apply_op(Si, th).transpose(0, 1, 3, 2)).sum(axis=(0, 1))

    def amplitude_gram(self, v) -> np.ndarray:
        """``J^T J v`` for the unnormalized amplitude map ``x -> W``."""
        A, E, F, L = self.A, self.E, self.F, self.L
        V = self.layout.split(v)
        Ed = [np.zeros((1, 1))]
        for k in range(L - 1):
            Ed.append(_left(Ed[k], A[k], A[k]) + _left(E[k], A[k], V[k]))
        Fd = [None] * (L + 1)
        Fd[L] = np.zeros((1, 1))
        for k in range(L - 1, 0, -1):
            Fd[k] = _right(A[k], A[k], Fd[k + 1]) + _right(A[k], V[k], F[k + 1])
        grads = []
        for k in range(L):
            g = Ed[k] @ A[k] @ F[k + 1].T
            g += E[k] @ V[k] @ F[k + 1].T
            g += E[k] @ A[k] @ Fd[k + 1].T
            grads.append(g)
        return self.layout.join(grads)

# -- dense Hilbert-space maps (small L only) -----------------------------------


def _check_dense(length: int) -> None:
    if length > DENSE_MAX_LENGTH:
        raise ValueError(
            f"dense 2^L representation limited to L <= {DENSE_MAX_LENGTH}, got L={length}"
        )


class DenseAmplitudes:
    """Amplitudes ``W_s`` with left/right partial products for JVP/VJP.

    Bit strings are ordered with site 1 as the most significant bit.
    """

    def __init__(self, layout: MPSLayout, x):
        _check_dense(layout.length)
        self.layout = layout
        A = layout.split(x)
        L = layout.length
        left = [np.ones((1, 1))]
        for k in range(L):
            left.append(np.einsum("la,sab->lsb", left[k], A[k]).reshape(-1, A[k].shape[2]))
        right = [None] * (L + 1)
        right[L] = np.ones((1, 1))
        for k in range(L - 1, -1, -1):
            right[k] = np.einsum("sab,br->asr", A[k], right[k + 1]).reshape(A[k].shape[1], -1)
        self.left, self.right = left, right
        self.psi = left[L][:, 0]

    def jvp(self, v) -> np.ndarray:
        V = self.layout.split(v)
        out = np.zeros_like(self.psi)
        for k, Vk in enumerate(V):
            out += np.einsum("la,sab,br->lsr", self.left[k], Vk, self.right[k + 1]).ravel()
        return out

    def vjp(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        grads = []
        for k, shape in enumerate(self.layout.shapes):
            wk = w.reshape(self.left[k].shape[0], 2, self.right[k + 1].shape[1])
            grads.append(np.einsum("la,lsr,br->sab", self.left[k], wk, self.right[k + 1]))
        return self.layout.join(grads)


def mps_amplitudes(state: MPSState) -> np.ndarray:
    """All ``2^L`` amplitudes by sequential matrix products."""
    _check_dense(state.length)
    return _dense_amplitudes(state.layout.split(state.to_vector()))


def amplitude_map(layout: MPSLayout) -> ReferenceMap:
    """``x -> W`` (unnormalized amplitudes), dense."""

    def linearize(x):
        d = DenseAmplitudes(layout, x)
        return d.psi, d.jvp, d.vjp

    return ReferenceMap(
        dim_x=layout.n_params,
        dim_y=2**layout.length,
        eval=lambda x: linearize(x)[0],
        jvp=lambda x, v: linearize(x)[1](v),
        vjp=lambda x, w: linearize(x)[2](w),
        linearize=linearize,
    )


def hilbert_map(layout: MPSLayout) -> ReferenceMap:
    """``x -> W / Z`` (normalized amplitudes), dense."""

    def linearize(x):
        d = DenseAmplitudes(layout, x)
        psi = d.psi
        z = np.linalg.norm(psi)
        y = psi / z

        def jvp(v):
            dpsi = d.jvp(v)
            return (dpsi - y * (y @ dpsi)) / z

        def vjp(u):
            return d.vjp((u - y * (y @ u)) / z)

        return y, jvp, vjp

    return ReferenceMap(
        dim_x=layout.n_params,
        dim_y=2**layout.length,
        eval=lambda x: linearize(x)[0],
        jvp=lambda x, v: linearize(x)[1](v),
        vjp=lambda x, w: linearize(x)[2](w),
        linearize=linearize,
    )


def density_map(layout: MPSLayout) -> ReferenceMap:
    """``x -> (rho_1, ..., rho_{L-1})`` flattened to ``16 (L-1)`` entries."""

    def linearize(x):
        lin = MPSLinearization(layout, x)
        y = np.concatenate([r.ravel() for r in lin.rdms])

        def jvp(v):
            return np.concatenate([r.ravel() for r in lin.rdm_jvp(v)])

        def vjp(w):
            return lin.rdm_vjp(np.asarray(w, dtype=float).reshape(-1, 4, 4))

        return y, jvp, vjp

    return ReferenceMap(
        dim_x=layout.n_params,
        dim_y=16 * (layout.length - 1),
        eval=lambda x: linearize(x)[0],
        jvp=lambda x, v: linearize(x)[1](v),
        vjp=lambda x, w: linearize(x)[2](w),
        linearize=linearize,
    )


# -- two-site operators on dense vectors ----------------------------------------


def _split_bond(y, length, i):
    return y.reshape(2**i, 4, 2 ** (length - i - 2))


def dense_bond_matrix(bra, ket, length, i) -> np.ndarray:
    """``N[(s t), (u v)] = sum_rest bra[.. s t ..] ket[.. u v ..]`` for sites ``i, i+1``."""
    return np.einsum("lsr,lur->su", _split_bond(bra, length, i), _split_bond(ket, length, i))


def _apply_bond(op, y, length, i):
    return np.einsum("su,lur->lsr", op, _split_bond(y, length, i)).ravel()


def dense_rdms(psi, length) -> List[np.ndarray]:
    psi = np.asarray(psi, dtype=float)
    z2 = psi @ psi
    return [dense_bond_matrix(psi, psi, length, i) / z2 for i in range(length - 1)]


# -- reference cost on normalized amplitudes -------------------------------------


@dataclass(frozen=True, eq=False)
class TargetData:
    targets: tuple
    noise_amplitude: float = 0.0
    source_seed: int = 0

    def __post_init__(self):
        ts = tuple(np.asarray(t, dtype=float).reshape(4, 4) for t in self.targets)
        object.__setattr__(self, "targets", ts)

    @property
    def length(self) -> int:
        return len(self.targets) + 1

    def write(self, path) -> None:
        """Line 1 ``L noise seed``, then one block of 16 reals per bond."""
        lines = [f"{self.length} {float(self.noise_amplitude)!r} {int(self.source_seed)}"]
        for t in self.targets:
            lines.append(" ".join(repr(float(v)) for v in t.ravel()))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "TargetData":
        tokens = Path(path).read_text().split()
        if len(tokens) < 3:
            raise ValueError("target file header must be 'L noise_amplitude seed'")
        length, amp, seed = int(tokens[0]), float(tokens[1]), int(tokens[2])
        vals = [float(t) for t in tokens[3:]]
        if len(vals) != 16 * (length - 1):
            raise ValueError(f"expected {16 * (length - 1)} matrix entries, found {len(vals)}")
        mats = np.array(vals).reshape(length - 1, 4, 4)
        return cls(tuple(mats), amp, seed)


class QuarticReference:
    """``Lbar(Y) = (1/L) sum_i |N_i(Y, Y) - T_i|_F^2`` on the amplitude space."""

    def __init__(self, data: TargetData):
        self.data = data
        self.length = data.length
        _check_dense(self.length)

    def _residuals(self, y):
        return [
            dense_bond_matrix(y, y, self.length, i) - t
            for i, t in enumerate(self.data.targets)
        ]

    def value(self, y) -> float:
        return sum(float(np.sum(r * r)) for r in self._residuals(y)) / self.length

    def gradient(self, y) -> np.ndarray:
        out = np.zeros_like(y)
        for i, r in enumerate(self._residuals(y)):
            out += _apply_bond(0.5 * (r + r.T), y, self.length, i)
        return (4.0 / self.length) * out

    def hessian_apply(self, y, u) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(y)
        for i, r in enumerate(self._residuals(y)):
            dn = dense_bond_matrix(u, y, self.length, i)
            dn = dn + dn.T
            out += _apply_bond(0.5 * (r + r.T), u, self.length, i)
            out += _apply_bond(dn, y, self.length, i)
        return (4.0 / self.length) * out


# -- cost and gradient ----------------------------------------------------------


def _check_data(layout: MPSLayout, data: TargetData):
    if data.length != layout.length:
        raise ValueError(f"targets are for L={data.length}, state has L={layout.length}")


def reduced_density_matrix(state: MPSState, i: int) -> np.ndarray:
    """Two-site density matrix of sites ``i, i+1`` (1-based bond index)."""
    if not 1 <= i <= state.length - 1:
        raise IndexError(f"bond index {i} outside 1..{state.length - 1}")
    return MPSLinearization(state.layout, state.to_vector()).rdms[i - 1]


def lsm_cost_vec(layout: MPSLayout, x, data: TargetData) -> float:
    _check_data(layout, data)
    lin = MPSLinearization(layout, x)
    return sum(float(np.sum((r - t) ** 2)) for r, t in zip(lin.rdms, data.targets)) / layout.length


def lsm_gradient_vec(layout: MPSLayout, x, data: TargetData) -> np.ndarray:
    _check_data(layout, data)
    lin = MPSLinearization(layout, x)
    W = [(2.0 / layout.length) * (r - t) for r, t in zip(lin.rdms, data.targets)]
    return lin.rdm_vjp(W)


def lsm_cost(state: MPSState, data: TargetData) -> float:
    return lsm_cost_vec(state.layout, state.to_vector(), data)


def lsm_gradient(state: MPSState, data: TargetData) -> np.ndarray:
    return lsm_gradient_vec(state.layout, state.to_vector(), data)


def density_reference_gradient(layout: MPSLayout, x, data: TargetData) -> np.ndarray:
    """Gradient of the quadratic cost in density-matrix coordinates."""
    lin = MPSLinearization(layout, x)
    return np.concatenate(
        [((2.0 / layout.length) * (r - t)).ravel() for r, t in zip(lin.rdms, data.targets)]
    )


# -- metrics --------------------------------------------------------------------


def metric_density_reference(layout: MPSLayout, x, ridge: float = 0.0) -> MetricOperator:
    """Pullback of the identity on density-matrix space."""
    lin = MPSLinearization(layout, x)

    def matvec(v):
        return lin.rdm_vjp(lin.rdm_jvp(v))

    return MetricOperator(matvec, layout.n_params, ridge, {"kind": "density"})


def metric_hilbert_identity(layout: MPSLayout, x, ridge: float = 0.0) -> MetricOperator:
    _check_dense(layout.length)
    op = pullback_metric(hilbert_map(layout), euclidean_reference(), x, ridge)
    op.info["kind"] = "hilbert_identity"
    return op


def hilbert_regularization(layout: MPSLayout, x, data: TargetData, power_iters: int = 100, seed: int = 0) -> HessianRegularization:
    quartic = QuarticReference(data)
    y = hilbert_map(layout).eval(x)
    est = estimate_min_eigenvalue(lambda u: quartic.hessian_apply(y, u), y.size, power_iters, seed)
    return HessianRegularization(est, power_iters)


def metric_hilbert_hessian(layout: MPSLayout, x, data: TargetData, reg: HessianRegularization, ridge: float = 0.0) -> MetricOperator:
    quartic = QuarticReference(data)
    ref = hessian_reference(quartic.hessian_apply, reg)
    op = pullback_metric(hilbert_map(layout), ref, x, ridge)
    op.info["kind"] = "hilbert_hessian"
    return op


def metric_mps_amplitude(layout: MPSLayout, x, ridge: float = 0.0) -> MetricOperator:
    """``v -> J^T J v`` for unnormalized amplitudes, by environment contraction."""
    lin = MPSLinearization(layout, x)
    return MetricOperator(lin.amplitude_gram, layout.n_params, ridge, {"kind": "mps_amplitude"})


# -- target data ------------------------------------------------------------------

_HEISENBERG_BOND = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 2.0, 0.0],
        [0.0, 2.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


def heisenberg_apply(psi, length) -> np.ndarray:
    """Open-chain ``sum_i X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1}`` on a dense vector."""
    out = np.zeros_like(psi)
    for i in range(length - 1):
        out += _apply_bond(_HEISENBERG_BOND, psi, length, i)
    return out


def heisenberg_ground_state(length: int, seed: int = 0, tol: float = 1e-10, max_iters: int = 200_000) -> np.ndarray:
    """Ground state by power iteration on ``shift I - H`` with ``shift = 3 (L-1)``."""
    _check_dense(length)
    if length < 2:
        raise ValueError("need at least two sites")
    shift = 3.0 * (length - 1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**length)
    v /= np.linalg.norm(v)
    for it in range(max_iters):
        hv = heisenberg_apply(v, length)
        energy = v @ hv
        if np.linalg.norm(hv - energy * v) <= tol:
            return v
        w = shift * v - hv
        v = w / np.linalg.norm(w)
    raise RuntimeError(f"ground-state iteration did not converge in {max_iters} steps")


def generate_target_data(length: int, noise_amplitude: float = 0.1, seed: int = 0) -> TargetData:
    """Exact ground-state two-site RDMs plus symmetrized uniform noise."""
    if noise_amplitude < 0:
        raise ValueError("noise amplitude must be nonnegative")
    psi = heisenberg_ground_state(length, seed)
    rdms = dense_rdms(psi, length)
    rng = np.random.default_rng(seed + 1)
    noisy = []
    for r in rdms:
        t = r + rng.uniform(-noise_amplitude, noise_amplitude, (4, 4))
        noisy.append(0.5 * (t + t.T))
    return TargetData(tuple(noisy), noise_amplitude, seed)


# -- problem ------------------------------------------------------------------------


def make_problem(layout: MPSLayout, data: TargetData, power_iters: int = 100) -> Problem:
    _check_data(layout, data)
    info = {}

    def hessian_factory(x0, seed):
        reg = hilbert_regularization(layout, x0, data, power_iters, seed)
        info["epsilon_h_estimate"] = reg.epsilon_h_estimate
        info["epsilon"] = reg.epsilon
        return lambda x: metric_hilbert_hessian(layout, x, data, reg)

    metrics = {
        "density": lambda x0, seed: lambda x: metric_density_reference(layout, x),
        "mps_amplitude": lambda x0, seed: lambda x: metric_mps_amplitude(layout, x),
        "identity": lambda x0, seed: lambda x: identity_operator(layout.n_params),
    }
    if layout.length <= DENSE_MAX_LENGTH:
        metrics["hilbert_identity"] = lambda x0, seed: lambda x: metric_hilbert_identity(layout, x)
        metrics["hilbert_hessian"] = hessian_factory

    return Problem(
        cost=lambda x: lsm_cost_vec(layout, x, data),
        gradient=lambda x: lsm_gradient_vec(layout, x, data),
        metrics=metrics,
        min_cost=None,
        name="mps_lsm",
        info=info,
    )
