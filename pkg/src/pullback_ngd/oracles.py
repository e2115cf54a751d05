"""Brute-force reference computations used to cross-check the fast paths.

Everything here is deliberately naive and size-guarded.  Nothing in this
module calls the matrix-free operators or the iterative solvers it is meant
to validate.
"""

from __future__ import annotations

import numpy as np

from .metric import ReferenceMap, ReferenceMetric

DENSE_GUARD = 200
PINV_RCOND = 1e-12


class GuardExceeded(ValueError):
    pass


def _guard(n, what, limit=DENSE_GUARD):
    if n > limit:
        raise GuardExceeded(f"{what} = {n} exceeds dense oracle limit {limit}")


def finite_difference_gradient(cost, x, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(L(x + h e_i) - L(x - h e_i)) / 2h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = cost(xp), cost(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite cost near coordinate {i}")
        out[i] = (fp - fm) / (2 * h)
    return out


def finite_difference_jacobian(fmap: ReferenceMap, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fmap.eval(x + e) - fmap.eval(x - e)) / (2 * h))
    return np.column_stack(cols)


def dense_jacobian(fmap: ReferenceMap, x) -> np.ndarray:
    """``J`` assembled column by column from ``jvp`` on basis vectors."""
    _guard(fmap.dim_x, "dim_x")
    eye = np.eye(fmap.dim_x)
    return np.column_stack([fmap.jvp(x, eye[:, i]) for i in range(fmap.dim_x)])


def dense_reference_metric(ref_metric: ReferenceMetric, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    eye = np.eye(y.size)
    return np.column_stack([ref_metric.apply(y, eye[:, i]) for i in range(y.size)])


def assemble_dense_metric(fmap: ReferenceMap, ref_metric: ReferenceMetric, x, check_tol: float = 1e-10) -> np.ndarray:
    """``J^T G_Y J`` built literally from dense factors."""
    _guard(fmap.dim_x, "dim_x")
    J = dense_jacobian(fmap, x)
    GY = dense_reference_metric(ref_metric, fmap.eval(x))
    G = J.T @ GY @ J
    scale = max(np.abs(G).max(), 1.0)
    if np.abs(G - G.T).max() > check_tol * scale:
        raise ValueError("assembled metric is not symmetric; reference metric is asymmetric")
    return G


def adjoint_defect(fmap: ReferenceMap, x, trials: int = 100, seed: int = 0) -> float:
    """Largest ``|w.(Jv) - (J^T w).v| / (|v| |w|)`` over random pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(fmap.dim_x)
        w = rng.standard_normal(fmap.dim_y)
        d = abs(w @ fmap.jvp(x, v) - fmap.vjp(x, w) @ v)
        worst = max(worst, d / (np.linalg.norm(v) * np.linalg.norm(w)))
    return worst


def range_basis(J, rcond: float = PINV_RCOND) -> np.ndarray:
    U, s, _ = np.linalg.svd(J, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    return U[:, s > rcond * s[0]]


def projection_operator(J, GY, cond_limit: float = 1e12) -> np.ndarray:
    """``G_Y``-orthogonal projector onto ``range(J)``.

    Raises when the restricted metric ``B^T G_Y B`` is singular, which is the
    full-rank assumption behind the projection identity.
    """
    B = range_basis(J)
    M = B.T @ GY @ B
    if B.shape[1] == 0:
        return np.zeros_like(GY)
    if np.linalg.cond(M) > cond_limit:
        raise np.linalg.LinAlgError(
            "P G_Y P is rank deficient on range(J): full-rank assumption violated"
        )
    return B @ np.linalg.solve(M, B.T @ GY)


def projection_identity_check(fmap: ReferenceMap, ref_metric: ReferenceMetric, x, grad_x, grad_y=None) -> float:
    """Collinearity defect between ``dy = J dx`` and ``-P G_Y^{-1} dLbar/dy``.

    ``dx = -(J^T G_Y J)^+ grad_x``.  When ``grad_y`` is omitted the minimum-norm
    solution of ``J^T grad_y = grad_x`` is used.  Returns
    ``| dy |Pd| + Pd |dy| | / (|dy| |Pd|)``, zero when ``dy`` is a positive
    multiple of ``-P d``.
    """
    _guard(fmap.dim_y, "dim_y")
    x = np.asarray(x, dtype=float)
    grad_x = np.asarray(grad_x, dtype=float)
    J = dense_jacobian(fmap, x)
    GY = dense_reference_metric(ref_metric, fmap.eval(x))
    if grad_y is None:
        grad_y = np.linalg.lstsq(J.T, grad_x, rcond=None)[0]
    grad_y = np.asarray(grad_y, dtype=float)
    if np.linalg.norm(J.T @ grad_y - grad_x) > 1e-8 * max(np.linalg.norm(grad_x), 1e-300):
        raise ValueError("grad_y is inconsistent with grad_x (J^T grad_y != grad_x)")

    GX = J.T @ GY @ J
    dx = -np.linalg.pinv(GX, rcond=PINV_RCOND, hermitian=True) @ grad_x
    dy = J @ dx
    P = projection_operator(J, GY)
    pd = P @ np.linalg.solve(GY, grad_y)
    n_dy, n_pd = np.linalg.norm(dy), np.linalg.norm(pd)
    if n_dy == 0.0 and n_pd == 0.0:
        return 0.0
    if n_dy == 0.0 or n_pd == 0.0:
        return float("inf")
    return float(np.linalg.norm(dy * n_pd + pd * n_dy) / (n_dy * n_pd))


def _round_robin(n):
    """Pairings covering every (p, q) once per sweep, in disjoint rounds."""
    players = list(range(n if n % 2 == 0 else n + 1))
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        rounds.append((np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def dense_symmetric_eigensolve(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi rotations; returns ascending eigenvalues and eigenvectors.

    Each sweep visits every off-diagonal pair once.  Pairs are grouped into
    rounds of disjoint index pairs so a round's rotations commute and can be
    applied together.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    n = A.shape[0]
    _guard(n, "n", 2000)
    scale = np.linalg.norm(A)
    if np.abs(A - A.T).max(initial=0.0) > 1e-12 * max(scale, 1.0):
        raise ValueError("A must be symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = tol * scale
    rounds = _round_robin(n)

    def off_norm():
        return np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))

    for _ in range(max_sweeps):
        if off_norm() <= target:
            break
        for p, q in rounds:
            apq = A[p, q]
            live = np.abs(apq) > 1e-300
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 1.0, theta)
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.where(safe >= 0, 1.0, -1.0) / (np.abs(safe) + np.sqrt(safe * safe + 1.0)),
            )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cp, cq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * cp - s * cq, s * cp + c * cq
            rp, rq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * rp - s[:, None] * rq, s[:, None] * rp + c[:, None] * rq
            A[p, q] = 0.0
            A[q, p] = 0.0
            vp, vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        if off_norm() > target:
            raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]
