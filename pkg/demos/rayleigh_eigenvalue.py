"""Smallest eigenvalue of a random symmetric matrix, four ways."""

import numpy as np

from pullback_ngd import OptimizerConfig, RayleighInstance, optimize
from pullback_ngd.rayleigh import make_problem, random_start

# A 120 x 120 symmetrized Gaussian matrix; numpy supplies the reference answer.
inst = RayleighInstance.random(120, seed=3)
lam = np.linalg.eigvalsh(inst.H)[0]
problem = make_problem(inst, min_cost=lam)
x0 = random_start(inst.n, seed=4)
print(f"lambda_min = {lam:.12f}")

# The cost x^T H x / x^T x only sees the direction of x.  On the unit sphere
# Y = x/|x| it is the quadratic Y^T H Y, so its Hessian H (shifted to be
# positive definite) is a natural reference metric.  The Fisher metric of the
# Born weights x_s^2/|x|^2 is the other candidate.
runs = {
    "gradient descent": OptimizerConfig("gd", 1500),
    "nonlinear CG": OptimizerConfig("nonlinear_cg", 1500),
    "NGD, Hessian pullback": OptimizerConfig("ngd", 1500, metric_id="rayleigh_pullback"),
    "NGD, Fisher": OptimizerConfig("ngd", 1500, metric_id="fisher"),
}


def steps_to(trace, tol):
    for r in trace.records:
        if abs((r.cost - lam) / lam) <= tol:
            return r.iteration
    return None


print(f"{'method':<24}{'to 1e-3':>9}{'to 1e-6':>9}{'to 1e-10':>10}")
for name, cfg in runs.items():
    tr = optimize(problem, x0, cfg)
    print(f"{name:<24}" + "".join(f"{str(steps_to(tr, t)):>9}" for t in (1e-3, 1e-6)) + f"{str(steps_to(tr, 1e-10)):>10}")

# The Fisher run tracks gradient descent step for step: on the tangent space
# of the sphere the Fisher operator is a multiple of the identity, and the
# line search normalizes the direction anyway.
print("eps used by the Hessian pullback:", problem.info["epsilon"])
