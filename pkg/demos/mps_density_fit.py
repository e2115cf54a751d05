"""Fitting an MPS to noisy two-site density matrices of a Heisenberg chain."""

import numpy as np

from pullback_ngd import MPSLayout, MPSState, OptimizerConfig, optimize
from pullback_ngd.metric import CgSolverConfig
from pullback_ngd.mps import generate_target_data, make_problem, reduced_density_matrix

L, D = 8, 3
data = generate_target_data(L, noise_amplitude=0.1, seed=1)
layout = MPSLayout(L, D)
problem = make_problem(layout, data)
x0 = MPSState.random(L, D, seed=2).to_vector()

# The targets are exact ground-state RDMs plus uniform noise, so they are no
# longer positive semidefinite and no MPS fits them exactly.
print("eigenvalues of the first noisy target:", np.round(np.linalg.eigvalsh(data.targets[0]), 3))

cg = CgSolverConfig(max_iters=50)
for metric in (None, "density", "hilbert_identity", "hilbert_hessian", "mps_amplitude"):
    method = "gd" if metric is None else "ngd"
    tr = optimize(problem, x0, OptimizerConfig(method, 150, metric_id=metric, cg=cg))
    print(f"{metric or 'gradient descent':<18} cost after {len(tr.records)} steps: {tr.final_cost:.6f}")

# The fitted state's own RDMs are proper density matrices.
state = MPSState.from_vector(layout, tr.x_final)
rho = reduced_density_matrix(state, 1)
print("trace", np.trace(rho), "min eigenvalue", np.linalg.eigvalsh(rho).min())
