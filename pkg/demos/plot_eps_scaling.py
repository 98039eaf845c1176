"""
Iterations against accuracy
===========================

Fit the slope of log(iterations) against log(1/eps) for IBP and for the
adaptive accelerated method on a few Gaussian-mixture instances.
"""

# %%
import numpy as np

from barylab import BarycenterProblem, laplacian
from barylab.data import gauss_mix, grid_cost_1d
from barylab.experiment import scaling_study

eps_list = [0.2, 0.1, 0.05, 0.025]
n, m = 8, 4

# %%
# Worst-case analysis predicts a slope near 2 for IBP and near 1 for the
# accelerated method. On small, smooth instances IBP stops well before its
# bound, so its measured slope tends to come out lower.

for seed in range(3):
    problem = BarycenterProblem(gauss_mix(n, m, seed=seed), grid_cost_1d(n))
    rows, s_ibp = scaling_study("ibp", eps_list, problem)
    _, s_agd = scaling_study("agd", eps_list, problem, lap=laplacian("complete", m))
    iters = [r["iterations"] for r in rows]
    gaps = np.round([r["objective_gap"] for r in rows], 4).tolist()
    print(f"seed {seed}: IBP half-steps {iters}, gaps {gaps}, slope {s_ibp:.2f}; AGD slope {s_agd:.2f}")
