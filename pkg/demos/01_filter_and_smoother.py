"""
Filtering and smoothing a small block-diagonal system
=====================================================

Simulate 300 steps of a 4-dimensional state with two 2x2 blocks, then
compare how close the filtered and smoothed means get to the hidden states.
"""

import numpy as np

from graphem import BlockSpec, generate_block_transition, kalman_filter, rts_smoother, simulate

spec = BlockSpec((2, 2), noise_scales=(0.3, 0.3, 1e-2))
A = generate_block_transition(spec, 0)
print("true transition matrix:")
print(np.round(A, 3))

model = spec.model(A)
traj = simulate(model, 300, 1)

run = kalman_filter(model, traj.observations)
smooth = rts_smoother(model, run)

# smoother means are indexed from k=0 (the prior), so drop the first one
err_obs = np.sqrt(np.mean((traj.observations - traj.states) ** 2))
err_filt = np.sqrt(np.mean((run.means - traj.states) ** 2))
err_smooth = np.sqrt(np.mean((smooth.means[1:] - traj.states) ** 2))
print(f"RMSE raw observations : {err_obs:.4f}")
print(f"RMSE filtered means   : {err_filt:.4f}")
print(f"RMSE smoothed means   : {err_smooth:.4f}")

# the negative log-likelihood is the quantity EM drives down
print(f"neg. log-likelihood at the true A : {run.neg_log_lik:.2f}")
wrong = kalman_filter(model.with_transition(np.zeros_like(A)), traj.observations)
print(f"neg. log-likelihood at A = 0      : {wrong.neg_log_lik:.2f}")
