"""One regularised bias-aware analysis on a toy problem, step by step.

    python demos/filter_by_hand.py

Shows how the bias Jacobian J and the regularisation gamma change the update
compared with the plain and the bias-corrected EnKF.
"""

import numpy as np

from renkf.filters import FilterConfig, enkf_analysis, perturb_observations, renkf_analysis

rng = np.random.default_rng(0)
m, n_q = 20, 1
# two state variables and one observable (the last column)
x = np.column_stack([rng.normal(1.0, 0.2, m), rng.normal(0.0, 0.3, m)])
x = np.column_stack([x, x[:, 0] + 0.5 * x[:, 1]])
truth_obs, bias = np.array([1.6]), np.array([0.4])
c_dd = np.eye(1) * 0.01
d = perturb_observations(truth_obs, c_dd, m, rng)

print("forecast mean observable", x[:, -1].mean().round(3))
print("plain EnKF              ", enkf_analysis(x, d, c_dd, n_q)[:, -1].mean().round(3))
print("bias-corrected EnKF     ", enkf_analysis(x, d - bias, c_dd, n_q)[:, -1].mean().round(3))
for jac in (0.0, -0.3, -0.6):
    for gamma in (0.0, 1.0, 10.0):
        cfg = FilterConfig(c_dd=c_dd, gamma=gamma)
        y = renkf_analysis(x, d, bias, np.array([[jac]]), cfg, n_q)
        print(f"r-EnKF J = {jac:5.2f} gamma = {gamma:4.1f}  ",
              y[:, -1].mean().round(3))
