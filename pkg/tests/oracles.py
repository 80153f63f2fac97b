"""Independent reference computations used by several test modules."""

import numpy as np
from scipy import linalg


def random_spd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T / n + 0.5 * np.eye(n))


def random_problem(rng, n_max=10, nq_max=3, m_max=16, full_rank=False):
    """A random ensemble, perturbed observations, bias, Jacobian and covariances."""
    n_q = int(rng.integers(1, nq_max + 1))
    n = int(rng.integers(n_q + 1, n_max + 1))
    m_lo = n + 2 if full_rank else 3
    m = int(rng.integers(m_lo, max(m_lo, m_max) + 1))
    x = rng.standard_normal((m, n)) * rng.uniform(0.5, 2.0, n)
    return dict(
        x=x, n_q=n_q,
        d=rng.standard_normal((m, n_q)),
        b=rng.standard_normal(n_q),
        jac=0.4 * rng.standard_normal((n_q, n_q)),
        c_dd=random_spd(rng, n_q, 0.5),
        c_bb=random_spd(rng, n_q, 0.8),
        gamma=float(rng.uniform(0.0, 5.0)),
    )


def minimise_regularised_cost(x, d, b_f, jac, c_dd, c_bb, gamma, n_q):
    """Member-wise minimiser of the regularised bias-aware cost.

    Each member solves, in least squares,

        |L_c^-1 (psi - psi_f)|^2 + |L_d^-1 (M psi + b - d_j)|^2 + gamma |L_b^-1 b|^2

    with ``b = b_f + J M (psi - psi_f)``.  The residual is linear in the
    increment, so a single stacked ``lstsq`` is an exact minimisation.
    The forecast covariance must be full rank.
    """
    m, n = x.shape
    c = np.cov(x, rowvar=False)
    lc = linalg.cholesky(c, lower=True)
    ld = linalg.cholesky(c_dd, lower=True)
    lb = linalg.cholesky(c_bb, lower=True)
    mop = np.zeros((n_q, n))
    mop[:, n - n_q:] = np.eye(n_q)
    g = (np.eye(n_q) + jac) @ mop
    h = jac @ mop
    wc = linalg.solve_triangular(lc, np.eye(n), lower=True)
    wd = linalg.solve_triangular(ld, np.eye(n_q), lower=True)
    wb = linalg.solve_triangular(lb, np.eye(n_q), lower=True)
    a = np.vstack([wc, wd @ g, np.sqrt(gamma) * wb @ h])
    out = np.empty_like(x)
    for j in range(m):
        y_f = mop @ x[j] + b_f
        rhs = np.concatenate([np.zeros(n), wd @ (d[j] - y_f), -np.sqrt(gamma) * wb @ b_f])
        delta, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        out[j] = x[j] + delta
    return out


def dense_ridge(esn_params, inputs, targets, tikhonov):
    """Readout by explicitly stacking every reservoir state and solving densely."""
    w_in, w, g, sigma_in, rho, delta_r = esn_params
    w_in, w = w_in.toarray(), w.toarray()
    rows, cols = [], []
    for u, b in zip(inputs, targets):
        r = np.zeros(w.shape[0])
        for k in range(1, len(u)):
            r = np.tanh(sigma_in * w_in @ np.append(u[k - 1] * g, delta_r) + rho * w @ r)
            rows.append(np.append(r, 1.0))
            cols.append(b[k])
    big_r = np.array(rows).T  # (n_r + 1, n_samples)
    big_b = np.array(cols).T
    lhs = big_r @ big_r.T + tikhonov * np.eye(big_r.shape[0])
    return linalg.solve(lhs, big_r @ big_b.T, assume_a="sym").T
