"""Analysis steps: stochastic EnKF and the regularized bias-aware EnKF.

The observables occupy the last ``n_q`` entries of each augmented state, so
``M psi`` is a slice and ``C M^T`` is a column block of the covariance.
"""

from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble, ensemble_covariance, inflate
from .errors import AnalysisFailure, InvalidCovariance


@dataclass
class FilterConfig:
    """Analysis settings.

    ``c_bb`` defaults to ``c_dd``.  ``param_bounds`` is an ``(n_alpha, 2)``
    array of physical limits checked by :func:`reject_inflate`; with
    ``bounded_params`` inflation never moves a parameter outside them.
    """

    c_dd: np.ndarray
    gamma: float = 0.0
    c_bb: np.ndarray = None
    inflation_accept: float = 1.002
    inflation_reject: float = 1.05
    param_bounds: np.ndarray = None
    bounded_params: bool = False

    def __post_init__(self):
        self.c_dd = np.atleast_2d(np.asarray(self.c_dd, dtype=float))
        if self.c_bb is None:
            self.c_bb = self.c_dd.copy()
        self.c_bb = np.atleast_2d(np.asarray(self.c_bb, dtype=float))
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        for name in ("c_dd", "c_bb"):
            _check_spd(getattr(self, name), name)


def _check_spd(c, name="covariance"):
    if c.shape[0] != c.shape[1] or not np.allclose(c, c.T, rtol=1e-12, atol=0):
        raise InvalidCovariance(f"{name} must be square and symmetric")
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise InvalidCovariance(f"{name} is not positive definite") from None


def perturb_observations(d, c_dd, m, rng):
    """``m`` draws ``d + chol(c_dd) z``.

    ``rng`` is either one generator or a sequence of ``m`` per-member
    generators (member ``j`` then draws only from stream ``j``).
    """
    d = np.atleast_1d(np.asarray(d, dtype=float))
    chol = _check_spd(np.atleast_2d(np.asarray(c_dd, dtype=float)), "c_dd")
    if isinstance(rng, np.random.Generator):
        z = rng.standard_normal((m, d.size))
    else:
        if len(rng) != m:
            raise ValueError("need one stream per member")
        z = np.array([r.standard_normal(d.size) for r in rng])
    return d + z @ chol.T


def _solve(a, b):
    """Solve ``a x = b``; one trace-scaled jitter retry, then fail."""
    try:
        x = np.linalg.solve(a, b)
        if np.all(np.isfinite(x)):
            return x
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * np.trace(a) * np.eye(a.shape[0])
    try:
        x = np.linalg.solve(a + jitter, b)
    except np.linalg.LinAlgError as exc:
        raise AnalysisFailure(f"singular innovation matrix: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise AnalysisFailure("non-finite Kalman gain")
    return x


def _split(ensemble, n_q):
    if isinstance(ensemble, Ensemble):
        return ensemble.members, ensemble.n_q
    return np.asarray(ensemble, dtype=float), n_q


def _wrap(ensemble, members):
    return ensemble.with_members(members) if isinstance(ensemble, Ensemble) else members


def enkf_analysis(ensemble, d_perturbed, c_dd, n_q=None):
    """Bias-unaware stochastic EnKF update of every member."""
    x, n_q = _split(ensemble, n_q)
    c = ensemble_covariance(x).cov
    c_mt = c[:, -n_q:]
    s = c_mt[-n_q:]
    innov = np.asarray(d_perturbed) - x[:, -n_q:]
    w = _solve(np.atleast_2d(c_dd) + s, innov.T)
    return _wrap(ensemble, x + (c_mt @ w).T)


def _renkf_terms(c, n_q, jac, config):
    c_dd, c_bb, gamma = config.c_dd, config.c_bb, config.gamma
    jac = np.atleast_2d(jac)
    eye = np.eye(n_q)
    c_mt = c[:, -n_q:]
    s = c_mt[-n_q:]
    if not np.any(jac):
        return c_mt, c_dd + s, eye, np.zeros((n_q, n_q))
    ij = eye + jac
    p = c_dd @ ij.T @ np.linalg.inv(c_dd)
    q = gamma * c_dd @ jac.T @ np.linalg.inv(c_bb)
    bracket = c_dd + p @ ij @ s + q @ jac @ s
    return c_mt, bracket, p, q


def renkf_gain(c, n_q, jac, config):
    """Regularized gain and the two weight matrices of the innovation term.

    Returns ``(K, P, Q)`` such that member ``j`` is updated by
    ``K [P (d_j - y_j) - Q b]``.  With ``C_dd`` proportional to the identity
    this is ``K [(I + J)^T (d_j - y_j) - gamma C_dd C_bb^-1 J^T b]``.
    """
    c_mt, bracket, p, q = _renkf_terms(c, n_q, jac, config)
    k = np.linalg.solve(bracket.T, c_mt.T).T
    return k, p, q


def renkf_analysis(ensemble, d_perturbed, bias, jac, config, n_q=None):
    """Regularized bias-aware EnKF update.

    Each member minimises
    ``|psi - psi_f|^2_{C^-1} + |y - d_j|^2_{C_dd^-1} + gamma |b|^2_{C_bb^-1}``
    with ``y = M psi + b`` and the bias linearised as
    ``b = b_f + J M (psi - psi_f)``.
    """
    x, n_q = _split(ensemble, n_q)
    bias = np.atleast_1d(np.asarray(bias, dtype=float))
    c = ensemble_covariance(x).cov
    c_mt, bracket, p, q = _renkf_terms(c, n_q, jac, config)
    y_f = x[:, -n_q:] + bias
    rhs = p @ (np.asarray(d_perturbed) - y_f).T
    if np.any(q):
        rhs = rhs - (q @ bias)[:, None]
    w = _solve(bracket, rhs)
    out = x + (c_mt @ w).T
    if not np.all(np.isfinite(out)):
        raise AnalysisFailure("non-finite analysis")
    return _wrap(ensemble, out)


def params_physical(alpha, bounds):
    """True if every row of ``alpha`` lies strictly inside ``bounds``."""
    if bounds is None:
        return True
    bounds = np.asarray(bounds, dtype=float)
    return bool(np.all((alpha > bounds[:, 0]) & (alpha < bounds[:, 1])))


def reject_inflate(analysis, forecast, config):
    """Accept-and-lightly-inflate or reject-and-inflate-forecast.

    Returns ``(ensemble, accepted)``.
    """
    if params_physical(analysis.alpha, config.param_bounds):
        ens, rho, accepted = analysis, config.inflation_accept, True
    else:
        ens, rho, accepted = forecast, config.inflation_reject, False
    if config.bounded_params and config.param_bounds is not None:
        return inflate_within_bounds(ens, rho, config.param_bounds), accepted
    return inflate(ens, rho), accepted


def inflate_within_bounds(ens, rho_infl, bounds):
    """Inflate ``ens``, leaving any parameter uninflated if inflation would make it unphysical.

    Plain inflation of the rejected forecast pushes members that sit near a
    limit across it; from then on every analysis is rejected.
    """
    out = inflate(ens, rho_infl)
    bounds = np.asarray(bounds, dtype=float)
    sl = slice(ens.n_phi, ens.n_phi + ens.n_alpha)
    new = out.members[:, sl]
    ok = np.all((new > bounds[:, 0]) & (new < bounds[:, 1]), axis=0)
    members = out.members.copy()
    members[:, sl] = np.where(ok, new, ens.members[:, sl])
    return out.with_members(members)
