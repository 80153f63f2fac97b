"""Augmented states, ensembles and their sample statistics.

An augmented state stacks the model state ``phi``, the inferred parameters
``alpha`` and the mapped observables, so the measurement operator becomes a
plain selection of the last ``n_q`` entries.  Ensembles store the members as
rows of an ``(m, N)`` array.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidEnsembleSize, InvalidInflation, InvalidSpread


@dataclass
class AugmentedState:
    phi: np.ndarray
    alpha: np.ndarray
    observables: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.phi, self.alpha, self.observables])

    @property
    def sizes(self):
        return len(self.phi), len(self.alpha), len(self.observables)


@dataclass
class CovarianceEstimate:
    mean: np.ndarray
    cov: np.ndarray


@dataclass
class Ensemble:
    """``m`` augmented states plus one random stream per member."""

    members: np.ndarray
    n_phi: int
    n_alpha: int
    n_q: int
    rngs: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=float)
        if self.members.ndim != 2 or self.members.shape[0] < 2:
            raise InvalidEnsembleSize(f"need at least 2 members, got shape {self.members.shape}")
        if self.members.shape[1] != self.n_phi + self.n_alpha + self.n_q:
            raise ValueError("member length does not match n_phi + n_alpha + n_q")

    @property
    def m(self):
        return self.members.shape[0]

    @property
    def n(self):
        return self.members.shape[1]

    @property
    def phi(self):
        return self.members[:, :self.n_phi]

    @property
    def alpha(self):
        return self.members[:, self.n_phi:self.n_phi + self.n_alpha]

    @property
    def observables(self):
        return self.members[:, self.n_phi + self.n_alpha:]

    def with_members(self, members):
        return replace(self, members=np.array(members, dtype=float))

    def refresh_observables(self, observe):
        """Re-derive the observables block from ``phi`` (in place)."""
        self.members[:, self.n_phi + self.n_alpha:] = observe(self.phi)
        return self


def member_streams(seed, m):
    """One independent generator per member, all derived from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(m)
    return [np.random.default_rng(s) for s in children]


def init_ensemble(mean_state, sigma_phi, sigma_alpha, m, seed, observe=None,
                  param_bounds=None, max_redraws=1000):
    """Draw ``m`` members around ``mean_state``.

    Each ``phi`` and ``alpha`` component gets Gaussian spread with standard
    deviation ``sigma * |mean component|``.  If ``observe`` is given the
    observables are recomputed from each member's ``phi``; otherwise they are
    copied from ``mean_state``.

    With ``param_bounds`` (``(n_alpha, 2)``), parameter draws outside the
    open bounds are redrawn from the member's own stream, giving a
    truncated Gaussian.
    """
    if m < 2:
        raise InvalidEnsembleSize(f"m must be >= 2, got {m}")
    if sigma_phi < 0 or sigma_alpha < 0:
        raise InvalidSpread("spreads must be non-negative")
    n_phi, n_alpha, n_q = mean_state.sizes
    rngs = member_streams(seed, m)
    phi0 = np.asarray(mean_state.phi, dtype=float)
    alpha0 = np.asarray(mean_state.alpha, dtype=float)
    members = np.empty((m, n_phi + n_alpha + n_q))
    for j, rng in enumerate(rngs):
        members[j, :n_phi] = phi0 + sigma_phi * np.abs(phi0) * rng.standard_normal(n_phi)
        alpha = alpha0 + sigma_alpha * np.abs(alpha0) * rng.standard_normal(n_alpha)
        if param_bounds is not None:
            lo, hi = np.asarray(param_bounds, dtype=float).T
            for _ in range(max_redraws):
                bad = (alpha <= lo) | (alpha >= hi)
                if not bad.any():
                    break
                alpha[bad] = (alpha0 + sigma_alpha * np.abs(alpha0)
                              * rng.standard_normal(n_alpha))[bad]
            else:
                raise InvalidSpread("could not draw parameters inside their bounds")
        members[j, n_phi:n_phi + n_alpha] = alpha
        members[j, n_phi + n_alpha:] = mean_state.observables
    ens = Ensemble(members, n_phi, n_alpha, n_q, rngs)
    if observe is not None:
        ens.refresh_observables(observe)
    return ens


def _as_array(e):
    return e.members if isinstance(e, Ensemble) else np.asarray(e, dtype=float)


def ensemble_mean(e):
    return _as_array(e).mean(axis=0)


def ensemble_covariance(e):
    """Unbiased sample covariance (denominator ``m - 1``), symmetrised."""
    x = _as_array(e)
    m = x.shape[0]
    if m < 2:
        raise InvalidEnsembleSize(f"covariance needs m >= 2, got {m}")
    mean = x.mean(axis=0)
    a = x - mean
    cov = a.T @ a / (m - 1)
    return CovarianceEstimate(mean=mean, cov=0.5 * (cov + cov.T))


def inflate(e, rho_infl):
    """Scale the anomalies of ``e`` about its mean by ``rho_infl``."""
    if rho_infl < 1:
        raise InvalidInflation(f"inflation factor must be >= 1, got {rho_infl}")
    x = _as_array(e)
    mean = x.mean(axis=0)
    out = mean + rho_infl * (x - mean)
    return e.with_members(out) if isinstance(e, Ensemble) else out
