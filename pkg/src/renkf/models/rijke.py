"""Nonlinear time-delayed thermoacoustic model of a duct with a heat source.

Acoustics are projected onto ``n_m`` Galerkin modes with ideal (p = 0)
ends.  The delayed velocity at the heat source comes from an auxiliary
advection equation on ``X in [0, 1]`` discretised by Chebyshev collocation:
the velocity entering at ``X = 0`` leaves at ``X = 1`` after ``tau_nu``
seconds, so ``u(x_h, t - tau)`` is read off at ``X = tau / tau_nu``.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DelayExceedsHistory, InvalidLocation, NonFiniteState
from .base import Model
from .chebyshev import chebyshev_grid

GAS_CONSTANT = 287.0  # J/(kg K), air

SENSOR_LOCATIONS = (0.2, 0.33, 0.47, 0.6, 0.73, 0.87)


@dataclass(frozen=True)
class RijkeParams:
    beta: float = 4.2
    tau: float = 1.4e-3
    n_m: int = 10
    n_c: int = 50
    tau_nu: float = 1e-2
    x_h: float = 0.2
    l_x: float = 1.0
    c1: float = 0.05
    c2: float = 0.01
    u_bar: float = 10.0
    p_bar: float = 1.013e5
    t_bar: float = 417.2
    gamma: float = 1.4

    @property
    def c_bar(self):
        return np.sqrt(self.gamma * GAS_CONSTANT * self.t_bar)

    @property
    def rho_bar(self):
        return self.p_bar / (GAS_CONSTANT * self.t_bar)

    @property
    def omegas(self):
        j = np.arange(1, self.n_m + 1)
        return j * np.pi * self.c_bar / self.l_x

    @property
    def damping(self):
        j = np.arange(1, self.n_m + 1)
        return self.c1 * j**2 + self.c2 * np.sqrt(j)


TRUE_PARAMS = RijkeParams()
GUESS_PARAMS = RijkeParams(beta=4.0, tau=1.5e-3)


def heat_release(u_delayed, params):
    """Square-root heat-release law (W/m^2) for the delayed velocity."""
    p = params
    return p.u_bar * p.p_bar * p.beta * (
        np.sqrt(np.abs(1.0 / 3.0 + np.asarray(u_delayed) / p.u_bar)) - np.sqrt(1.0 / 3.0)
    )


def pressure_observation(mu, locations, params):
    """Acoustic pressure ``-sum_j mu_j sin(omega_j x / c)`` at ``locations``."""
    x = np.atleast_1d(np.asarray(locations, dtype=float))
    if np.any(x < 0.0) or np.any(x > params.l_x):
        raise InvalidLocation(f"locations must lie in [0, {params.l_x}] m")
    basis = np.sin(np.outer(params.omegas, x) / params.c_bar)
    p = -np.asarray(mu) @ basis
    # sin(j pi) is only zero to roundoff; the duct ends are exact nodes
    ends = (x == 0.0) | (x == params.l_x)
    if np.any(ends):
        p = np.where(ends, 0.0, p)
    return p


@dataclass
class RijkeState:
    eta: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def as_vector(self):
        return np.concatenate([self.eta, self.mu, self.nu])


def rijke_rhs(state, params, grid=None):
    """Time derivative of a single :class:`RijkeState`.

    Validates the delay against the stored history; the vectorised
    :meth:`Rijke.rhs` used for ensembles clips instead.
    """
    if not 0.0 < params.tau <= params.tau_nu:
        raise DelayExceedsHistory(f"tau={params.tau} outside (0, tau_nu={params.tau_nu}]")
    model = Rijke(params, grid=grid)
    phi = state.as_vector()
    if not np.all(np.isfinite(phi)):
        raise NonFiniteState("non-finite Rijke state")
    d = model.rhs(phi, np.array([params.beta, params.tau]))
    n_m = params.n_m
    return RijkeState(eta=d[:n_m], mu=d[n_m:2 * n_m], nu=d[2 * n_m:])


class Rijke(Model):
    """State ``phi = [eta (n_m), mu (n_m), nu (n_c + 1)]``, ``alpha = [beta, tau]``.

    Observables are pressures at ``locations``.
    """

    name = "rijke"
    param_names = ("beta", "tau")

    def __init__(self, params=TRUE_PARAMS, locations=SENSOR_LOCATIONS, grid=None):
        self.params = params
        self.locations = np.asarray(locations, dtype=float)
        if np.any(self.locations < 0) or np.any(self.locations > params.l_x):
            raise InvalidLocation(f"locations must lie in [0, {params.l_x}] m")
        self.grid = grid if grid is not None else chebyshev_grid(params.n_c)
        if self.grid.n_c != params.n_c:
            raise ValueError("grid size does not match params.n_c")
        p = params
        self.n_m = p.n_m
        self.n_phi = 2 * p.n_m + p.n_c + 1
        self.n_q = len(self.locations)
        self.param_bounds = {"beta": (0.1, 5.0), "tau": (1e-6, p.tau_nu)}

        w = p.omegas
        self._a_eta = w / (p.rho_bar * p.c_bar)
        self._a_mu = p.rho_bar * p.c_bar * w
        self._damp = p.damping * p.c_bar / p.l_x
        self._cos_h = np.cos(w * p.x_h / p.c_bar)
        self._forcing = 2.0 * (p.gamma - 1.0) / p.l_x * np.sin(w * p.x_h / p.c_bar)
        self._adv = -(1.0 / p.tau_nu) * self.grid.diff_matrix[1:, :]
        self._obs = -np.sin(np.outer(w, self.locations) / p.c_bar)
        self._substeps = {}
        self._rows_key = None
        self._rows = None

    def substeps(self, dt):
        if dt not in self._substeps:
            # RK4 amplification factor over the advection spectrum
            z = np.linalg.eigvals(self._adv[:, 1:]) * dt
            k = 1
            while True:
                zk = z / k
                amp = np.abs(1 + zk + zk**2 / 2 + zk**3 / 6 + zk**4 / 24).max()
                if amp <= 1.0:
                    break
                k += 1
            self._substeps[dt] = k
        return self._substeps[dt]

    def velocity_at_source(self, phi):
        return phi[..., :self.n_m] @ self._cos_h

    def _delay_rows(self, tau):
        # tau is constant over a forecast, so reuse the last interpolation rows
        key = (tau.shape, tau.tobytes())
        if key != self._rows_key:
            x_delay = np.clip(tau / self.params.tau_nu, 0.0, 1.0)
            self._rows = self.grid.interpolation_row(x_delay)
            self._rows_key = key
        return self._rows

    def rhs(self, phi, alpha):
        p, n_m = self.params, self.n_m
        eta = phi[..., :n_m]
        mu = phi[..., n_m:2 * n_m]
        nu = phi[..., 2 * n_m:].copy()
        beta, tau = alpha[..., 0], alpha[..., 1]

        nu[..., 0] = eta @ self._cos_h
        rows = self._delay_rows(tau)
        u_delayed = np.sum(rows * nu, axis=-1)
        qdot = p.u_bar * p.p_bar * beta * (
            np.sqrt(np.abs(1.0 / 3.0 + u_delayed / p.u_bar)) - np.sqrt(1.0 / 3.0))

        out = np.empty_like(phi)
        d_eta = self._a_eta * mu
        out[..., :n_m] = d_eta
        out[..., n_m:2 * n_m] = (-self._a_mu * eta - qdot[..., None] * self._forcing
                                 - self._damp * mu)
        out[..., 2 * n_m] = d_eta @ self._cos_h
        out[..., 2 * n_m + 1:] = nu @ self._adv.T
        return out

    def project(self, phi, alpha):
        phi[..., 2 * self.n_m] = phi[..., :self.n_m] @ self._cos_h
        return phi

    def observe(self, phi):
        return phi[..., self.n_m:2 * self.n_m] @ self._obs

    def observe_at(self, phi, locations):
        return pressure_observation(phi[..., self.n_m:2 * self.n_m], locations, self.params)

    def params_vector(self, params):
        return np.array([params.beta, params.tau])

    def initial_state(self):
        phi = np.zeros(self.n_phi)
        phi[0] = 1.0
        return self.project(phi, None)

    def observable_labels(self):
        return [f"p@{x:g}m" for x in self.locations]
