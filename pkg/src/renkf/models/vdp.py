"""Van der Pol oscillator with an arc-tangent-type nonlinear forcing."""

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteState
from .base import Model


@dataclass(frozen=True)
class VdpParams:
    zeta: float = 55.0
    beta: float = 75.0
    kappa: float = 3.4
    omega: float = 240.0 * np.pi


TRUE_PARAMS = VdpParams()
GUESS_PARAMS = VdpParams(zeta=60.0, beta=70.0, kappa=4.0)


def vdp_rhs(state, params):
    """Time derivative ``(d eta/dt, d mu/dt)`` of the oscillator."""
    eta, mu = (float(v) for v in state)
    if not (np.isfinite(eta) and np.isfinite(mu)):
        raise NonFiniteState("non-finite oscillator state")
    p = params
    forcing = p.beta - p.zeta - p.beta * p.kappa * eta**2 / (p.beta + p.kappa * eta**2)
    return mu, -p.omega**2 * eta + mu * forcing


class VanDerPol(Model):
    """State ``phi = [eta, mu]``, parameters ``alpha = [zeta, beta, kappa]``.

    The observable is the acoustic velocity ``eta``.
    """

    name = "vdp"
    param_names = ("zeta", "beta", "kappa")
    param_bounds = {"zeta": (20.0, 120.0), "beta": (20.0, 120.0), "kappa": (0.1, 10.0)}
    n_phi = 2
    n_q = 1

    def __init__(self, omega=240.0 * np.pi):
        self.omega = omega

    def rhs(self, phi, alpha):
        eta, mu = phi[..., 0], phi[..., 1]
        zeta, beta, kappa = alpha[..., 0], alpha[..., 1], alpha[..., 2]
        k_eta2 = kappa * eta**2
        out = np.empty_like(phi)
        out[..., 0] = mu
        out[..., 1] = -self.omega**2 * eta + mu * (beta - zeta - beta * k_eta2 / (beta + k_eta2))
        return out

    def observe(self, phi):
        return phi[..., :1].copy()

    def params_vector(self, params):
        return np.array([params.zeta, params.beta, params.kappa])

    def initial_state(self):
        return np.array([0.1, 0.0])

    def observable_labels(self):
        return ["eta"]
