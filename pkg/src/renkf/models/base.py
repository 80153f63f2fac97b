"""Common interface for the forecast models."""

import numpy as np


class Model:
    """A deterministic model ``dphi/dt = F(phi, alpha)`` with observables.

    Subclasses set the class attributes and implement ``rhs`` and
    ``observe``.  Both act on the trailing axis, so arrays with any number of
    leading (member) axes are evaluated in one call.
    """

    name = "model"
    param_names = ()
    #: Physical limits used by the reject-inflate guard.
    param_bounds = {}
    n_phi = 0
    n_q = 0

    @property
    def n_alpha(self):
        return len(self.param_names)

    def rhs(self, phi, alpha):
        raise NotImplementedError

    def observe(self, phi):
        raise NotImplementedError

    def substeps(self, dt):
        """Number of RK4 sub-steps needed for a stable step of ``dt``."""
        return 1

    def project(self, phi, alpha):
        """Re-impose algebraic constraints after a step (default: none)."""
        return phi

    def bounds_array(self):
        """``(n_alpha, 2)`` array of (low, high) limits; missing -> infinite."""
        out = np.empty((self.n_alpha, 2))
        for k, name in enumerate(self.param_names):
            out[k] = self.param_bounds.get(name, (-np.inf, np.inf))
        return out

    def observable_labels(self):
        return [f"q{k}" for k in range(self.n_q)]
