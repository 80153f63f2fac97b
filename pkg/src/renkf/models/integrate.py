"""Fixed-step classical Runge-Kutta integration."""

import numpy as np

from ..errors import IntegrationBlowup


def rk4_step(rhs, state, dt):
    """Advance ``state`` by one fourth-order Runge-Kutta step of size ``dt``.

    ``rhs`` maps a state array to its time derivative (same shape).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = rhs(state)
    k2 = rhs(state + 0.5 * dt * k1)
    k3 = rhs(state + 0.5 * dt * k2)
    k4 = rhs(state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowup("non-finite value during RK4 step")
    return out


def integrate(model, phi, alpha, dt, n_steps, save_every=1):
    """Integrate ``model`` for ``n_steps`` steps of ``dt``.

    ``phi`` has shape ``(..., n_phi)`` and ``alpha`` ``(..., n_alpha)``; any
    leading axes (ensemble members, training draws) are integrated together.

    Returns ``(phi_final, trajectory)`` where the trajectory holds the state
    every ``save_every`` steps, *excluding* the initial state, with time as
    the first axis.  Each step is split into ``model.substeps(dt)`` equal RK4
    sub-steps when the model is too stiff for a single one.
    """
    phi = np.array(phi, dtype=float)
    alpha = np.asarray(alpha, dtype=float)

    def rhs(y):
        return model.rhs(y, alpha)

    n_sub = model.substeps(dt)
    h = dt / n_sub
    saved = []
    for k in range(1, n_steps + 1):
        for _ in range(n_sub):
            phi = model.project(rk4_step(rhs, phi, h), alpha)
        if k % save_every == 0:
            saved.append(phi)
    traj = np.array(saved) if saved else np.empty((0,) + phi.shape)
    return phi, traj
