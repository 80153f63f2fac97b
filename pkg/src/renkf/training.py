"""Bias training sets for the echo state network.

The network never sees the true bias.  Instead ``L`` guesses of the state
and parameters are drawn around the prior ``psi0``, each is forecast over
the training window, and the residuals ``d - M psi_l`` against the
observations become training series.  Damped copies of every series are
appended so the network also learns small biases.
"""

from dataclasses import dataclass

import numpy as np

from .ensemble import member_streams
from .errors import IntegrationBlowup, NonFiniteState, TrainingFailure
from .models import integrate


@dataclass(frozen=True)
class TrainingConfig:
    l_sets: int = 10
    sigma_l: float = 0.5
    t_train: float = 1.0
    dt_esn: float = 5e-4
    seed: int = 0
    #: ``(-0.1, 0.01)`` if True, ``(0.1, 0.01)`` otherwise
    signed_augmentation: bool = True
    max_retries: int = 10

    def __post_init__(self):
        if self.l_sets < 1:
            raise ValueError(f"l_sets must be >= 1, got {self.l_sets}")
        if not 0 <= self.sigma_l < 1:
            raise ValueError(f"sigma_l must lie in [0, 1), got {self.sigma_l}")
        if self.n_samples < 2:
            raise ValueError("t_train must cover at least two ESN steps")

    @property
    def n_samples(self):
        return int(np.floor(self.t_train / self.dt_esn + 1e-9))

    @property
    def augmentation(self):
        return (-0.1, 0.01) if self.signed_augmentation else (0.1, 0.01)


@dataclass
class TrainingSet:
    series: list  # 3L arrays (n_samples, n_q): originals, then each scaled copy
    phi_draws: np.ndarray  # (L, n_phi)
    alpha_draws: np.ndarray  # (L, n_alpha)
    factors: tuple
    retries: np.ndarray  # (L,) redraws needed per draw

    @property
    def originals(self):
        return self.series[:len(self.phi_draws)]


def _draw(phi0, alpha0, sigma_l, rng):
    lo, hi = 1.0 - sigma_l, 1.0 + sigma_l
    phi = phi0 * rng.uniform(lo, hi, phi0.shape)
    alpha = alpha0 * rng.uniform(lo, hi, alpha0.shape)
    return phi, alpha


def _forecast(model, phi, alpha, dt, n_steps, every):
    _, traj = integrate(model, phi, alpha, dt, n_steps, save_every=every)
    traj = np.concatenate([phi[None], traj])
    return model.observe(traj)


def build_training_set(model, phi0, alpha0, obs, config, dt):
    """Residual series ``d - M psi_l`` for ``L`` prior draws, plus scaled copies.

    ``obs`` holds the observations at ``dt_esn`` spacing from the start of
    the training window, at least ``config.n_samples`` rows.  Draw ``l`` uses
    its own random stream, so a draw that blows up is redrawn without
    touching the others.
    """
    phi0 = np.asarray(phi0, dtype=float)
    alpha0 = np.asarray(alpha0, dtype=float)
    obs = np.asarray(obs, dtype=float)
    n_tr = config.n_samples
    if obs.shape[0] < n_tr:
        raise ValueError(f"need {n_tr} observation samples, got {obs.shape[0]}")
    every = int(round(config.dt_esn / dt))
    if not np.isclose(every * dt, config.dt_esn):
        raise ValueError("dt_esn must be an integer multiple of dt")
    n_steps = (n_tr - 1) * every
    n_l = config.l_sets
    rngs = member_streams(config.seed, n_l)

    draws = [_draw(phi0, alpha0, config.sigma_l, rng) for rng in rngs]
    phis = np.array([model.project(p.copy(), a) for p, a in draws])
    alphas = np.array([a for _, a in draws])
    retries = np.zeros(n_l, dtype=int)
    try:
        q = _forecast(model, phis, alphas, dt, n_steps, every)  # (n_tr, L, n_q)
        q = np.swapaxes(q, 0, 1)
    except (IntegrationBlowup, NonFiniteState, FloatingPointError):
        # find and redraw the offending members one at a time
        q = np.empty((n_l, n_tr, model.n_q))
        for l in range(n_l):
            while True:
                try:
                    q[l] = _forecast(model, phis[l], alphas[l], dt, n_steps, every)
                    break
                except (IntegrationBlowup, NonFiniteState, FloatingPointError):
                    retries[l] += 1
                    if retries[l] > config.max_retries:
                        raise TrainingFailure(
                            f"training draw {l} diverged {config.max_retries} times") from None
                    p, a = _draw(phi0, alpha0, config.sigma_l, rngs[l])
                    phis[l], alphas[l] = model.project(p, a), a

    originals = [obs[:n_tr] - q[l] for l in range(n_l)]
    series = list(originals)
    for f in config.augmentation:
        series.extend(f * b for b in originals)
    return TrainingSet(series=series, phi_draws=phis, alpha_draws=alphas,
                       factors=(1.0,) + config.augmentation, retries=retries)
