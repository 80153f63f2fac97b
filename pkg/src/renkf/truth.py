"""Synthetic ground truth for twin experiments.

The truth is the model run at its true parameters plus a prescribed additive
bias on the observables, ``d_t = M psi_t + b_t``.  Observations are then
``d_t`` plus Gaussian or coloured noise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationBlowup, InvalidNoise, NonFiniteState, TruthGenerationFailure
from .models import integrate

BIAS_KINDS = ("none", "vdp_cosine", "linear", "nonlinear_periodic", "time_dependent")
NOISE_COLORS = ("gaussian_white", "white", "pink", "brown")

# amplitude exponent of each colour: |X(f)| ~ f**-e
_COLOR_EXPONENT = {"white": 0.0, "pink": 0.5, "brown": 1.0}


@dataclass(frozen=True)
class BiasSpec:
    kind: str = "none"
    a1: float = 0.3
    a2: float = 0.1
    a3: float = 0.2
    a4: float = 2.0
    a5: float = 0.4
    a6: float = 2.0

    def __post_init__(self):
        if self.kind not in BIAS_KINDS:
            raise ValueError(f"unknown bias kind {self.kind!r}; expected one of {BIAS_KINDS}")
        if not all(np.isfinite([self.a1, self.a2, self.a3, self.a4, self.a5, self.a6])):
            raise ValueError("bias constants must be finite")

    def evaluate(self, t, q, q_ref=None):
        """Bias for observables ``q`` of shape ``(n_t, n_q)`` at times ``t``.

        ``q_ref`` is the reference amplitude used by the linear and periodic
        forms (the maximum true pressure at the heat source).
        """
        q = np.asarray(q, dtype=float)
        if self.kind == "none":
            return np.zeros_like(q)
        if self.kind == "vdp_cosine":
            return np.cos(q)
        if self.kind == "time_dependent":
            t = np.asarray(t, dtype=float).reshape(-1, *([1] * (q.ndim - 1)))
            return self.a5 * q * np.sin(self.a6 * np.pi * t) ** 2
        if q_ref is None or not q_ref > 0:
            raise ValueError(f"{self.kind} bias needs a positive reference amplitude")
        if self.kind == "linear":
            return self.a1 * q + self.a2 * q_ref
        return self.a3 * q_ref * np.cos(self.a4 * q / q_ref)


@dataclass(frozen=True)
class NoiseSpec:
    color: str = "gaussian_white"
    level: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.color not in NOISE_COLORS:
            raise ValueError(f"unknown noise colour {self.color!r}; expected one of {NOISE_COLORS}")
        if self.level < 0:
            raise InvalidNoise(f"noise level must be >= 0, got {self.level}")

    def apply(self, d):
        if self.color == "gaussian_white":
            return add_gaussian_noise(d, self.level, self.seed)
        return add_colored_noise(d, self.color, self.level, self.seed)


@dataclass
class Truth:
    t: np.ndarray  # (n_t,)
    phi: np.ndarray  # (n_t, n_phi)
    observables: np.ndarray  # (n_t, n_q), M psi_t
    bias: np.ndarray  # (n_t, n_q)
    q_ref: float

    @property
    def d(self):
        """True observable ``M psi_t + b_t``."""
        return self.observables + self.bias

    @property
    def dt(self):
        return self.t[1] - self.t[0]

    def index(self, time):
        """Sample index of ``time`` (rounded to the nearest step)."""
        k = int(round((time - self.t[0]) / self.dt))
        if not 0 <= k < self.t.size:
            raise IndexError(f"t={time} outside the truth horizon")
        return k


def reference_amplitude(model, phi):
    """``max`` of the first observable channel over a trajectory.

    For the thermoacoustic model this is the pressure at the heat source
    (located by ``model.params.x_h``); for others the first observable.
    """
    if hasattr(model, "observe_at"):
        q = model.observe_at(phi, [model.params.x_h])[..., 0]
    else:
        q = model.observe(phi)[..., 0]
    return float(np.max(q))


def generate_truth(model, true_alpha, bias_spec, t_end, dt, phi0=None, t_spinup=0.0):
    """Integrate the true model and attach the prescribed bias.

    The model is first run for ``t_spinup`` seconds (discarded); the
    returned series starts at ``t = 0`` and holds ``round(t_end / dt) + 1``
    samples.
    """
    alpha = np.asarray(true_alpha, dtype=float)
    phi = model.initial_state() if phi0 is None else np.asarray(phi0, dtype=float)
    try:
        if t_spinup > 0:
            phi, _ = integrate(model, phi, alpha, dt, int(round(t_spinup / dt)))
        n = int(round(t_end / dt))
        _, traj = integrate(model, phi, alpha, dt, n)
    except (IntegrationBlowup, NonFiniteState, FloatingPointError) as exc:
        raise TruthGenerationFailure(f"truth integration failed: {exc}") from exc
    traj = np.concatenate([phi[None, :], traj])
    t = np.arange(n + 1) * dt
    q = model.observe(traj)
    q_ref = reference_amplitude(model, traj)
    bias = bias_spec.evaluate(t, q, q_ref if q_ref > 0 else None)
    return Truth(t=t, phi=traj, observables=q, bias=bias, q_ref=q_ref)


def add_gaussian_noise(d, sigma_d, seed):
    """White Gaussian noise with std ``sigma_d * mean|d|`` per channel."""
    if sigma_d < 0:
        raise InvalidNoise(f"sigma_d must be >= 0, got {sigma_d}")
    d = np.asarray(d, dtype=float)
    scale = sigma_d * np.mean(np.abs(d), axis=0)
    rng = np.random.default_rng(seed)
    return d + rng.standard_normal(d.shape) * scale


def colored_noise(n, color, rng):
    """Unit-variance noise of length ``n`` with amplitude spectrum ``f**-e``.

    Built in the frequency domain on the next power of two with uniform
    random phases and zero mean, then truncated.
    """
    if color not in _COLOR_EXPONENT:
        raise ValueError(f"unknown colour {color!r}")
    n_fft = 1 << max(1, int(np.ceil(np.log2(n))))
    f = np.fft.rfftfreq(n_fft)
    amp = np.zeros_like(f)
    amp[1:] = f[1:] ** -_COLOR_EXPONENT[color]
    phase = rng.uniform(0.0, 2.0 * np.pi, f.size)
    x = np.fft.irfft(amp * np.exp(1j * phase), n_fft)[:n]
    x -= x.mean()
    return x / x.std()


def add_colored_noise(d, color, factor, seed):
    """Add white, pink or brown noise scaled by ``factor * mean|d|`` per channel.

    Every colour is normalised to unit variance before scaling, so the
    three colours carry the same energy at the same ``factor``.
    """
    if factor < 0:
        raise InvalidNoise(f"noise factor must be >= 0, got {factor}")
    d = np.asarray(d, dtype=float)
    if factor == 0:
        return d.copy()
    flat = d.reshape(d.shape[0], -1)
    rng = np.random.default_rng(seed)
    noise = np.column_stack([colored_noise(flat.shape[0], color, rng)
                             for _ in range(flat.shape[1])])
    scale = factor * np.mean(np.abs(flat), axis=0)
    return (flat + noise * scale).reshape(d.shape)


def snr_db(true_series, noisy_series):
    """Channel-averaged ``10 log10(<d^2> / <(d - d_noisy)^2>)``; ``inf`` if noise-free."""
    d = np.asarray(true_series, dtype=float)
    d = d[:, None] if d.ndim == 1 else d
    n = d - np.asarray(noisy_series, dtype=float).reshape(d.shape)
    noise_power = np.mean(n**2, axis=0)
    if np.any(noise_power == 0):
        return np.inf
    return float(np.mean(10.0 * np.log10(np.mean(d**2, axis=0) / noise_power)))
