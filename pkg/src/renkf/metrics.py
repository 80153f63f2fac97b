"""Normalised error metrics and the pre-DA / DA / post-DA windows."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidWindow


@dataclass(frozen=True)
class ErrorWindows:
    """Three windows of length ``t_err`` around an assimilation run.

    ``pre_da`` ends when assimilation starts, ``da`` is the last ``t_err``
    of assimilation and ``post_da`` starts when the filter is removed.
    """

    t_err: float
    t_start_da: float
    t_stop_da: float

    def __post_init__(self):
        if not self.t_err > 0:
            raise InvalidWindow(f"t_err must be positive, got {self.t_err}")
        if self.t_stop_da < self.t_start_da:
            raise InvalidWindow("assimilation stops before it starts")

    @property
    def windows(self):
        return {
            "pre_da": (self.t_start_da - self.t_err, self.t_start_da),
            "da": (self.t_stop_da - self.t_err, self.t_stop_da),
            "post_da": (self.t_stop_da, self.t_stop_da + self.t_err),
        }

    def mask(self, t, name):
        """Boolean selection of ``t`` in the half-open window ``[start, end)``."""
        start, end = self.windows[name]
        # small tolerance so grid points that are nominally on an edge behave
        eps = 1e-9 * max(1.0, abs(end))
        sel = (t >= start - eps) & (t < end - eps)
        if not sel.any():
            raise InvalidWindow(f"window {name} [{start}, {end}) has no samples")
        return sel


def _pair(w, z):
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    if w.shape != z.shape:
        raise ValueError(f"shape mismatch {w.shape} vs {z.shape}")
    if w.size == 0:
        raise InvalidWindow("empty window")
    w = w.reshape(w.shape[0], -1)
    return w, z.reshape(w.shape)


def mae(w, z, d_max):
    """Mean absolute error per sample, each channel scaled by ``d_max``.

    ``sum_q |w_q - z_q| / d_max_q`` averaged over the samples of the window.
    ``d_max`` is the per-channel maximum of the truth over the full horizon.
    """
    w, z = _pair(w, z)
    d_max = np.broadcast_to(np.asarray(d_max, dtype=float), (w.shape[1],))
    return float(np.mean(np.sum(np.abs(w - z) / d_max, axis=1)))


def rms(w, z):
    """``sqrt(sum (w - z)^2 / sum w^2)``; ``w`` is the reference.  NaN if ``w = 0``."""
    w, z = _pair(w, z)
    power = np.sum(w**2)
    if power == 0:
        return np.nan
    return float(np.sqrt(np.sum((w - z) ** 2) / power))


def moving_mae(w, z, d_max, n_err):
    """MAE over consecutive blocks of ``n_err`` samples (the smoothed error history)."""
    w, z = _pair(w, z)
    d_max = np.broadcast_to(np.asarray(d_max, dtype=float), (w.shape[1],))
    n_blocks = w.shape[0] // n_err
    if n_blocks == 0:
        raise InvalidWindow("series shorter than one error window")
    err = np.sum(np.abs(w - z) / d_max, axis=1)[:n_blocks * n_err]
    return err.reshape(n_blocks, n_err).mean(axis=1)


REPORT_FIELDS = (
    "biased_rms_pre", "unbiased_rms_pre",
    "biased_rms_da", "unbiased_rms_da",
    "biased_rms_post", "unbiased_rms_post",
    "true_biased_rms",
    "biased_mae_pre", "unbiased_mae_pre",
    "biased_mae_da", "unbiased_mae_da",
    "biased_mae_post", "unbiased_mae_post",
)


def report(t, truth, biased, unbiased, true_biased, windows):
    """The named errors of a run as a flat dict (keys in ``REPORT_FIELDS``).

    ``truth`` is ``d_t``, ``biased`` the ensemble-mean model observable,
    ``unbiased`` that plus the bias estimate and ``true_biased`` the model
    observable at the true parameters.  The true biased RMS is taken over
    the DA window.
    """
    t = np.asarray(t)
    d_max = np.max(truth, axis=0)
    out = {}
    for short, name in (("pre", "pre_da"), ("da", "da"), ("post", "post_da")):
        sel = windows.mask(t, name)
        out[f"biased_rms_{short}"] = rms(truth[sel], biased[sel])
        out[f"unbiased_rms_{short}"] = rms(truth[sel], unbiased[sel])
        out[f"biased_mae_{short}"] = mae(truth[sel], biased[sel], d_max)
        out[f"unbiased_mae_{short}"] = mae(truth[sel], unbiased[sel], d_max)
    sel = windows.mask(t, "da")
    out["true_biased_rms"] = rms(truth[sel], true_biased[sel])
    return {k: out[k] for k in REPORT_FIELDS}
