"""Chebyshev collocation on the unit interval."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidGrid


@dataclass(frozen=True)
class ChebyshevGrid:
    """Collocation points ``X_i = 0.5 (1 - cos(i pi / n_c))`` on [0, 1].

    ``diff_matrix`` differentiates with respect to ``X`` (not the usual
    [-1, 1] variable), and ``bary_weights`` are the barycentric
    interpolation weights for these nodes.
    """

    points: np.ndarray
    diff_matrix: np.ndarray
    bary_weights: np.ndarray

    @property
    def n_c(self):
        return len(self.points) - 1

    def interpolation_row(self, x):
        """Row vector(s) ``l`` with ``l @ f`` = interpolant of ``f`` at ``x``.

        ``x`` may be a scalar or an array; the result has shape
        ``x.shape + (n_c + 1,)``.
        """
        x = np.asarray(x, dtype=float)
        diff = x[..., None] - self.points
        exact = diff == 0.0
        diff = np.where(exact, 1.0, diff)
        terms = self.bary_weights / diff
        rows = terms / terms.sum(axis=-1, keepdims=True)
        hit = exact.any(axis=-1)
        if np.any(hit):
            rows = np.where(hit[..., None], exact.astype(float), rows)
        return rows


def chebyshev_grid(n_c):
    """Build the ``n_c + 1`` point Chebyshev grid mapped to [0, 1]."""
    if int(n_c) != n_c or n_c < 2:
        raise InvalidGrid(f"need n_c >= 2, got {n_c}")
    n_c = int(n_c)
    i = np.arange(n_c + 1)
    x = np.cos(np.pi * i / n_c)
    c = np.where((i == 0) | (i == n_c), 2.0, 1.0) * (-1.0) ** i
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n_c + 1))
    d -= np.diag(d.sum(axis=1))
    # X = (1 - x) / 2  =>  d/dX = -2 d/dx
    points = 0.5 * (1.0 - x)
    points[0], points[-1] = 0.0, 1.0
    weights = (-1.0) ** i * np.where((i == 0) | (i == n_c), 0.5, 1.0)
    return ChebyshevGrid(points=points, diff_matrix=-2.0 * d, bary_weights=weights)
