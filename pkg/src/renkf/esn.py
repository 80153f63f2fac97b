"""Echo state network used as a bias estimator.

The network maps an input ``i`` (the innovation, or its own previous output
in closed loop) to a bias prediction::

    r+ = tanh(sigma_in W_in [i * g; delta_r] + rho W r)
    b  = W_out [r+; 1]

``W_in`` and ``W`` are fixed sparse random matrices; only ``W_out`` is
trained, by ridge regression over many bias time series at once.  ``W`` is
stored with unit spectral radius and ``rho`` is applied at step time, so a
hyperparameter search never regenerates the matrices.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from .errors import (InvalidDataset, InvalidGrid, JacobianUndefined, NonFiniteInput,
                     TrainingFailure, WashoutRequired)

FORMAT_VERSION = 1

#: Rows of reservoir states buffered before folding them into the normal
#: equations.  Bounds training memory to ~chunk * datasets * n_r floats.
_HARVEST_CHUNK = 64


@dataclass(frozen=True)
class ReservoirConfig:
    n_reservoir: int = 100
    connectivity: float = 5.0
    sigma_in: float = 0.1
    rho: float = 0.9
    tikhonov: float = 1e-16
    delta_r: float = 0.1
    dt_esn: float = 5e-4
    seed: int = 0
    #: std of the training input noise, as a fraction of each series' std
    input_noise: float = 0.03

    def __post_init__(self):
        if self.n_reservoir < 1:
            raise ValueError("n_reservoir must be positive")
        if not self.connectivity > 0:
            raise ValueError("connectivity must be positive")
        if not self.sigma_in > 0:
            raise ValueError(f"sigma_in must be > 0, got {self.sigma_in}")
        if not self.rho > 0:
            raise ValueError(f"rho must be > 0, got {self.rho}")
        if self.tikhonov < 0 or self.input_noise < 0:
            raise ValueError("tikhonov and input_noise must be non-negative")

    def check_size(self, n_q):
        """The reservoir must be much larger than the signal: ``n_r >= 10 n_q``."""
        if self.n_reservoir < 10 * n_q:
            raise ValueError(
                f"n_reservoir={self.n_reservoir} too small for {n_q} channels "
                f"(need >= {10 * n_q})")


@dataclass
class ReservoirState:
    r: np.ndarray
    last_output: np.ndarray = None


@dataclass
class TrainedEsn:
    w_in: sparse.csr_matrix  # (n_r, n_q + 1); last column multiplies delta_r
    w: sparse.csr_matrix  # (n_r, n_r), unit spectral radius
    w_out: np.ndarray  # (n_q, n_r + 1); last column is the affine term
    g: np.ndarray  # (n_q,) input normalisation
    config: ReservoirConfig
    _pinv: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.w_in = sparse.csr_matrix(self.w_in)
        self.w = sparse.csr_matrix(self.w)
        self.w_out = np.atleast_2d(np.asarray(self.w_out, dtype=float))
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        n_r = self.w.shape[0]
        if self.w_in.shape != (n_r, self.n_q + 1) or self.w_out.shape != (self.n_q, n_r + 1):
            raise InvalidDataset("inconsistent ESN matrix shapes")

    @property
    def n_q(self):
        return self.g.size

    @property
    def n_r(self):
        return self.w.shape[0]

    def with_hyperparameters(self, sigma_in=None, rho=None):
        cfg = replace(self.config,
                      sigma_in=self.config.sigma_in if sigma_in is None else sigma_in,
                      rho=self.config.rho if rho is None else rho)
        return TrainedEsn(self.w_in, self.w, self.w_out, self.g, cfg)


# --------------------------------------------------------------------------
# construction

def spectral_radius(w):
    """Largest eigenvalue modulus of a (sparse or dense) square matrix."""
    w = w.toarray() if sparse.issparse(w) else np.asarray(w)
    return float(np.abs(np.linalg.eigvals(w)).max())


def generate_reservoir(config, n_q):
    """Random input and reservoir matrices for ``n_q`` input channels.

    Every reservoir neuron reads exactly one input column (one of the
    ``n_q`` channels or the ``delta_r`` bias channel) with a weight drawn
    from U(-1, 1).  ``W`` has on average ``connectivity`` nonzeros per row,
    also U(-1, 1), and is rescaled to unit spectral radius.
    """
    config.check_size(n_q)
    n_r = config.n_reservoir
    rng = np.random.default_rng(config.seed)

    cols = rng.integers(0, n_q + 1, size=n_r)
    w_in = sparse.csr_matrix((rng.uniform(-1, 1, n_r), (np.arange(n_r), cols)),
                             shape=(n_r, n_q + 1))

    density = min(1.0, config.connectivity / n_r)
    while True:
        w = sparse.random(n_r, n_r, density=density, format="csr", random_state=rng,
                          data_rvs=lambda k: rng.uniform(-1, 1, k))
        radius = spectral_radius(w)
        # a nilpotent draw cannot be normalised; redraw
        if radius > 1e-8:
            break
    return w_in, (w / radius).tocsr()


# --------------------------------------------------------------------------
# stepping

def _preactivation(esn, r, u):
    """``sigma_in W_in [u g; delta_r] + rho W r`` for row-stacked ``r`` and ``u``."""
    cfg = esn.config
    drive = np.concatenate([u * esn.g, np.full(u.shape[:-1] + (1,), cfg.delta_r)], axis=-1)
    return cfg.sigma_in * (esn.w_in @ drive.T).T + cfg.rho * (esn.w @ r.T).T


def _readout(esn, r):
    return r @ esn.w_out[:, :-1].T + esn.w_out[:, -1]


def _advance(esn, r, u):
    """One step for a batch: ``r`` is ``(B, n_r)``, ``u`` is ``(B, n_q)``."""
    r_new = np.tanh(_preactivation(esn, r, u))
    return r_new, _readout(esn, r_new)


def step_open_loop(esn, state, u):
    """Drive the reservoir with an external input; returns ``(state, output)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("non-finite ESN input")
    if u.shape != (esn.n_q,):
        raise InvalidDataset(f"input must have shape ({esn.n_q},), got {u.shape}")
    r, out = _advance(esn, state.r[None, :], u[None, :])
    return ReservoirState(r[0], out[0]), out[0]


def step_closed_loop(esn, state):
    """Feed the previous output back as the input."""
    if state.last_output is None:
        raise WashoutRequired("closed-loop step needs a previous output; run washout first")
    return step_open_loop(esn, state, state.last_output)


def washout(esn, inputs, r0=None):
    """Synchronise a reservoir (zero unless ``r0`` is given) with ``inputs``."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.size == 0:
        raise WashoutRequired("washout needs at least one input sample")
    state = ReservoirState(np.zeros(esn.n_r) if r0 is None else np.array(r0, dtype=float))
    for u in inputs:
        state, _ = step_open_loop(esn, state, u)
    return state


# --------------------------------------------------------------------------
# training

def _check_datasets(datasets):
    if len(datasets) == 0:
        raise InvalidDataset("need at least one dataset")
    arrs = [np.asarray(d, dtype=float) for d in datasets]
    arrs = [a[:, None] if a.ndim == 1 else a for a in arrs]
    n_q = arrs[0].shape[1]
    for a in arrs:
        if a.ndim != 2 or a.shape[1] != n_q:
            raise InvalidDataset("every dataset must be (n_samples, n_q) with the same n_q")
        if a.shape[0] < 2:
            raise InvalidDataset("every dataset needs at least two samples")
        if not np.all(np.isfinite(a)):
            raise InvalidDataset("non-finite training data")
    return arrs, n_q


def input_normalisation(datasets):
    """``g = 1 / (max - min)`` per channel over all datasets pooled."""
    stacked = np.concatenate(datasets, axis=0)
    span = stacked.max(axis=0) - stacked.min(axis=0)
    if np.any(span <= 0):
        raise InvalidDataset("a training channel is constant; cannot normalise")
    return 1.0 / span


def noisy_inputs(datasets, fraction, rng):
    """Add N(0, fraction * std) to every channel of every dataset."""
    return [d + rng.standard_normal(d.shape) * (fraction * d.std(axis=0)) for d in datasets]


def _harvest(esn, inputs, targets, record_at=()):
    """Accumulate the normal equations over all datasets in open loop.

    All datasets advance together (one row each, in dataset order).  Input
    ``k - 1`` produces reservoir state ``k``, which is regressed on target
    ``k``; the zero initial state is skipped.  Returns ``(RR^T, RB^T, saved)``
    where ``saved[k]`` holds the ``(n_sets, n_r)`` states at step ``k`` for
    every ``k`` in ``record_at``.
    """
    lengths = {len(d) for d in inputs}
    if len(lengths) != 1:
        return _harvest_ragged(esn, inputs, targets, record_at)
    u = np.stack(inputs, axis=1)  # (T, D, n_q)
    b = np.stack(targets, axis=1)
    n_t, n_sets = u.shape[:2]
    n_r = esn.n_r
    rr = np.zeros((n_r + 1, n_r + 1))
    rb = np.zeros((n_r + 1, esn.n_q))
    record_at = set(record_at)
    saved = {}
    r = np.zeros((n_sets, n_r))
    buf_r = np.ones((_HARVEST_CHUNK, n_sets, n_r + 1))
    buf_b = np.empty((_HARVEST_CHUNK, n_sets, esn.n_q))
    fill = 0
    for k in range(1, n_t):
        r = np.tanh(_preactivation(esn, r, u[k - 1]))
        if k in record_at:
            saved[k] = r.copy()
        buf_r[fill, :, :n_r] = r
        buf_b[fill] = b[k]
        fill += 1
        if fill == _HARVEST_CHUNK or k == n_t - 1:
            flat_r = buf_r[:fill].reshape(-1, n_r + 1)
            rr += flat_r.T @ flat_r
            rb += flat_r.T @ buf_b[:fill].reshape(-1, esn.n_q)
            fill = 0
    return rr, rb, saved


def _harvest_ragged(esn, inputs, targets, record_at):
    if record_at:
        raise InvalidDataset("recording states needs equal-length series")
    rr = rb = 0.0
    for u, b in zip(inputs, targets):
        a, c, _ = _harvest(esn, [u], [b])
        rr, rb = rr + a, rb + c
    return rr, rb, {}


def _solve_readout(rr, rb, tikhonov):
    a = rr + tikhonov * np.eye(rr.shape[0])
    try:
        w_out_t = np.linalg.solve(a, rb)
    except np.linalg.LinAlgError as exc:
        raise TrainingFailure(f"singular normal matrix: {exc}") from None
    if not np.all(np.isfinite(w_out_t)):
        raise TrainingFailure("non-finite readout")
    return w_out_t.T


def train(reservoir, datasets, config, g=None, inputs=None):
    """Ridge-regression readout over all ``datasets``.

    ``reservoir`` is ``(w_in, w)``.  The network is driven by noisy copies of
    the data (a dedicated stream seeded from ``config.seed``) and fitted to
    the clean data.  Pass ``inputs`` to reuse pre-drawn noisy inputs and
    ``g`` to reuse a normalisation.
    """
    targets, n_q = _check_datasets(datasets)
    w_in, w = reservoir
    if g is None:
        g = input_normalisation(targets)
    if inputs is None:
        rng = np.random.default_rng([config.seed, 1])
        inputs = noisy_inputs(targets, config.input_noise, rng)
    esn = TrainedEsn(w_in, w, np.zeros((n_q, w.shape[0] + 1)), g, config)
    rr, rb, _ = _harvest(esn, inputs, targets)
    esn.w_out = _solve_readout(rr, rb, config.tikhonov)
    return esn


# --------------------------------------------------------------------------
# Jacobians

def _tanh_slope(esn, state, u):
    pre = _preactivation(esn, state.r[None, :], np.atleast_1d(u)[None, :])[0]
    return 1.0 - np.tanh(pre) ** 2


def jacobian_open_loop(esn, state, u):
    """Sensitivity of the next bias to the model observables, ``-db/di``.

    The input is ``i = d - M psi``, hence the minus sign.  Evaluated with
    the reservoir at ``state.r`` and input ``u``.
    """
    t = _tanh_slope(esn, state, u)
    w_in1 = esn.w_in[:, :-1].toarray()
    return -esn.w_out[:, :-1] @ (t[:, None] * (esn.config.sigma_in * w_in1 * esn.g))


def readout_pinv(esn):
    """Right pseudo-inverse of the state part of ``W_out``, ``(n_r, n_q)``."""
    if esn._pinv is None:
        w1 = esn.w_out[:, :-1]
        if np.linalg.matrix_rank(w1) < esn.n_q:
            raise JacobianUndefined("readout is rank deficient")
        esn._pinv = np.linalg.pinv(w1)
    return esn._pinv


def closed_loop_reservoir(esn, state, b):
    """Reservoir state implied by output ``b`` when moving along the readout."""
    return state.r + readout_pinv(esn) @ (np.asarray(b) - state.last_output)


def jacobian_closed_loop(esn, state):
    """``db(t+1)/db(t)`` in closed loop, with the reservoir tied to the output.

    The reservoir is treated as a function of the output through the
    readout pseudo-inverse, which adds ``rho W pinv(W_out)`` to the input
    path.
    """
    if state.last_output is None:
        raise WashoutRequired("closed-loop Jacobian needs a previous output")
    cfg = esn.config
    t = _tanh_slope(esn, state, state.last_output)
    w_in1 = esn.w_in[:, :-1].toarray()
    inner = cfg.sigma_in * w_in1 * esn.g + cfg.rho * (esn.w @ readout_pinv(esn))
    return esn.w_out[:, :-1] @ (t[:, None] * inner)


# --------------------------------------------------------------------------
# hyperparameter selection

@dataclass
class ValidationResult:
    sigma_in: float
    rho: float
    mse: float
    #: every evaluated (sigma_in, rho, mse), in grid order
    table: list


def hyper_grid(sigma_range, rho_range, n=4):
    """``n x n`` candidates: log-spaced ``sigma_in``, linear ``rho``."""
    sig = np.geomspace(*sigma_range, n)
    rho = np.linspace(*rho_range, n)
    return [(float(s), float(r)) for s in sig for r in rho]


def fold_starts(n_samples, n_val, n_folds):
    """Evenly spaced validation start indices, after one fold of warm-up."""
    last = n_samples - n_val - 1
    if n_folds < 1 or last <= n_val:
        raise InvalidDataset(f"series of {n_samples} samples too short for "
                             f"{n_folds} folds of {n_val}")
    return np.unique(np.linspace(n_val, last, n_folds).astype(int))


def _closed_loop_error(esn, saved, targets, starts, n_val):
    errs = []
    for k in starts:
        r = saved[k]  # (D, n_r), state at sample k
        b = _readout(esn, r)
        sq = 0.0
        for j in range(1, n_val + 1):
            r, b = _advance(esn, r, b)
            sq += np.sum((b - targets[:, k + j]) ** 2)
        errs.append(sq / (n_val * targets.shape[0] * targets.shape[2]))
    return float(np.mean(errs))


def recycle_validation(config, datasets, grid, n_folds=4, n_val=None, t_val=None,
                       reservoir=None):
    """Pick ``(sigma_in, rho)`` by closed-loop error on recycled training folds.

    For each candidate the readout is trained on all of ``datasets``; the
    network is then restarted in closed loop from its open-loop reservoir
    state at ``n_folds`` evenly spaced points of each series and scored by
    the mean square error over the next ``n_val`` samples.  Ties go to the
    smaller ``sigma_in``, then the smaller ``rho``.
    """
    if not grid:
        raise InvalidGrid("empty hyperparameter grid")
    targets, n_q = _check_datasets(datasets)
    if n_val is None:
        if t_val is None:
            raise ValueError("give n_val or t_val")
        n_val = max(1, int(round(t_val / config.dt_esn)))
    if len({len(t) for t in targets}) != 1:
        raise InvalidDataset("recycle validation needs equal-length series")
    starts = fold_starts(len(targets[0]), n_val, n_folds)
    if reservoir is None:
        reservoir = generate_reservoir(config, n_q)
    g = input_normalisation(targets)
    rng = np.random.default_rng([config.seed, 1])
    inputs = noisy_inputs(targets, config.input_noise, rng)
    stacked = np.stack(targets, axis=0)

    table = []
    for sigma_in, rho in grid:
        cfg = replace(config, sigma_in=sigma_in, rho=rho)
        esn = TrainedEsn(reservoir[0], reservoir[1], np.zeros((n_q, cfg.n_reservoir + 1)), g, cfg)
        rr, rb, saved = _harvest(esn, inputs, targets, record_at=starts)
        try:
            esn.w_out = _solve_readout(rr, rb, cfg.tikhonov)
            with np.errstate(over="ignore", invalid="ignore"):
                mse = _closed_loop_error(esn, saved, stacked, starts, n_val)
        except TrainingFailure:
            mse = np.inf
        if not np.isfinite(mse):
            mse = np.inf
        table.append((sigma_in, rho, mse))
    best = min(table, key=lambda row: (row[2], row[0], row[1]))
    return ValidationResult(best[0], best[1], best[2], table)


# --------------------------------------------------------------------------
# persistence

def _triplets(m):
    coo = sparse.coo_matrix(m)
    return np.stack([coo.row, coo.col]).astype(np.int64), coo.data, np.array(coo.shape)


def save_esn(path, esn):
    """Write ``esn`` to a single ``.npz`` file (sparse matrices as triplets)."""
    cfg = {k: getattr(esn.config, k) for k in esn.config.__dataclass_fields__}
    in_idx, in_val, in_shape = _triplets(esn.w_in)
    w_idx, w_val, w_shape = _triplets(esn.w)
    with open(path, "wb") as fh:
        np.savez(fh, format_version=FORMAT_VERSION, config=json.dumps(cfg, sort_keys=True),
                 g=esn.g, w_out=esn.w_out,
                 w_in_index=in_idx, w_in_value=in_val, w_in_shape=in_shape,
                 w_index=w_idx, w_value=w_val, w_shape=w_shape)


def load_esn(path):
    with np.load(path, allow_pickle=False) as f:
        version = int(f["format_version"])
        if version != FORMAT_VERSION:
            raise InvalidDataset(f"unsupported network format version {version}")
        cfg = ReservoirConfig(**json.loads(str(f["config"])))
        w_in = sparse.csr_matrix((f["w_in_value"], tuple(f["w_in_index"])),
                                 shape=tuple(f["w_in_shape"]))
        w = sparse.csr_matrix((f["w_value"], tuple(f["w_index"])), shape=tuple(f["w_shape"]))
        return TrainedEsn(w_in, w, f["w_out"], f["g"], cfg)
