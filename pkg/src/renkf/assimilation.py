"""Twin experiments: train the bias network, then assimilate with the r-EnKF.

All times are handled as integer numbers of model steps ``dt``; ``dt_esn``
and ``dt_d`` must be integer multiples of ``dt``.  The timeline of a run is

* ``t = 0``: the prior state ``phi0`` (the guess model spun up for
  ``t_spinup``); truth and ensemble both start here.
* ``[0, t_train)``: observations used to build the bias training set.
* ``t_start_da - n_wash dt_esn - 2 dt_d``: the bias network is washed out
  with ``n_wash`` innovations of the free-running ensemble.
* ``[t_start_da, t_stop_da)``: one analysis every ``dt_d``.
* ``[t_stop_da, t_stop_da + t_post]``: filter removed; ensemble and
  network keep forecasting.

Between analyses the network runs in closed loop and its output is held
constant over each ``dt_esn`` interval.
"""

import time as _time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import esn as esn_mod
from .ensemble import AugmentedState, ensemble_mean, init_ensemble
from .errors import (DimensionMismatch, InsufficientWashoutData, InvalidConfig, RenkfError,
                     StageError)
from .esn import ReservoirConfig, ReservoirState
from .filters import FilterConfig, perturb_observations, reject_inflate, renkf_analysis
from .metrics import ErrorWindows, report
from .models import Rijke, VanDerPol, integrate
from .models import rijke as rijke_mod
from .models import vdp as vdp_mod
from .training import TrainingConfig, build_training_set
from .truth import BiasSpec, NoiseSpec, generate_truth


def make_model(name):
    if name == "vdp":
        return VanDerPol()
    if name == "rijke":
        return Rijke()
    raise InvalidConfig(f"unknown model {name!r}; expected 'vdp' or 'rijke'")


def default_parameters(name):
    """``(true_alpha, guess_alpha)`` for a model family."""
    model = make_model(name)
    mod = vdp_mod if name == "vdp" else rijke_mod
    return (tuple(model.params_vector(mod.TRUE_PARAMS)),
            tuple(model.params_vector(mod.GUESS_PARAMS)))


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "rijke"
    true_alpha: tuple = None
    guess_alpha: tuple = None
    bias: BiasSpec = field(default_factory=BiasSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    dt: float = 1e-4
    dt_esn: float = 2e-4
    dt_d: float = 2e-3

    m: int = 50
    sigma_phi: float = 0.2
    sigma_alpha: float = 0.2
    gamma: float = 1.0
    #: observation error std as a fraction of mean|d|; defaults to the noise level
    sigma_dd: float = None
    inflation_accept: float = 1.002
    inflation_reject: float = 1.05
    #: draw the prior parameters and inflate them only within the physical limits
    bounded_params: bool = True
    bias_aware: bool = True

    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    sigma_in_range: tuple = (1e-5, 1e-2)
    rho_range: tuple = (0.7, 1.05)
    grid_size: int = 4
    n_folds: int = 4
    t_val: float = 0.02
    training: TrainingConfig = field(default_factory=TrainingConfig)
    n_wash: int = 50

    t_spinup: float = 1.0
    t_start_da: float = 1.0
    t_stop_da: float = 2.0
    t_post: float = 0.1
    t_err: float = 0.02
    seed: int = 0
    #: overrides the ensemble stream only (sweeps give each cell its own)
    ensemble_seed: int = None

    def __post_init__(self):
        true_a, guess_a = default_parameters(self.model)
        if self.true_alpha is None:
            object.__setattr__(self, "true_alpha", true_a)
        if self.guess_alpha is None:
            object.__setattr__(self, "guess_alpha", guess_a)
        object.__setattr__(self, "true_alpha", tuple(float(a) for a in self.true_alpha))
        object.__setattr__(self, "guess_alpha", tuple(float(a) for a in self.guess_alpha))
        self.validate()

    # -- time bookkeeping -------------------------------------------------
    def steps(self, t):
        return int(round(t / self.dt))

    @property
    def n_esn(self):
        return self.steps(self.dt_esn)

    @property
    def n_d(self):
        return self.steps(self.dt_d)

    @property
    def k_wash(self):
        return self.steps(self.t_start_da) - self.n_wash * self.n_esn - 2 * self.n_d

    @property
    def n_analyses(self):
        return int(np.floor((self.t_stop_da - self.t_start_da) / self.dt_d + 1e-9))

    @property
    def t_end(self):
        return self.t_stop_da + self.t_post

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise InvalidConfig(msg)

        need(self.dt > 0, "dt must be positive")
        for name in ("dt_esn", "dt_d"):
            v = getattr(self, name)
            need(v > 0 and abs(v / self.dt - round(v / self.dt)) < 1e-6,
                 f"{name} must be a positive integer multiple of dt")
        need(self.n_d % self.n_esn == 0, "dt_d must be an integer multiple of dt_esn")
        need(self.m >= 2, "m must be >= 2")
        need(self.gamma >= 0, "gamma must be >= 0")
        need(self.n_wash >= 1, "n_wash must be >= 1")
        need(self.k_wash >= 0,
             "t_start_da must leave room for n_wash * dt_esn + 2 dt_d of washout")
        need(self.t_stop_da >= self.t_start_da, "t_stop_da must not precede t_start_da")
        need(self.t_post >= 0 and self.t_err > 0, "t_post must be >= 0 and t_err > 0")
        need(self.training.t_train <= self.t_end, "training window exceeds the run")
        need(len(self.true_alpha) == len(self.guess_alpha) == make_model(self.model).n_alpha,
             "parameter vectors do not match the model")
        sigma_dd = self.noise.level if self.sigma_dd is None else self.sigma_dd
        need(sigma_dd > 0, "observation error level must be positive (set sigma_dd)")

    def as_dict(self):
        return asdict(self)

    def derived_seeds(self):
        """Independent integer seeds for each random component of a run."""
        names = ("noise", "ensemble", "training", "reservoir")
        states = np.random.SeedSequence(self.seed).generate_state(len(names))
        seeds = dict(zip(names, (int(s) for s in states)))
        if self.ensemble_seed is not None:
            seeds["ensemble"] = int(self.ensemble_seed)
        return seeds


def vdp_config(**overrides):
    """Van der Pol defaults."""
    base = dict(
        model="vdp", bias=BiasSpec("vdp_cosine"), noise=NoiseSpec("gaussian_white", 0.01),
        dt=1e-4, dt_esn=5e-4, dt_d=3e-3, m=10, sigma_phi=0.25, sigma_alpha=0.25,
        gamma=10.0,
        reservoir=ReservoirConfig(n_reservoir=100, dt_esn=5e-4),
        sigma_in_range=(1e-5, 1.0), rho_range=(0.7, 1.05), t_val=0.01,
        training=TrainingConfig(l_sets=10, sigma_l=0.5, t_train=1.0, dt_esn=5e-4),
        n_wash=30, t_spinup=1.0, t_start_da=2.0, t_stop_da=2.5, t_post=0.1, t_err=0.04,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def rijke_config(**overrides):
    """Thermoacoustic (Rijke tube) defaults."""
    base = dict(
        model="rijke", bias=BiasSpec("nonlinear_periodic"),
        noise=NoiseSpec("gaussian_white", 0.01),
        dt=1e-4, dt_esn=2e-4, dt_d=2e-3, m=50, sigma_phi=0.2, sigma_alpha=0.2, gamma=2.75,
        reservoir=ReservoirConfig(n_reservoir=500, dt_esn=2e-4),
        sigma_in_range=(1e-5, 1e-2), rho_range=(0.7, 1.05), t_val=0.02,
        training=TrainingConfig(l_sets=50, sigma_l=0.2, t_train=0.5, dt_esn=2e-4),
        n_wash=50, t_spinup=1.0, t_start_da=1.0, t_stop_da=2.0, t_post=0.1, t_err=0.02,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


PRESETS = {"vdp": vdp_config, "rijke": rijke_config}


# --------------------------------------------------------------------------
# records

@dataclass
class ExperimentRecord:
    t: np.ndarray  # (n_t,) every model step
    truth: np.ndarray  # d_t
    true_biased: np.ndarray  # M psi_t (model at true parameters)
    observations: np.ndarray  # noisy d_t at every step (the stream)
    biased: np.ndarray  # ensemble-mean M psi
    spread: np.ndarray  # ensemble std of M psi
    bias: np.ndarray  # network estimate, zero before washout
    t_analysis: np.ndarray  # (n_a,)
    innovation: np.ndarray  # d - M mean(psi_a)
    forecast_innovation: np.ndarray  # d - M mean(psi_f)
    bias_at_analysis: np.ndarray  # b_f used by the analysis
    alpha_mean: np.ndarray  # (n_a, n_alpha) after the analysis
    alpha_std: np.ndarray
    accepted: np.ndarray  # (n_a,) bool
    windows: ErrorWindows
    labels: list
    param_names: tuple
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    hyperparameters: dict = field(default_factory=dict)

    @property
    def unbiased(self):
        return self.biased + self.bias


@dataclass
class AnalysisRow:
    t: float
    innovation: np.ndarray
    forecast_innovation: np.ndarray
    bias: np.ndarray
    alpha_mean: np.ndarray
    alpha_std: np.ndarray
    accepted: bool


# --------------------------------------------------------------------------
# building blocks

def observation_covariance(obs, sigma_dd):
    """Diagonal ``C_dd`` with std ``sigma_dd * mean|d|`` per channel."""
    scale = sigma_dd * np.mean(np.abs(obs), axis=0)
    return np.diag(scale**2)


class _Forecaster:
    """Advances the ensemble and keeps the recorded mean/std observables."""

    def __init__(self, model, ensemble, n_total, dt):
        self.model = model
        self.ens = ensemble
        self.dt = dt
        self.k = 0
        n_q = ensemble.n_q
        self.biased = np.full((n_total + 1, n_q), np.nan)
        self.spread = np.full((n_total + 1, n_q), np.nan)
        self._store(0, ensemble.observables[None])

    def _store(self, k, q):
        self.biased[k:k + len(q)] = q.mean(axis=1)
        self.spread[k:k + len(q)] = q.std(axis=1, ddof=1)

    def advance(self, n_steps):
        if n_steps <= 0:
            return
        phi, traj = integrate(self.model, self.ens.phi, self.ens.alpha, self.dt, n_steps)
        q = self.model.observe(traj)
        self.ens = self.ens.with_members(
            np.concatenate([phi, self.ens.alpha, q[-1]], axis=1))
        self._store(self.k + 1, q)
        self.k += n_steps

    @property
    def mean_observables(self):
        return ensemble_mean(self.ens)[-self.ens.n_q:]


def run_washout(forecaster, network, obs_stream, n_wash, n_esn):
    """Feed ``n_wash`` innovations of the free-running ensemble to the network.

    ``obs_stream`` is indexed by model step.  Returns the synchronised
    reservoir state; its ``last_output`` is the bias at the current time.
    """
    inputs = []
    for _ in range(n_wash):
        k = forecaster.k
        if k >= len(obs_stream):
            raise InsufficientWashoutData(f"no observation at step {k} for washout")
        inputs.append(obs_stream[k] - forecaster.mean_observables)
        forecaster.advance(n_esn)
    return esn_mod.washout(network, np.array(inputs))


def assimilation_step(ensemble, network, state, d, filter_config, model, bias_aware=True):
    """One analysis: Jacobian, perturbed observations, r-EnKF, reject-inflate.

    Returns ``(ensemble, state, row)``; the network is re-initialised with
    one open-loop step on the analysis innovation.
    """
    n_q = ensemble.n_q
    if bias_aware:
        b_f = state.last_output
        jac = esn_mod.jacobian_open_loop(network, state, b_f)
    else:
        b_f = np.zeros(n_q)
        jac = np.zeros((n_q, n_q))
    d_j = perturb_observations(d, filter_config.c_dd, ensemble.m, ensemble.rngs)
    analysis = renkf_analysis(ensemble, d_j, b_f, jac, filter_config)
    analysis = _consistent(analysis, model)
    ensemble_out, accepted = reject_inflate(analysis, ensemble, filter_config)
    ensemble_out = _consistent(ensemble_out, model)

    y_f = ensemble_mean(ensemble)[-n_q:]
    y_a = ensemble_mean(ensemble_out)[-n_q:]
    innovation = d - y_a
    if bias_aware:
        state, _ = esn_mod.step_open_loop(network, state, innovation)
    alpha = ensemble_out.alpha
    row = AnalysisRow(t=np.nan, innovation=innovation, forecast_innovation=d - y_f, bias=b_f,
                      alpha_mean=alpha.mean(axis=0), alpha_std=alpha.std(axis=0, ddof=1),
                      accepted=accepted)
    return ensemble_out, state, row


def _consistent(ens, model):
    """Re-impose model constraints and re-derive the observables block."""
    phi = model.project(ens.phi.copy(), ens.alpha)
    members = ens.members.copy()
    members[:, :ens.n_phi] = phi
    members[:, ens.n_phi + ens.n_alpha:] = model.observe(phi)
    return ens.with_members(members)


# --------------------------------------------------------------------------
# pipeline

@dataclass
class PreparedRun:
    """Everything a run needs before the ensemble starts: shared across gammas."""

    config: ExperimentConfig
    model: object
    phi0: np.ndarray
    truth: object
    observations: np.ndarray
    network: object
    hyperparameters: dict
    timings: dict


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (RenkfError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc


def train_network(config, model, phi0, observations, seeds=None):
    """Training set, hyperparameter search and readout fit.

    Returns ``(network, info)``; ``info`` carries the selected
    hyperparameters and the validation table.
    """
    seeds = seeds or config.derived_seeds()
    tcfg = replace(config.training, dt_esn=config.dt_esn, seed=seeds["training"])
    n_esn = config.n_esn
    obs = observations[::n_esn]
    tset = build_training_set(model, phi0, np.array(config.guess_alpha), obs, tcfg, config.dt)
    rcfg = replace(config.reservoir, dt_esn=config.dt_esn, seed=seeds["reservoir"])
    reservoir = esn_mod.generate_reservoir(rcfg, model.n_q)
    info = {}
    if config.grid_size > 1:
        grid = esn_mod.hyper_grid(config.sigma_in_range, config.rho_range, config.grid_size)
        rv = esn_mod.recycle_validation(rcfg, tset.series, grid, n_folds=config.n_folds,
                                        t_val=config.t_val, reservoir=reservoir)
        rcfg = replace(rcfg, sigma_in=rv.sigma_in, rho=rv.rho)
        info["validation_table"] = rv.table
    else:
        rcfg = replace(rcfg, sigma_in=config.sigma_in_range[0], rho=config.rho_range[0])
    network = esn_mod.train(reservoir, tset.series, rcfg)
    info.update(sigma_in=rcfg.sigma_in, rho=rcfg.rho, training_retries=int(tset.retries.sum()))
    return network, info


def prepare(config, network=None):
    """Truth, observations and (unless given) the trained network."""
    timings = {}
    seeds = config.derived_seeds()
    model = make_model(config.model)
    guess = np.array(config.guess_alpha)

    t0 = _time.perf_counter()
    phi0 = model.initial_state()
    if config.t_spinup > 0:
        phi0, _ = _stage("spinup", integrate, model, phi0, guess, config.dt,
                         config.steps(config.t_spinup))
    truth = _stage("truth", generate_truth, model, config.true_alpha, config.bias,
                   config.t_end, config.dt, phi0=phi0)
    noise = replace(config.noise, seed=seeds["noise"])
    observations = _stage("noise", noise.apply, truth.d)
    timings["truth"] = _time.perf_counter() - t0

    hyper = {}
    if network is None and config.bias_aware:
        t0 = _time.perf_counter()
        network, hyper = _stage("training", train_network, config, model, phi0,
                                observations, seeds)
        timings["training"] = _time.perf_counter() - t0
    elif network is not None:
        if network.n_q != model.n_q:
            raise DimensionMismatch(
                f"network has {network.n_q} channels, model observes {model.n_q}")
        hyper = {"sigma_in": network.config.sigma_in, "rho": network.config.rho}
    return PreparedRun(config, model, phi0, truth, observations, network, hyper, timings)


def run_experiment(config, network=None, prepared=None):
    """Full pipeline: truth, training, washout, assimilation, free forecast.

    A pre-trained ``network`` or a ``prepared`` run (from :func:`prepare`,
    possibly with a different ``gamma``) skips the shared stages.
    """
    if prepared is None:
        prepared = prepare(config, network)
    cfg = config
    model, truth, obs = prepared.model, prepared.truth, prepared.observations
    network = prepared.network
    seeds = cfg.derived_seeds()
    timings = dict(prepared.timings)
    n_q = model.n_q
    n_total = cfg.steps(cfg.t_end)

    mean_state = AugmentedState(prepared.phi0, np.array(cfg.guess_alpha), model.observe(prepared.phi0))
    bounds = model.bounds_array() if cfg.bounded_params else None
    ens = _stage("ensemble", init_ensemble, mean_state, cfg.sigma_phi, cfg.sigma_alpha, cfg.m,
                 seeds["ensemble"], param_bounds=bounds)
    ens = _consistent(ens, model)
    sigma_dd = cfg.noise.level if cfg.sigma_dd is None else cfg.sigma_dd
    n_tr = cfg.steps(cfg.training.t_train)
    c_dd = observation_covariance(obs[:max(n_tr, 1)], sigma_dd)
    fcfg = FilterConfig(c_dd=c_dd, gamma=cfg.gamma, inflation_accept=cfg.inflation_accept,
                        inflation_reject=cfg.inflation_reject, param_bounds=model.bounds_array(),
                        bounded_params=cfg.bounded_params)

    fc = _Forecaster(model, ens, n_total, cfg.dt)
    bias = np.zeros((n_total + 1, n_q))
    rows = []
    t0 = _time.perf_counter()

    def run_free(n_steps, state):
        """Forecast ``n_steps`` with the network in closed loop (if active)."""
        done = 0
        while done < n_steps:
            chunk = min(cfg.n_esn, n_steps - done)
            if state is not None:
                bias[fc.k:fc.k + chunk] = state.last_output
            _stage("forecast", fc.advance, chunk)
            done += chunk
            if state is not None and chunk == cfg.n_esn:
                state, _ = esn_mod.step_closed_loop(network, state)
        if state is not None:
            bias[fc.k] = state.last_output
        return state

    # free run up to the washout
    _stage("forecast", fc.advance, cfg.k_wash)
    state = None
    if cfg.bias_aware:
        state = _stage("washout", run_washout, fc, network, obs, cfg.n_wash, cfg.n_esn)
        bias[fc.k] = state.last_output
    state = run_free(cfg.steps(cfg.t_start_da) - fc.k, state)

    for _ in range(cfg.n_analyses):
        k = fc.k
        ens_a, state, row = _stage("analysis", assimilation_step, fc.ens, network, state,
                                   obs[k], fcfg, model, cfg.bias_aware)
        row.t = k * cfg.dt
        rows.append(row)
        fc.ens = ens_a
        fc._store(k, ens_a.observables[None])
        if state is None:
            run_free(cfg.n_d, None)
            continue
        # b_f holds until the open-loop step's output takes over one dt_esn later
        bias[k:k + cfg.n_esn] = row.bias
        _stage("forecast", fc.advance, cfg.n_esn)
        bias[fc.k] = state.last_output
        state = run_free(cfg.n_d - cfg.n_esn, state)
    timings["assimilation"] = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    state = run_free(n_total - fc.k, state)
    timings["post"] = _time.perf_counter() - t0

    t = np.arange(n_total + 1) * cfg.dt
    windows = ErrorWindows(cfg.t_err, cfg.t_start_da, cfg.t_stop_da)
    rec = ExperimentRecord(
        t=t, truth=truth.d, true_biased=truth.observables, observations=obs,
        biased=fc.biased, spread=fc.spread, bias=bias,
        t_analysis=np.array([r.t for r in rows]),
        innovation=_stack(rows, "innovation", n_q),
        forecast_innovation=_stack(rows, "forecast_innovation", n_q),
        bias_at_analysis=_stack(rows, "bias", n_q),
        alpha_mean=_stack(rows, "alpha_mean", model.n_alpha),
        alpha_std=_stack(rows, "alpha_std", model.n_alpha),
        accepted=np.array([r.accepted for r in rows], dtype=bool),
        windows=windows, labels=model.observable_labels(), param_names=model.param_names,
        timings=timings, hyperparameters=dict(prepared.hyperparameters),
    )
    rec.metrics = _stage("metrics", report, t, rec.truth, rec.biased, rec.unbiased,
                         rec.true_biased, windows)
    return rec


def _stack(rows, name, width):
    if not rows:
        return np.empty((0, width))
    return np.array([getattr(r, name) for r in rows])
