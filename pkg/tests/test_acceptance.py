"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints (and records for the session summary) a single line
``criterion N: PASS|FAIL ...``.  Criteria 6-9 run full experiments and take
several minutes; select them with ``-m slow`` or skip with ``-m "not slow"``.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, sine_datasets
from oracles import dense_ridge, minimise_regularised_cost, random_problem
from renkf import esn
from renkf.assimilation import prepare, rijke_config, run_experiment, vdp_config
from renkf.cli import main
from renkf.esn import ReservoirConfig, ReservoirState
from renkf.filters import FilterConfig, enkf_analysis, renkf_analysis
from renkf.models.rijke import Rijke
from renkf.truth import BiasSpec, NoiseSpec, add_colored_noise, generate_truth, snr_db

slow = pytest.mark.slow


def _report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# -- fast oracles -----------------------------------------------------------------

def test_criterion_1_reduction_identities():
    t0 = time.perf_counter()
    worst_plain = worst_corrected = 0.0
    for seed in range(100):
        p = random_problem(np.random.default_rng(seed))
        zero_j = np.zeros((p["n_q"], p["n_q"]))
        cfg = FilterConfig(c_dd=p["c_dd"], gamma=p["gamma"], c_bb=p["c_bb"])
        a = renkf_analysis(p["x"], p["d"], np.zeros(p["n_q"]), zero_j, cfg, n_q=p["n_q"])
        b = enkf_analysis(p["x"], p["d"], p["c_dd"], n_q=p["n_q"])
        worst_plain = max(worst_plain, _rel(a, b))
        a = renkf_analysis(p["x"], p["d"], p["b"], zero_j, cfg, n_q=p["n_q"])
        b = enkf_analysis(p["x"], p["d"] - p["b"], p["c_dd"], n_q=p["n_q"])
        worst_corrected = max(worst_corrected, _rel(a, b))
    dt = time.perf_counter() - t0
    ok = worst_plain < 1e-12 and worst_corrected < 1e-12 and dt < 1.0
    _report(1, ok, f"max rel diff {worst_plain:.1e} (b=0,J=0), {worst_corrected:.1e} (J=0); "
                   f"{dt:.2f} s")


def test_criterion_2_stationarity_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        p = random_problem(np.random.default_rng(1000 + seed), full_rank=True)
        cfg = FilterConfig(c_dd=p["c_dd"], gamma=p["gamma"], c_bb=p["c_bb"])
        got = renkf_analysis(p["x"], p["d"], p["b"], p["jac"], cfg, n_q=p["n_q"])
        want = minimise_regularised_cost(p["x"], p["d"], p["b"], p["jac"], p["c_dd"],
                                         p["c_bb"], p["gamma"], p["n_q"])
        worst = max(worst, _rel(got, want))
    dt = time.perf_counter() - t0
    _report(2, worst < 1e-8 and dt < 5.0, f"max rel diff {worst:.1e}; {dt:.2f} s")


def _fd(f, x, h=1e-6):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(cols).T


def test_criterion_3_esn_jacobians():
    t0 = time.perf_counter()
    cfg = ReservoirConfig(n_reservoir=60, sigma_in=0.5, rho=0.8, tikhonov=1e-8, seed=3)
    data = sine_datasets(n=500, n_q=2, n_sets=3, seed=1)
    net = esn.train(esn.generate_reservoir(cfg, 2), data, cfg)
    rng = np.random.default_rng(0)
    worst_open = worst_closed = 0.0
    for _ in range(20):
        # a trained-network state: wash out on a random stretch of data
        k = int(rng.integers(50, 400))
        state = esn.washout(net, data[int(rng.integers(3))][k - 50:k])
        u = state.last_output + 0.1 * rng.standard_normal(2)

        def open_map(v):
            return -esn.step_open_loop(net, state, v)[1]

        def closed_map(b):
            r = esn.closed_loop_reservoir(net, state, b)
            return esn.step_open_loop(net, ReservoirState(r), b)[1]

        worst_open = max(worst_open, _rel(esn.jacobian_open_loop(net, state, u), _fd(open_map, u)))
        worst_closed = max(worst_closed, _rel(esn.jacobian_closed_loop(net, state),
                                              _fd(closed_map, state.last_output)))
    dt = time.perf_counter() - t0
    ok = worst_open < 1e-5 and worst_closed < 1e-5 and dt < 10.0
    _report(3, ok, f"open-loop {worst_open:.1e}, closed-loop {worst_closed:.1e}; {dt:.2f} s")


def test_criterion_4_ridge_oracle():
    t0 = time.perf_counter()
    cfg = ReservoirConfig(n_reservoir=40, sigma_in=0.3, rho=0.9, tikhonov=1e-6, seed=8)
    data = sine_datasets(n=200, n_q=2, n_sets=2, seed=2)
    reservoir = esn.generate_reservoir(cfg, 2)
    rng = np.random.default_rng(5)
    inputs = esn.noisy_inputs(data, 0.03, rng)
    net = esn.train(reservoir, data, cfg, inputs=inputs)
    want = dense_ridge((reservoir[0], reservoir[1], esn.input_normalisation(data), cfg.sigma_in,
                        cfg.rho, cfg.delta_r), inputs, data, cfg.tikhonov)
    err = _rel(net.w_out, want)
    dt = time.perf_counter() - t0
    _report(4, err < 1e-8 and dt < 5.0, f"rel diff {err:.1e}; {dt:.2f} s")


def test_criterion_5_advection_delay():
    t0 = time.perf_counter()
    model = Rijke()
    assert model.grid.n_c == 50
    tau_nu = model.params.tau_nu
    omega = 2 * np.pi * 150.0
    dt = 2e-5
    n_sub = model.substeps(dt)
    h = dt / n_sub

    def rhs(nu, t):
        return model._adv @ np.concatenate([[np.sin(omega * t)], nu])

    nu, t, ts, outs = np.zeros(model.grid.n_c), 0.0, [], []
    for _ in range(int(round(3 * tau_nu / dt))):
        for _ in range(n_sub):
            k1 = rhs(nu, t)
            k2 = rhs(nu + 0.5 * h * k1, t + 0.5 * h)
            k3 = rhs(nu + 0.5 * h * k2, t + 0.5 * h)
            k4 = rhs(nu + h * k3, t + h)
            nu = nu + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        ts.append(t)
        outs.append(nu[-1])
    ts, outs = np.array(ts), np.array(outs)
    sel = ts >= tau_nu * (1 + 1e-9)
    want = np.sin(omega * (ts[sel] - tau_nu))
    err = float(np.sqrt(np.mean((outs[sel] - want) ** 2) / np.mean(want**2)))
    dt_run = time.perf_counter() - t0
    _report(5, err < 0.01 and dt_run < 5.0, f"relative RMS {err:.2e}; {dt_run:.2f} s")


# -- experiments ------------------------------------------------------------------

_PREPARED = {}


def _prepared(key, cfg):
    if key not in _PREPARED:
        _PREPARED[key] = prepare(cfg)
    return _PREPARED[key]


def _rijke_nonlinear(**kw):
    base = rijke_config(bias=BiasSpec("nonlinear_periodic"), gamma=2.75, m=50)
    cfg = replace(base, training=replace(base.training, l_sets=60), **kw)
    return cfg


def _rijke_linear():
    base = rijke_config(bias=BiasSpec("linear"), gamma=1.75, m=50)
    return replace(base, training=replace(base.training, l_sets=100))


def _vdp():
    base = vdp_config()
    return replace(base, training=replace(base.training, l_sets=50))


def _run(key, cfg):
    t0 = time.perf_counter()
    rec = run_experiment(cfg, prepared=_prepared(key, cfg))
    return rec.metrics, time.perf_counter() - t0


@slow
def test_criterion_6_rijke_reproduction():
    t0 = time.perf_counter()
    m_nl, _ = _run("rijke_nl", _rijke_nonlinear())
    t_nl = time.perf_counter() - t0
    t0 = time.perf_counter()
    m_lin, _ = _run("rijke_lin", _rijke_linear())
    t_lin = time.perf_counter() - t0
    b, u = m_nl["biased_rms_da"], m_nl["unbiased_rms_da"]
    post = m_lin["unbiased_rms_post"]
    ok = (0.15 <= b <= 0.35) and (0.04 <= u <= 0.16) and post < 0.05
    _report(6, ok, f"nonlinear DA biased {b:.4g} (want [0.15, 0.35]), unbiased {u:.4g} "
                   f"(want [0.04, 0.16]) in {t_nl:.0f} s; linear post-DA unbiased {post:.4g} "
                   f"(want < 0.05) in {t_lin:.0f} s")


@slow
def test_criterion_7_gamma_zero_control():
    parts, ok = [], True
    for name, key, cfg in (("vdp", "vdp", _vdp()), ("rijke", "rijke_nl", _rijke_nonlinear())):
        m, _ = _run(key, replace(cfg, gamma=0.0))
        pre, da, unb, true = (m["biased_rms_pre"], m["biased_rms_da"], m["unbiased_rms_da"],
                              m["true_biased_rms"])
        this = abs(da - pre) <= 0.2 * pre and unb < true
        ok &= this
        parts.append(f"{name}: pre {pre:.3g}, DA biased {da:.3g}, DA unbiased {unb:.3g} "
                     f"vs true biased {true:.3g} [{'ok' if this else 'fail'}]")
    _report(7, ok, "; ".join(parts))


@slow
def test_criterion_8_van_der_pol():
    parts, ok = [], True
    for gamma in (10.0, 20.0):
        m, dt = _run("vdp", replace(_vdp(), gamma=gamma))
        pre, post, unb = m["biased_rms_pre"], m["biased_rms_post"], m["unbiased_rms_post"]
        this = post < 0.6 * pre and unb < 0.1 and dt < 180
        ok &= this
        parts.append(f"gamma {gamma:g}: pre {pre:.3g}, post biased {post:.3g} "
                     f"(want < {0.6 * pre:.3g}), post unbiased {unb:.3g} (want < 0.1), {dt:.0f} s")
    _report(8, ok, "; ".join(parts))


@slow
def test_criterion_9_noise_robustness():
    base = _rijke_nonlinear()
    model = Rijke()
    truth = generate_truth(model, base.true_alpha, base.bias, 0.5, base.dt, t_spinup=1.0)
    targets = {0.1: 21.55, 0.25: 13.70, 0.5: 7.72}
    snrs = {}
    for color in ("white", "pink", "brown"):
        for f in targets:
            snrs[(color, f)] = snr_db(truth.d, add_colored_noise(truth.d, color, f, seed=0))
    snr_ok = all(abs(v - targets[f]) <= 1.5 for (_, f), v in snrs.items())

    clean, _ = _run("rijke_nl", base)
    noisy_cfg = replace(base, noise=NoiseSpec("white", 0.25))
    noisy, _ = _run("rijke_nl_14db", noisy_cfg)
    ref, got = clean["biased_rms_da"], noisy["biased_rms_da"]
    rms_ok = got <= 1.5 * ref
    # a diverged baseline makes the relative check vacuous; say so
    note = " (baseline outside the criterion 6 band, comparison uninformative)" \
        if not 0.15 <= ref <= 0.35 else ""
    snr_txt = ", ".join(f"{f}: {np.mean([snrs[(c, f)] for c in ('white', 'pink', 'brown')]):.2f} dB"
                        for f in targets)
    _report(9, snr_ok and rms_ok,
            f"SNR {snr_txt} (targets 21.55/13.70/7.72 +-1.5) [{'ok' if snr_ok else 'fail'}]; "
            f"DA biased RMS at ~13 dB {got:.4g} vs baseline {ref:.4g} "
            f"(want <= {1.5 * ref:.4g}) [{'ok' if rms_ok else 'fail'}]{note}")


CLI_CONFIG = """\
[model]
name = vdp
t_spinup = 0.1
seed = 11

[filter]
m = 4
gamma = 5
t_start_da = 0.15
t_stop_da = 0.2
t_post = 0.02
t_err = 0.01

[esn]
n_r = 30
grid_size = 2
sigma_in = 0.01, 0.5
rho = 0.5, 0.9
t_val = 0.005
n_folds = 2
n_wash = 10

[training]
l_sets = 3
t_train = 0.1

[sweep]
l_values = 2, 3
gamma_values = 0, 5
"""


def test_criterion_10_determinism(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(CLI_CONFIG)
    same = []
    assert main(["run", "--config", str(ini), "--out", str(tmp_path / "r1")]) == 0
    assert main(["run", "--config", str(tmp_path / "r1" / "manifest.json"),
                 "--out", str(tmp_path / "r2")]) == 0
    for name in ("record.csv", "analyses.csv", "metrics.csv"):
        same.append((tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes())
    assert main(["sweep", "--config", str(ini), "--jobs", "1", "--out", str(tmp_path / "s1")]) == 0
    assert main(["sweep", "--config", str(tmp_path / "s1" / "manifest.json"), "--jobs", "2",
                 "--out", str(tmp_path / "s2")]) == 0
    same.append((tmp_path / "s1" / "sweep.csv").read_bytes()
                == (tmp_path / "s2" / "sweep.csv").read_bytes())
    _report(10, all(same), f"{sum(same)}/{len(same)} CSV files byte-identical on rerun "
                           "(run from manifest; sweep with --jobs 1 vs 2)")
