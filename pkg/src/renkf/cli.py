"""``renkf`` command line: train, run and sweep.

Exit codes: 0 success, 1 run failure, 2 invalid config, 3 network and
model dimensions disagree.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import esn as esn_mod
from . import io, svg
from .assimilation import make_model, prepare, run_experiment
from .config import load_config, to_sections
from .errors import DimensionMismatch, InvalidConfig, RenkfError

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DIMENSION = 0, 1, 2, 3


def _out_dir(args):
    root = args.out or os.environ.get("RENKF_OUT_DIR") or "renkf_out"
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args):
    cfg, sweep = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg, sweep


# -- train -------------------------------------------------------------------

def cmd_train(args):
    cfg, _ = _load(args)
    if args.dry_run:
        print(f"config ok: {cfg.model}, N_r = {cfg.reservoir.n_reservoir}, L = {cfg.training.l_sets}")
        return EXIT_OK
    out = _out_dir(args)
    t0 = time.perf_counter()
    prepared = prepare(cfg)
    net_path = out / "network.npz"
    esn_mod.save_esn(net_path, prepared.network)
    artifacts = {"network": net_path}
    table = prepared.hyperparameters.get("validation_table")
    if table:
        val_path = out / "validation.csv"
        io.write_csv(val_path, ["sigma_in", "rho", "mse"], table)
        artifacts["validation"] = val_path
    timings = dict(prepared.timings, total=time.perf_counter() - t0)
    io.write_manifest(out / "manifest.json", "train", to_sections(cfg), cfg.derived_seeds(),
                      artifacts, timings,
                      extra={"hyperparameters": {k: v for k, v in prepared.hyperparameters.items()
                                                 if k != "validation_table"}})
    print(f"network written to {net_path} (sigma_in = {prepared.network.config.sigma_in:.3g}, "
          f"rho = {prepared.network.config.rho:.3g})")
    return EXIT_OK


# -- run ---------------------------------------------------------------------

def _plots(out, rec, cfg):
    q = 0
    lab = rec.labels[q]
    vlines = (cfg.t_start_da, cfg.t_stop_da)
    svg.line_plot(out / "timeseries.svg", rec.t,
                  {"truth": rec.truth[:, q], "biased": rec.biased[:, q],
                   "unbiased": rec.unbiased[:, q]},
                  title=f"{lab}: truth, biased and unbiased estimates", ylabel=lab, vlines=vlines)
    svg.line_plot(out / "innovation.svg", rec.t_analysis,
                  {"innovation d - M psi_a": rec.innovation[:, q],
                   "bias estimate": rec.bias_at_analysis[:, q]},
                  title=f"{lab}: analysis innovation and bias estimate", ylabel=lab)


def cmd_run(args):
    cfg, _ = _load(args)
    network = None
    if args.network:
        try:
            network = esn_mod.load_esn(args.network)
        except (OSError, KeyError, ValueError) as exc:
            raise InvalidConfig(f"cannot read network {args.network}: {exc}") from None
        n_q = make_model(cfg.model).n_q
        if network.n_q != n_q:
            raise DimensionMismatch(f"network has {network.n_q} channels, "
                                    f"model {cfg.model!r} observes {n_q}")
    if args.dry_run:
        print(f"config ok: {cfg.model}, gamma = {cfg.gamma}, m = {cfg.m}")
        return EXIT_OK
    out = _out_dir(args)
    t0 = time.perf_counter()
    rec = run_experiment(cfg, network=network)
    artifacts = {"record": out / "record.csv", "analyses": out / "analyses.csv",
                 "metrics": out / "metrics.csv", "timeseries_plot": out / "timeseries.svg",
                 "innovation_plot": out / "innovation.svg"}
    io.write_record(artifacts["record"], rec)
    io.write_analyses(artifacts["analyses"], rec)
    io.write_csv(artifacts["metrics"], io.metrics_header(), [io.metrics_row(cfg, rec.metrics)])
    _plots(out, rec, cfg)
    timings = dict(rec.timings, total=time.perf_counter() - t0)
    extra = {"hyperparameters": {k: v for k, v in rec.hyperparameters.items()
                                 if k != "validation_table"}}
    if args.network:
        extra["network"] = str(Path(args.network).resolve())
    io.write_manifest(out / "manifest.json", "run", to_sections(cfg), cfg.derived_seeds(),
                      artifacts, timings, extra=extra)
    m = rec.metrics
    print(f"DA RMS biased {m['biased_rms_da']:.4f} unbiased {m['unbiased_rms_da']:.4f}; "
          f"post-DA biased {m['biased_rms_post']:.4f} unbiased {m['unbiased_rms_post']:.4f}")
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

def cell_seed(master, index):
    """Ensemble seed of sweep cell ``index``; independent of how cells are scheduled."""
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def _prepare_l(cfg):
    try:
        return prepare(cfg), None
    except RenkfError as exc:
        return None, str(exc)


def _run_cell(job):
    index, cfg, (prepared, error) = job
    if prepared is None:
        return index, None, f"training failed: {error}"
    try:
        rec = run_experiment(cfg, prepared=prepared)
        return index, rec.metrics, "ok"
    except RenkfError as exc:
        return index, None, f"failed: {exc}"


def _map(fn, jobs, n_workers):
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, jobs))


def cmd_sweep(args):
    cfg, sweep = _load(args)
    if not sweep.cells:
        raise InvalidConfig("[sweep] needs non-empty l_values and gamma_values")
    if args.dry_run:
        print(f"config ok: {len(sweep.l_values)} x {len(sweep.gamma_values)} cells")
        return EXIT_OK
    out = _out_dir(args)
    t0 = time.perf_counter()
    # the bias network depends on L only, so train once per L
    l_cfgs = [replace(cfg, training=replace(cfg.training, l_sets=l)) for l in sweep.l_values]
    prepared = _map(_prepare_l, l_cfgs, args.jobs)
    jobs = []
    for index, l_sets, gamma in sweep.cells:
        i_l = sweep.l_values.index(l_sets)
        cell_cfg = replace(l_cfgs[i_l], gamma=gamma, ensemble_seed=cell_seed(cfg.seed, index))
        jobs.append((index, cell_cfg, prepared[i_l]))
    results = sorted(_map(_run_cell, jobs, args.jobs), key=lambda r: r[0])

    rows, combined = [], np.full((len(sweep.l_values), len(sweep.gamma_values)), np.nan)
    for (index, metrics, status), (_, cell_cfg, _) in zip(results, jobs):
        metrics = metrics or {}
        rows.append(io.metrics_row(cell_cfg, metrics, status))
        if metrics:
            i, j = divmod(index, len(sweep.gamma_values))
            combined[i, j] = metrics["biased_rms_post"] + metrics["unbiased_rms_post"]
    header = io.metrics_header()
    io.write_csv(out / "sweep.csv", header, rows)
    svg.heatmap(out / "sweep.svg", combined, sweep.l_values, sweep.gamma_values,
                title="post-DA biased + unbiased RMS", xlabel="gamma", ylabel="L")
    artifacts = {"sweep": out / "sweep.csv", "heatmap": out / "sweep.svg"}
    io.write_manifest(out / "manifest.json", "sweep", to_sections(cfg, sweep), cfg.derived_seeds(),
                      artifacts, {"total": time.perf_counter() - t0},
                      extra={"cell_seeds": [cell_seed(cfg.seed, i) for i, _, _ in sweep.cells]})
    n_fail = sum(1 for r in results if r[2] != "ok")
    print(f"{len(results)} cells, {n_fail} failed; results in {out / 'sweep.csv'}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="renkf",
                                description="Regularised bias-aware ensemble Kalman filter "
                                            "experiments with an echo state network bias model.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, text in (("train", cmd_train, "train and save the bias network"),
                           ("run", cmd_run, "run one assimilation experiment"),
                           ("sweep", cmd_sweep, "run an (L, gamma) grid")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="INI config or a run manifest (.json)")
        s.add_argument("--seed", type=int, default=None, help="override the master seed")
        s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        s.add_argument("--out", default=None, help="output directory (default $RENKF_OUT_DIR)")
        s.add_argument("--dry-run", action="store_true", help="validate the config and exit")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "run":
            s.add_argument("--network", default=None, help="network file from 'renkf train'")
        s.set_defaults(func=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except DimensionMismatch as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except InvalidConfig as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RenkfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
