"""CSV and manifest output.

Floats are written with ``repr`` (shortest round-trip form), so the same
numbers always produce the same bytes.
"""

import csv
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST_VERSION = 1


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    """RFC 4180 CSV with ``\\r\\n`` line endings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    """``(header, rows)`` with every cell as text."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _channel_names(prefix, labels):
    return [f"{prefix}_{lab}" for lab in labels]


def record_table(record):
    """Wide time-series table of an :class:`ExperimentRecord`."""
    labels = record.labels
    blocks = [("truth", record.truth), ("observation", record.observations),
              ("biased", record.biased), ("spread", record.spread), ("bias", record.bias),
              ("unbiased", record.unbiased), ("true_biased", record.true_biased)]
    header = ["t"]
    cols = [record.t[:, None]]
    for name, arr in blocks:
        header += _channel_names(name, labels)
        cols.append(np.asarray(arr).reshape(len(record.t), -1))
    return header, np.hstack(cols)


def analysis_table(record):
    labels, names = record.labels, record.param_names
    header = (["t"] + _channel_names("innovation", labels)
              + _channel_names("forecast_innovation", labels)
              + _channel_names("bias", labels)
              + [f"{p}_mean" for p in names] + [f"{p}_std" for p in names] + ["accepted"])
    rows = []
    for k, t in enumerate(record.t_analysis):
        rows.append([t, *record.innovation[k], *record.forecast_innovation[k],
                     *record.bias_at_analysis[k], *record.alpha_mean[k], *record.alpha_std[k],
                     bool(record.accepted[k])])
    return header, rows


def write_record(path, record):
    header, table = record_table(record)
    write_csv(path, header, table.tolist())


def write_analyses(path, record):
    header, rows = analysis_table(record)
    write_csv(path, header, rows)


METRIC_HEADER = ("l_sets", "gamma", "m")


def metrics_row(cfg, metrics, status="ok"):
    from .metrics import REPORT_FIELDS
    row = [cfg.training.l_sets, cfg.gamma, cfg.m, status]
    row += [metrics.get(k, np.nan) for k in REPORT_FIELDS]
    return row


def metrics_header():
    from .metrics import REPORT_FIELDS
    return list(METRIC_HEADER) + ["status"] + list(REPORT_FIELDS)


def write_training_set(path, training_set):
    """Training series in long form: ``set, factor, k, b_0 ... b_{nq-1}``."""
    n_l = len(training_set.phi_draws)
    n_q = training_set.series[0].shape[1]
    rows = []
    for i, series in enumerate(training_set.series):
        factor = training_set.factors[i // n_l]
        for k, b in enumerate(series):
            rows.append([i % n_l, factor, k, *b])
    write_csv(path, ["set", "factor", "k"] + [f"b_{q}" for q in range(n_q)], rows)


def write_manifest(path, command, config_sections, seeds, artifacts, timings, extra=None):
    """JSON manifest; ``config`` holds every resolved key so a rerun is exact."""
    data = {
        "format_version": MANIFEST_VERSION,
        "renkf_version": __version__,
        "command": command,
        "config": config_sections,
        "seeds": seeds,
        "artifacts": {k: str(Path(v).name) for k, v in artifacts.items()},
        "timings_s": {k: round(float(v), 3) for k, v in timings.items()},
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


def read_manifest(path):
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format_version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {data.get('format_version')}")
    return data
