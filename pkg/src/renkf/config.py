"""Experiment configuration files.

A config is an INI file with the sections ``model``, ``filter``, ``esn``,
``training``, ``noise`` and ``sweep``.  Only ``[model] name`` is required;
every other key falls back to the model family's defaults.  Example::

    [model]
    name = rijke
    seed = 3

    [filter]
    gamma = 2.75
    m = 50

    [training]
    l_sets = 60

    [sweep]
    l_values = 10, 30, 50
    gamma_values = 0, 1.5, 3
"""

import configparser
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .assimilation import PRESETS, ExperimentConfig
from .errors import InvalidConfig


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


def _range(text):
    vals = _floats(text)
    if len(vals) == 1:
        return (vals[0], vals[0])
    if len(vals) != 2:
        raise ValueError("expected 'low, high' or a single value")
    return vals


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


# key -> (target, parser).  Targets are ExperimentConfig fields, or
# "<sub>.<field>" for the nested reservoir / training / bias / noise specs.
SCHEMA = {
    "model": {
        "name": ("model", str.strip),
        "true_params": ("true_alpha", _floats),
        "guess_params": ("guess_alpha", _floats),
        "dt": ("dt", float),
        "t_spinup": ("t_spinup", float),
        "bias": ("bias.kind", str.strip),
        "bias_a1": ("bias.a1", float),
        "bias_a2": ("bias.a2", float),
        "bias_a3": ("bias.a3", float),
        "bias_a4": ("bias.a4", float),
        "bias_a5": ("bias.a5", float),
        "bias_a6": ("bias.a6", float),
        "seed": ("seed", int),
    },
    "filter": {
        "dt_d": ("dt_d", float),
        "m": ("m", int),
        "sigma_phi": ("sigma_phi", float),
        "sigma_alpha": ("sigma_alpha", float),
        "gamma": ("gamma", float),
        "sigma_dd": ("sigma_dd", _optional_float),
        "inflation_accept": ("inflation_accept", float),
        "inflation_reject": ("inflation_reject", float),
        "bounded_params": ("bounded_params", _bool),
        "bias_aware": ("bias_aware", _bool),
        "t_start_da": ("t_start_da", float),
        "t_stop_da": ("t_stop_da", float),
        "t_post": ("t_post", float),
        "t_err": ("t_err", float),
    },
    "esn": {
        "dt_esn": ("dt_esn", float),
        "n_r": ("reservoir.n_reservoir", int),
        "connectivity": ("reservoir.connectivity", float),
        "sigma_in": ("sigma_in_range", _range),
        "rho": ("rho_range", _range),
        "tikhonov": ("reservoir.tikhonov", float),
        "delta_r": ("reservoir.delta_r", float),
        "input_noise": ("reservoir.input_noise", float),
        "grid_size": ("grid_size", int),
        "n_folds": ("n_folds", int),
        "t_val": ("t_val", float),
        "n_wash": ("n_wash", int),
    },
    "training": {
        "l_sets": ("training.l_sets", int),
        "sigma_l": ("training.sigma_l", float),
        "t_train": ("training.t_train", float),
        "signed_augmentation": ("training.signed_augmentation", _bool),
        "max_retries": ("training.max_retries", int),
    },
    "noise": {
        "color": ("noise.color", str.strip),
        "level": ("noise.level", float),
    },
    "sweep": {
        "l_values": ("l_values", _ints),
        "gamma_values": ("gamma_values", _floats),
    },
}


@dataclass(frozen=True)
class SweepSpec:
    l_values: tuple = ()
    gamma_values: tuple = ()

    @property
    def cells(self):
        """``(index, L, gamma)`` in row-major order (L outer)."""
        out = []
        for i, l_sets in enumerate(self.l_values):
            for j, gamma in enumerate(self.gamma_values):
                out.append((i * len(self.gamma_values) + j, l_sets, gamma))
        return out


def _sections_from_file(path):
    path = Path(path)
    if not path.exists():
        raise InvalidConfig(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix == ".json":
        # a run manifest: the resolved config is stored under "config"
        try:
            data = json.loads(text)["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InvalidConfig(f"{path}: not a run manifest ({exc})") from None
        return {sec: {k: str(v) for k, v in keys.items()} for sec, keys in data.items()}
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    return {sec: dict(parser[sec]) for sec in parser.sections()}


def parse_sections(sections):
    """Validated ``(ExperimentConfig, SweepSpec)`` from ``{section: {key: text}}``."""
    for sec in sections:
        if sec not in SCHEMA:
            raise InvalidConfig(f"unknown section [{sec}]; expected one of {sorted(SCHEMA)}")
    model = sections.get("model", {}).get("name")
    if model is None:
        raise InvalidConfig("missing required key 'name' in section [model]")
    model = model.strip()
    if model not in PRESETS:
        raise InvalidConfig(f"[model] name: unknown model {model!r}; expected {sorted(PRESETS)}")

    top, nested, sweep = {}, {}, {}
    for sec, keys in sections.items():
        for key, text in keys.items():
            if key not in SCHEMA[sec]:
                raise InvalidConfig(f"unknown key '{key}' in section [{sec}]")
            target, conv = SCHEMA[sec][key]
            try:
                value = conv(text)
            except ValueError as exc:
                raise InvalidConfig(f"[{sec}] {key}: {exc}") from None
            if sec == "sweep":
                sweep[target] = value
            elif "." in target:
                sub, name = target.split(".")
                nested.setdefault(sub, {})[name] = value
            else:
                top[target] = value
    top.pop("model")

    base = PRESETS[model]()
    try:
        subs = {}
        for sub, values in nested.items():
            subs[sub] = replace(getattr(base, sub), **values)
        cfg = replace(base, **top, **subs)
        # keep the network and training time steps in step with the filter's
        cfg = replace(cfg, reservoir=replace(cfg.reservoir, dt_esn=cfg.dt_esn),
                      training=replace(cfg.training, dt_esn=cfg.dt_esn))
    except InvalidConfig:
        raise
    except (ValueError, TypeError) as exc:
        raise InvalidConfig(str(exc)) from None
    spec = SweepSpec(**sweep)
    if any(v < 1 for v in spec.l_values):
        raise InvalidConfig("[sweep] l_values must be >= 1")
    if any(v < 0 for v in spec.gamma_values):
        raise InvalidConfig("[sweep] gamma_values must be >= 0")
    return cfg, spec


def load_config(path):
    """Read an INI config (or a run manifest) into ``(ExperimentConfig, SweepSpec)``."""
    return parse_sections(_sections_from_file(path))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def to_sections(cfg: ExperimentConfig, sweep: SweepSpec = None):
    """Every key of :data:`SCHEMA` resolved against ``cfg`` (round-trips exactly)."""
    out = {}
    for sec, keys in SCHEMA.items():
        out[sec] = {}
        for key, (target, _) in keys.items():
            if sec == "sweep":
                if sweep is None:
                    continue
                value = getattr(sweep, target)
            elif target == "model":
                value = cfg.model
            elif "." in target:
                sub, name = target.split(".")
                value = getattr(getattr(cfg, sub), name)
            else:
                value = getattr(cfg, target)
            out[sec][key] = _fmt(value)
    if not out["sweep"]:
        del out["sweep"]
    return out


def write_config(path, cfg, sweep=None):
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(to_sections(cfg, sweep))
    with open(path, "w", newline="\n") as fh:
        parser.write(fh)


__all__ = ["SCHEMA", "SweepSpec", "load_config", "parse_sections", "to_sections",
           "write_config"]
