"""Pipeline configuration: an INI file with flat sections, overridable per key from the CLI.

Every key name is unique across sections so that ``--<key>`` (or
``--<key-with-dashes>``) addresses exactly one setting.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s):
    return tuple(int(x) for x in str(s).replace(" ", "").split(",") if x)


def _floats(s):
    return tuple(float(x) for x in str(s).replace(" ", "").split(",") if x)


def _opt_float(s):
    s = str(s).strip()
    return None if s in ("", "none", "None") else float(s)


def _opt_range(s):
    s = str(s).strip()
    if s in ("", "auto"):
        return None
    lo, hi = _floats(s)
    return (lo, hi)


def _resolution(s):
    parts = str(s).lower().replace(" ", "").split("x")
    if len(parts) == 1:
        return (int(parts[0]), int(parts[0]))
    rows, cols = parts
    return (int(rows), int(cols))


def _variants(s):
    return tuple(_ints(v) for v in str(s).split(";") if v.strip())


@dataclass(frozen=True)
class Key:
    section: str
    parse: object
    default: object
    choices: tuple | None = None
    help: str = ""


SCHEMA = {
    # model
    "model": Key("model", str, "pinn", ("mlp", "pinn", "analytic"), "model family"),
    "analytic_name": Key("model", str, "himmelblau", ("himmelblau", "gaussian_mixture", "constant")),
    "mixture_m": Key("model", int, 5),
    "mixture_seed": Key("model", int, 1),
    "constant_value": Key("model", float, 0.0),
    "mlp_widths": Key("model", _ints, (2, 8, 8, 1)),
    "mlp_loss": Key("model", str, "mse", ("mse", "ce")),
    "mlp_points": Key("model", int, 200),
    "data_seed": Key("model", int, 0, help="seed for blobs / PINN collocation points"),
    "beta": Key("model", float, 1.0, help="convection coefficient"),
    "pinn_widths": Key("model", _ints, (2, 16, 16, 1)),
    "n_u": Key("model", int, 50),
    "n_f": Key("model", int, 400),
    "n_b": Key("model", int, 50),
    "residual_weight": Key("model", float, 1.0),
    # theta
    "theta_source": Key("theta", str, "train", ("train", "load")),
    "steps": Key("theta", int, 3000),
    "lr": Key("theta", float, 5e-3),
    "init_seed": Key("theta", int, 0),
    "theta_path": Key("theta", str, ""),
    # directions
    "directions": Key("directions", str, "hessian", ("hessian", "random")),
    "direction_seed": Key("directions", int, 0),
    "tol": Key("directions", float, 1e-6),
    "max_iter": Key("directions", int, 2000),
    "hvp_step": Key("directions", float, 1e-4),
    "normalization": Key("directions", str, "unit", ("unit", "per-layer")),
    # sampling
    "range": Key("sampling", _opt_range, None, help="lo,hi (default depends on directions)"),
    "resolution": Key("sampling", _resolution, (41, 41), help="N or RxC"),
    "clip_quantile": Key("sampling", _opt_float, None),
    # representation
    "representation": Key("representation", str, "image8", ("image8", "knn")),
    "k": Key("representation", int, 8),
    # metrics
    "include_essential": Key("metrics", _bool, True),
    "trace_probes": Key("metrics", int, 50),
    "hessian_seed": Key("metrics", int, 0),
    "esd": Key("metrics", _bool, False),
    "esd_order": Key("metrics", int, 30),
    "esd_probes": Key("metrics", int, 10),
    "esd_bins": Key("metrics", int, 100),
    # sweeps
    "betas": Key("sweep", _floats, tuple(float(b) for b in range(1, 11))),
    "mlp_variants": Key("sweep", _variants, ((2, 8, 8, 1), (2, 8, 8, 8, 8, 1))),
    "seeds": Key("sweep", _ints, (0, 123, 123456, 2023)),
    # output
    "output_dir": Key("output", str, "out"),
}

SECTIONS = tuple(dict.fromkeys(k.section for k in SCHEMA.values()))


def defaults():
    return {name: key.default for name, key in SCHEMA.items()}


def _coerce(name, raw):
    key = SCHEMA.get(name)
    if key is None:
        raise ConfigError(f"unknown config key {name!r}")
    if not isinstance(raw, str):
        value = raw
    else:
        try:
            value = key.parse(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {name}: {raw!r} ({exc})") from None
    if key.choices and value not in key.choices:
        raise ConfigError(f"{name} must be one of {key.choices}, got {value!r}")
    return value


def read_config_file(path):
    """Parsed values from an INI file. Keys may sit in any section (names are unique)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for section in parser.sections():
        for name, raw in parser.items(section):
            if name not in SCHEMA:
                raise ConfigError(f"{path}: unknown key {name!r} in [{section}]")
            out[name] = _coerce(name, raw)
    return out


def resolve(file_values=None, overrides=None):
    """Defaults, then file values, then overrides (flags win)."""
    cfg = defaults()
    for source in (file_values or {}, overrides or {}):
        for name, value in source.items():
            if value is None and name not in ("range", "clip_quantile"):
                continue
            cfg[name] = _coerce(name, value)
    validate(cfg)
    return cfg


def validate(cfg):
    rows, cols = cfg["resolution"]
    if rows < 2 or cols < 2:
        raise ConfigError("resolution must be at least 2x2")
    if cfg["range"] is not None and not cfg["range"][0] < cfg["range"][1]:
        raise ConfigError("range needs lo < hi")
    q = cfg["clip_quantile"]
    if q is not None and not (0.5 < q <= 1.0):
        raise ConfigError("clip_quantile must lie in (0.5, 1]")
    if cfg["k"] < 1:
        raise ConfigError("k must be positive")
    if cfg["steps"] < 1:
        raise ConfigError("steps must be >= 1")
    if cfg["trace_probes"] < 1:
        raise ConfigError("trace_probes must be >= 1")
    if cfg["theta_source"] == "load" and cfg["model"] != "analytic":
        if not cfg["theta_path"] or not Path(cfg["theta_path"]).exists():
            raise ConfigError(f"theta_path {cfg['theta_path']!r} does not exist")
    if cfg["beta"] <= 0:
        raise ConfigError("beta must be positive")


def effective_range(cfg):
    if cfg["range"] is not None:
        return cfg["range"]
    if cfg["model"] == "analytic":
        return (-6.0, 6.0) if cfg["analytic_name"] == "himmelblau" else (-1.0, 1.0)
    return (-1.0, 1.0) if cfg["directions"] == "hessian" else (-0.5, 0.5)


def to_jsonable(cfg):
    out = {}
    for name, value in cfg.items():
        if isinstance(value, tuple):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        out[name] = value
    return out


def config_hash(cfg):
    blob = json.dumps(to_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def render_ini(cfg):
    """INI text that reads back to ``cfg``."""
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for name, key in SCHEMA.items():
            if key.section != section:
                continue
            v = cfg[name]
            if v is None:
                text = ""
            elif isinstance(v, bool):
                text = "true" if v else "false"
            elif name == "resolution":
                text = f"{v[0]}x{v[1]}"
            elif name == "mlp_variants":
                text = ";".join(",".join(str(w) for w in var) for var in v)
            elif isinstance(v, tuple):
                text = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            else:
                text = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{name} = {text}")
        lines.append("")
    return "\n".join(lines)
