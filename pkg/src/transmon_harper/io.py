"""Config parsing with unit suffixes, CSV/JSON writers and run manifests."""

import csv
import hashlib
import json
import math
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .circuit import PHI0, RawCircuitParams
from .lattice import OPEN, PERIODIC, LatticeDomainError, LatticeSpec


class ConfigError(ValueError):
    """Config failed validation; ``path`` names the offending field."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path


_SCALE = {
    "H": 1.0, "mH": 1e-3, "uH": 1e-6, "nH": 1e-9, "pH": 1e-12,
    "F": 1.0, "uF": 1e-6, "nF": 1e-9, "pF": 1e-12, "fF": 1e-15,
    # frequencies are quoted as f and stored as 2 pi f
    "Hz": 2 * math.pi, "kHz": 2e3 * math.pi, "MHz": 2e6 * math.pi, "GHz": 2e9 * math.pi,
    "rad/s": 1.0,
    "Phi0": PHI0,
}
_KIND = {
    "inductance": {"H", "mH", "uH", "nH", "pH"},
    "capacitance": {"F", "uF", "nF", "pF", "fF"},
    "frequency": {"Hz", "kHz", "MHz", "GHz", "rad/s"},
    "flux": {"Phi0"},
}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z/0-9]+)\s*$")
_ANGLE = re.compile(r"^\s*([-+])?\s*(\d+\.?\d*|\.\d+)?\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_quantity(value, kind, path):
    """'7.9 nH' -> 7.9e-9; bare numbers are taken as SI (rad/s for frequencies)."""
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number or quantity string")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a {kind}, got {type(value).__name__}")
    m = _QTY.match(value)
    if not m or m.group(2) not in _KIND[kind]:
        raise ConfigError(path, f"cannot read {value!r} as a {kind}; units: {sorted(_KIND[kind])}")
    return float(m.group(1)) * _SCALE[m.group(2)]


def parse_angle(value, path):
    """Numbers in radians, or strings like '2pi/5', '-pi/2', '0.14pi'."""
    if isinstance(value, bool):
        raise ConfigError(path, "expected an angle")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(path, "expected an angle")
    m = _ANGLE.match(value)
    if not m or not (m.group(2) or m.group(3)):
        raise ConfigError(path, f"cannot read {value!r} as an angle")
    x = float(m.group(2)) if m.group(2) else 1.0
    if m.group(3):
        x *= math.pi
    if m.group(4):
        den = float(m.group(4))
        if den == 0:
            raise ConfigError(path, "zero denominator")
        x /= den
    return -x if m.group(1) == "-" else x


def _require(block, key, path):
    if not isinstance(block, dict) or key not in block:
        raise ConfigError(f"{path}.{key}", "required field is missing")
    return block[key]


def parse_circuit(block, path="circuit"):
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    kinds = {"L_J_odd": "inductance", "L_J_even": "inductance", "L_T": "inductance",
             "C": "capacitance", "L0": "inductance", "M0": "inductance"}
    unknown = set(block) - set(kinds)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    vals = {k: parse_quantity(_require(block, k, path), kind, f"{path}.{k}") for k, kind in kinds.items()}
    try:
        return RawCircuitParams(**vals)
    except ValueError as e:
        raise ConfigError(path, str(e)) from e


_LATTICE_KEYS = {"L", "W", "g_x", "g_y", "K", "gamma", "row_boundary", "col_boundary"}


def parse_lattice(block, path="lattice", base=None):
    """LatticeSpec from a block; ``base`` supplies fields the block leaves out."""
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(block) - _LATTICE_KEYS
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    merged = dict(base or {})
    merged.update(block)
    if "g_y" in block and "K" in block:
        raise ConfigError(path, "give g_y or K, not both")
    if "g_y" in block:
        merged.pop("K", None)
    if "K" in block:
        merged.pop("g_y", None)
    for k in ("L", "W"):
        v = _require(merged, k, path)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"{path}.{k}", "must be a positive integer")
    g_x = parse_quantity(_require(merged, "g_x", path), "frequency", f"{path}.g_x")
    if "K" in merged:
        K = merged["K"]
        if isinstance(K, bool) or not isinstance(K, (int, float)):
            raise ConfigError(f"{path}.K", "must be a number")
        g_y = float(K) * g_x
    else:
        g_y = parse_quantity(_require(merged, "g_y", path), "frequency", f"{path}.g_y")
    gamma = parse_angle(merged.get("gamma", 0.0), f"{path}.gamma")
    bounds = {}
    for k in ("row_boundary", "col_boundary"):
        v = merged.get(k, OPEN)
        if v not in (OPEN, PERIODIC):
            raise ConfigError(f"{path}.{k}", "must be 'open' or 'periodic'")
        bounds[k] = v
    try:
        spec = LatticeSpec(merged["L"], merged["W"], g_x, g_y, gamma, **bounds)
    except LatticeDomainError as e:
        raise ConfigError(path, str(e)) from e
    return spec, merged


def parse_cases(cfg):
    """The base lattice plus one spec per entry of ``cases`` (or just the base)."""
    base_block = _require(cfg, "lattice", "config")
    base, merged = parse_lattice(base_block)
    cases = cfg.get("cases")
    if cases is None:
        return [base]
    if not isinstance(cases, list) or not cases:
        raise ConfigError("config.cases", "must be a non-empty list")
    return [parse_lattice(c, f"config.cases[{i}]", merged)[0] for i, c in enumerate(cases)]


def parse_grid(block, path, kind="angle"):
    """A list of values, or {start, stop, num} for an inclusive linspace."""
    conv = (lambda v, p: parse_angle(v, p)) if kind == "angle" else (lambda v, p: _number(v, p))
    if isinstance(block, list):
        vals = np.array([conv(v, f"{path}[{i}]") for i, v in enumerate(block)], dtype=float)
    elif isinstance(block, dict):
        start = conv(_require(block, "start", path), f"{path}.start")
        stop = conv(_require(block, "stop", path), f"{path}.stop")
        num = _require(block, "num", path)
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise ConfigError(f"{path}.num", "must be a positive integer")
        vals = np.linspace(start, stop, num)
    else:
        raise ConfigError(path, "expected a list or {start, stop, num}")
    if vals.size == 0:
        raise ConfigError(path, "grid is empty")
    return vals


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, "must be a number")
    return float(v)


def get_number(block, key, default, path, positive=True):
    v = block.get(key, default) if isinstance(block, dict) else default
    v = _number(v, f"{path}.{key}")
    if positive and v <= 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    return v


def get_int(block, key, default, path, minimum=1):
    v = block.get(key, default) if isinstance(block, dict) else default
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{path}.{key}", f"must be an integer >= {minimum}")
    return v


# presets ---------------------------------------------------------------------

def preset_names():
    return sorted(p.name[:-5] for p in resources.files("transmon_harper").joinpath("presets").iterdir()
                  if p.name.endswith(".json"))


def load_preset(name):
    path = resources.files("transmon_harper").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text())


def load_config(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError("config", f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON: {e}") from e


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# writers ---------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header, rows, comments=()):
    """CSV with ``# key: value`` comment lines, a header row and minimal quoting."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def matrix_csv(path, H):
    """Dense matrix as CSV, one matrix row per line with re/im interleaved."""
    H = np.asarray(H)
    header = [f"{part}_{j}" for j in range(H.shape[1]) for part in ("re", "im")]
    rows = (np.column_stack([H[i].real, H[i].imag]).ravel() for i in range(H.shape[0]))
    meta = [f"shape: {H.shape[0]}x{H.shape[1]}", "index: row * L + column, rows from lowest m"]
    return write_csv(path, header, rows, meta)


def lattice_block(spec):
    """LatticeSpec as a config block that parse_lattice reads back exactly."""
    return {"L": spec.L, "W": spec.W, "g_x": spec.g_x, "g_y": spec.g_y, "gamma": spec.gamma,
            "row_boundary": spec.row_boundary, "col_boundary": spec.col_boundary}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def unit_comments(spec=None, **extra):
    """Metadata lines so a CSV can be re-plotted without its config."""
    out = []
    if spec is not None:
        out.append(f"g_x_rad_per_s: {spec.g_x!r}")
    out += [f"{k}: {v}" for k, v in extra.items()]
    return out


def frequency_in(value):
    """Helper for presets and tests: '4 MHz' style strings to rad/s."""
    return parse_quantity(value, "frequency", "value")


__all__ = [
    "ConfigError", "parse_quantity", "parse_angle", "parse_circuit", "parse_lattice", "parse_cases",
    "parse_grid", "get_number", "get_int", "preset_names", "load_preset", "load_config", "config_hash",
    "write_csv", "write_json", "matrix_csv", "lattice_block", "sha256_file", "unit_comments", "frequency_in",
]
