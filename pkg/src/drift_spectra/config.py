"""Experiment configuration: TOML with dotted keys, validated into plain objects.

Example::

    mode = "sweep"
    eps = 1.0
    drift.coeffs = [1, -1]
    potential.preset = "linear+quadratic"
    potential.gradient = [1, 0]
    potential.offset = 1.0
    alpha_ladder = [25, 50, 100, 200, 400]
    grid.points = 255
"""
from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import potentials
from .asymptotics import DEFAULT_LADDER, rescaled_radius
from .model import DriftSpec, LocalModel, PotentialSpec

MODES = ("solve", "sweep", "limit", "corrections", "verify")
RESCALED_THRESHOLD = 10.0
DEFAULT_POINTS = {2: 255, 3: 95}

KNOWN_KEYS = {
    "": {"mode", "eps", "alpha", "alpha_ladder", "drift", "potential", "grid", "domain", "solver", "outputs",
         "expected", "corrections", "verify"},
    "drift": {"coeffs", "a0"},
    "potential": {"preset", "matrix", "offset", "gradient", "power", "scale", "weights", "center", "path",
                  "value_at_origin", "gradient_at_origin", "hessian_at_origin"},
    "grid": {"points", "levels", "radius"},
    "domain": {"radius"},
    "solver": {"tol", "max_iter", "workers"},
    "outputs": {"csv", "json"},
    "expected": {"order", "slope", "slope_tol"},
    "corrections": {"max_degree", "which", "oracle_radius"},
    "verify": {"criteria"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, field_name: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if field_name:
            where = f"{field_name}: "
        if line:
            where = f"line {line}: " + where
        super().__init__(where + message)
        self.field_name = field_name
        self.line = line


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    mode: str
    eps: float
    drift: DriftSpec
    potential: PotentialSpec
    alpha: Optional[float]
    alpha_ladder: tuple
    levels: tuple
    radius: float
    domain_radius: float
    tol: float
    max_iter: int
    workers: int
    csv_name: str
    json_name: str
    expected: dict = field(default_factory=dict)
    corrections: dict = field(default_factory=dict)
    criteria: tuple = ()
    resolved: dict = field(default_factory=dict)
    source: Optional[Path] = None

    def content_hash(self) -> str:
        return config_hash(self.resolved)


def config_hash(resolved: dict) -> str:
    text = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _line_of(text: str, dotted: str) -> Optional[int]:
    """Line number where ``dotted`` is assigned, either as ``a.b = `` or ``b = `` under ``[a]``."""
    section = ""
    head, _, leaf = dotted.rpartition(".")
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"^([A-Za-z0-9_.\-\" ]+?)\s*=", line)
        if not m:
            continue
        key = m.group(1).replace('"', "").replace(" ", "")
        full = f"{section}.{key}" if section else key
        if full == dotted or (not head and key == leaf and not section):
            return i
    return None


class _Reader:
    """Typed access to the parsed table with field/line-aware errors."""

    def __init__(self, data: dict, text: str):
        self.data = data
        self.text = text
        self.resolved: dict = {}

    def error(self, name: str, message: str) -> ConfigError:
        return ConfigError(message, name, _line_of(self.text, name))

    def raw(self, name: str):
        node = self.data
        for part in name.split("."):
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    def _store(self, name: str, value):
        node = self.resolved
        parts = name.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def real(self, name: str, default=None, required: bool = False, positive: bool = False,
             nonnegative: bool = False) -> Optional[float]:
        v = self.raw(name)
        if v is None:
            if required:
                raise ConfigError("required field is missing", name)
            if default is not None:
                self._store(name, default)
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(name, f"expected a number, got {v!r}")
        v = float(v)
        if not np.isfinite(v):
            raise self.error(name, "must be finite")
        if positive and not v > 0:
            raise self.error(name, "must be positive")
        if nonnegative and v < 0:
            raise self.error(name, "must be nonnegative")
        self._store(name, v)
        return v

    def integer(self, name: str, default=None, minimum: Optional[int] = None) -> Optional[int]:
        v = self.raw(name)
        if v is None:
            if default is not None:
                self._store(name, default)
            return default
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.error(name, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise self.error(name, f"must be at least {minimum}")
        self._store(name, v)
        return v

    def text_value(self, name: str, default=None, choices=None) -> Optional[str]:
        v = self.raw(name)
        if v is None:
            if default is not None:
                self._store(name, default)
            return default
        if not isinstance(v, str):
            raise self.error(name, f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise self.error(name, f"must be one of {', '.join(choices)}")
        self._store(name, v)
        return v

    def vector(self, name: str, length: Optional[int] = None, default=None, required: bool = False):
        v = self.raw(name)
        if v is None:
            if required:
                raise ConfigError("required field is missing", name)
            if default is not None:
                self._store(name, list(default))
            return default
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(name, f"expected a list of numbers, got {v!r}") from None
        if arr.ndim != 1 or (length is not None and arr.size != length):
            raise self.error(name, f"expected a list of {length if length is not None else 'some'} numbers")
        if not np.all(np.isfinite(arr)):
            raise self.error(name, "entries must be finite")
        self._store(name, arr.tolist())
        return arr

    def matrix(self, name: str, dim: int, default=None):
        v = self.raw(name)
        if v is None:
            return default
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(name, "expected a nested list of numbers") from None
        if arr.shape != (dim, dim):
            raise self.error(name, f"expected a {dim}x{dim} matrix")
        self._store(name, arr.tolist())
        return arr


def _check_unknown(data: dict, text: str) -> None:
    for key, value in data.items():
        if key not in KNOWN_KEYS[""]:
            raise ConfigError("unknown field", key, _line_of(text, key))
        if isinstance(value, dict):
            allowed = KNOWN_KEYS.get(key, set())
            for sub in value:
                if sub not in allowed:
                    name = f"{key}.{sub}"
                    raise ConfigError("unknown field", name, _line_of(text, name))
        elif key in KNOWN_KEYS:
            raise ConfigError("expected a table of sub-fields", key, _line_of(text, key))


def _levels(finest: int, count: int, r: _Reader) -> tuple:
    levels = [finest]
    for _ in range(count - 1):
        n = levels[0]
        if n % 2 == 0 or (n - 1) // 2 < 3:
            raise r.error("grid.points", f"{finest} points cannot be halved {count - 1} times (use 2^k - 1)")
        levels.insert(0, (n - 1) // 2)
    return tuple(levels)


def _potential(r: _Reader, dim: int, base: Optional[Path]) -> PotentialSpec:
    preset = r.text_value("potential.preset", "zero", potentials.PRESETS)
    try:
        if preset == "zero":
            V = potentials.zero(dim)
        elif preset == "quadratic":
            V = potentials.quadratic(dim, r.matrix("potential.matrix", dim), r.real("potential.offset", 0.0))
        elif preset == "linear+quadratic":
            g = r.vector("potential.gradient", dim, required=True)
            V = potentials.linear_quadratic(dim, g, r.matrix("potential.matrix", dim), r.real("potential.offset", 0.0))
        elif preset == "homogeneous-power":
            V = potentials.homogeneous_power(
                dim, r.real("potential.power", required=True, positive=True), r.real("potential.scale", 1.0),
                r.vector("potential.weights", dim),
            )
        elif preset == "shifted-quadratic":
            V = potentials.shifted_quadratic(
                dim, r.vector("potential.center", dim, required=True), r.vector("potential.weights", dim),
                r.real("potential.offset", 0.0),
            )
        else:
            path = r.text_value("potential.path")
            if path is None:
                raise ConfigError("required field is missing", "potential.path")
            p = Path(path)
            if not p.is_absolute() and base is not None:
                p = base / p
            V = potentials.from_table(p)
            if V.evaluator.args[1].size != dim:
                raise r.error("potential.path", "table dimension does not match drift.coeffs")
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise r.error("potential.preset", str(exc)) from None
    # explicit local data overrides or supplies the preset's
    v0 = r.real("potential.value_at_origin")
    g0 = r.vector("potential.gradient_at_origin", dim)
    h0 = r.matrix("potential.hessian_at_origin", dim)
    if v0 is not None or g0 is not None or h0 is not None:
        lm = V.local_model
        if lm is None and (v0 is None or g0 is None or h0 is None):
            missing = [n for n, v in (("value_at_origin", v0), ("gradient_at_origin", g0),
                                      ("hessian_at_origin", h0)) if v is None]
            raise ConfigError("local data must be given completely", "potential." + missing[0])
        try:
            lm = LocalModel(
                lm.value_at_origin if v0 is None else v0,
                lm.gradient if g0 is None else g0,
                lm.hessian if h0 is None else h0,
            )
        except ValueError as exc:
            raise r.error("potential.hessian_at_origin", str(exc)) from None
        V = PotentialSpec(V.evaluator, lm, V.homogeneous_part, V.name)
    return V


def load_config(path, mode: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate a configuration file; ``mode`` overrides the file's ``mode``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(m.group(1)) if m else None) from None
    return parse_config(data, text, mode, path.parent)


def parse_config(data: dict, text: str = "", mode: Optional[str] = None, base: Optional[Path] = None) -> ExperimentConfig:
    _check_unknown(data, text)
    r = _Reader(data, text)
    file_mode = r.text_value("mode", None, MODES)
    if mode is not None and file_mode is not None and mode != file_mode:
        raise r.error("mode", f"config is for mode {file_mode!r}, not {mode!r}")
    mode = mode or file_mode
    if mode is None:
        raise ConfigError("required field is missing", "mode")
    if mode not in MODES:
        raise ConfigError(f"must be one of {', '.join(MODES)}", "mode")
    r._store("mode", mode)

    eps = r.real("eps", required=True, positive=True)
    coeffs = r.vector("drift.coeffs", required=True)
    a0 = r.real("drift.a0", 0.0)
    try:
        drift = DriftSpec(tuple(coeffs), a0)
    except ValueError as exc:
        raise r.error("drift.coeffs", str(exc)) from None
    V = _potential(r, drift.dim, base)

    alpha = None
    if r.raw("alpha") is not None or mode == "solve":
        v = r.raw("alpha")
        if v is None:
            raise ConfigError("required field is missing", "alpha")
        if isinstance(v, (int, float)) and not isinstance(v, bool) and not v > 0:
            raise r.error("alpha", "alpha must be positive")
        alpha = r.real("alpha", positive=True)
    ladder = r.vector("alpha_ladder", default=DEFAULT_LADDER)
    ladder = tuple(float(a) for a in ladder)
    if any(a <= 0 for a in ladder):
        raise r.error("alpha_ladder", "alpha must be positive")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise r.error("alpha_ladder", "must be strictly increasing")
    if mode == "sweep" and len(ladder) < 4:
        raise r.error("alpha_ladder", "a sweep needs at least 4 alphas for slope fitting")

    points = r.integer("grid.points", DEFAULT_POINTS.get(drift.dim, 63), minimum=3)
    nlev = r.integer("grid.levels", 3, minimum=1)
    levels = _levels(points, nlev, r)
    radius = r.real("grid.radius", rescaled_radius(drift, eps), positive=True)
    domain_radius = r.real("domain.radius", 1.0, positive=True)

    tol = r.real("solver.tol", 1e-9, positive=True)
    max_iter = r.integer("solver.max_iter", 10000, minimum=1)
    workers = r.integer("solver.workers", 1, minimum=1)

    csv_name = r.text_value("outputs.csv", "sweep.csv")
    json_name = r.text_value("outputs.json", "report.json")

    expected = {}
    if r.raw("expected") is not None:
        expected["order"] = r.integer("expected.order", minimum=1)
        expected["slope"] = r.real("expected.slope")
        expected["slope_tol"] = r.real("expected.slope_tol", 0.1, positive=True)
        if expected["order"] is None or expected["slope"] is None:
            raise ConfigError("expected.order and expected.slope must be given together", "expected")

    corrections = {
        "max_degree": r.integer("corrections.max_degree", minimum=1),
        "which": tuple(r.raw("corrections.which") or ("phi1", "phi2", "phi3", "phi4")),
        "oracle_radius": r.real("corrections.oracle_radius", 6.0, positive=True),
        "explicit": r.raw("corrections.which") is not None,
    }
    for name in corrections["which"]:
        if name not in ("phi1", "phi2", "phi3", "phi4"):
            raise r.error("corrections.which", f"unknown correction {name!r}")
    r._store("corrections.which", list(corrections["which"]))

    crit = r.raw("verify.criteria")
    if crit is None:
        criteria = tuple(range(1, 13))
    else:
        if not isinstance(crit, list) or not all(isinstance(c, int) and 1 <= c <= 12 for c in crit):
            raise r.error("verify.criteria", "expected a list of criterion numbers 1..12")
        criteria = tuple(crit)
    r._store("verify.criteria", list(criteria))

    return ExperimentConfig(
        mode=mode, eps=eps, drift=drift, potential=V, alpha=alpha, alpha_ladder=ladder, levels=levels,
        radius=radius, domain_radius=domain_radius, tol=tol, max_iter=max_iter, workers=workers,
        csv_name=csv_name, json_name=json_name, expected=expected, corrections=corrections,
        criteria=criteria, resolved=r.resolved, source=base,
    )
