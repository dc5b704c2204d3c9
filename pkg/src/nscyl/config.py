"""YAML run configuration.

Documented keys (defaults in brackets)::

    grid.L, grid.N1, grid.N2
    time.dt, time.T, time.cfl_safety [0.5], time.dt_min [none],
    time.ramp_steps [20], time.checkpoints [[T]]
    ic.kind, ic.params.*, ic.seed [0]
    output.cadence [none], output.dir [run], output.save_trajectory [true]
    diagnostics.windows ["auto" | list of [a, b]], diagnostics.center [L/2],
    diagnostics.distance_radii [[2.0]], diagnostics.epsilons [[0.05]]
    constants.M [sup |omega(0)|]
    quadrature.cutoff [12], quadrature.order [8], quadrature.levels [24]

Errors name the offending key and, when known, its line in the file.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import InitialCondition, SimConfig
from .kernel import QuadratureSpec
from .scenarios import SCENARIOS, scenario_parameters
from .spectral import Grid

TOP_LEVEL = {"grid", "time", "ic", "output", "diagnostics", "constants", "quadrature"}
SECTION_KEYS = {
    "grid": {"L", "N1", "N2"},
    "time": {"dt", "T", "cfl_safety", "dt_min", "ramp_steps", "checkpoints"},
    "ic": {"kind", "params", "seed"},
    "output": {"cadence", "dir", "save_trajectory"},
    "diagnostics": {"windows", "center", "distance_radii", "epsilons"},
    "constants": {"M"},
    "quadrature": {"cutoff", "order", "levels"},
}
AUTO_RANDOM_WINDOWS = 10


class ConfigError(ValueError):
    """Invalid configuration; the message carries the key path and line."""


def _line_map(text: str) -> dict[str, int]:
    """Map dotted key paths to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict[str, int] = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return lines


class _Reader:
    def __init__(self, data: dict, lines: dict[str, int], source: str):
        self.data = data
        self.lines = lines
        self.source = source

    def error(self, key: str, msg: str) -> ConfigError:
        line = self.lines.get(key)
        while line is None and "." in key:
            key_parent = key.rsplit(".", 1)[0]
            line = self.lines.get(key_parent)
            key = key_parent
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {msg}")

    def get(self, path: str, kind=float, default=..., check=None):
        node = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is ...:
                    raise self.error(path, f"missing required key '{path}'")
                return default
            node = node[part]
        if node is None and default is not ...:
            return default
        try:
            if kind is int:
                if isinstance(node, bool) or (isinstance(node, float) and not node.is_integer()):
                    raise TypeError
                value = int(node)
            elif kind is float:
                if isinstance(node, bool):
                    raise TypeError
                value = float(node)
            elif kind is bool:
                if not isinstance(node, bool):
                    raise TypeError
                value = node
            elif kind in (list, dict):
                if not isinstance(node, kind):
                    raise TypeError
                value = node
            else:
                value = kind(node)
        except (TypeError, ValueError):
            raise self.error(path, f"key '{path}' has invalid value {node!r} "
                                   f"(expected {getattr(kind, '__name__', kind)})") from None
        if check is not None:
            ok, msg = check(value)
            if not ok:
                raise self.error(path, f"key '{path}': {msg}")
        return value


@dataclass
class RunConfig:
    """Everything a run needs, parsed from a YAML document."""

    sim: SimConfig
    out_dir: Path
    windows: list
    center: float
    distance_radii: list
    epsilons: list
    M: float | None
    quadrature: QuadratureSpec
    save_trajectory: bool = True
    raw: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.sim.grid


def auto_windows(grid: Grid, center: float | None = None, seed: int = 0) -> list[tuple[float, float]]:
    """Centred windows at several scales plus deterministic random ones."""
    L = grid.L
    c = L / 2 if center is None else center
    wins = [(c - L / 16, c + L / 16), (c - L / 8, c + L / 8), (c - L / 4, c + L / 4),
            (c - L / 4, c), (c, c + L / 8)]
    rng = np.random.default_rng(seed)
    for _ in range(AUTO_RANDOM_WINDOWS):
        a, b = np.sort(rng.uniform(c - 0.45 * L, c + 0.45 * L, size=2))
        if b - a < 4 * grid.dx1:
            b = a + 4 * grid.dx1
        wins.append((float(a), float(b)))
    return [(round(a / grid.dx1) * grid.dx1, round(b / grid.dx1) * grid.dx1) for a, b in wins]


def parse_windows(spec, grid: Grid, center: float | None = None) -> list[tuple[float, float]]:
    """``"auto"``, ``"a:b,a:b"`` or a list of pairs."""
    if spec is None or spec == "auto":
        return auto_windows(grid, center)
    if isinstance(spec, str):
        pairs = []
        for item in spec.split(","):
            item = item.strip()
            if not item:
                continue
            try:
                a, b = (float(v) for v in item.split(":"))
            except ValueError:
                raise ConfigError(f"window '{item}' is not of the form a:b") from None
            pairs.append((a, b))
        spec = pairs
    out = []
    for w in spec:
        if len(w) != 2:
            raise ConfigError(f"window {w!r} must have two endpoints")
        a, b = float(w[0]), float(w[1])
        if not a < b:
            raise ConfigError(f"window [{a}, {b}] needs a < b")
        if b - a > grid.L:
            raise ConfigError(f"window [{a}, {b}] is longer than the box")
        out.append((a, b))
    return out


def _positive(v):
    return (v > 0, "must be positive")


def parse_config(data: dict, source: str = "<config>", lines: dict | None = None,
                 base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    r = _Reader(data, lines or {}, source)
    for key in data:
        if key not in TOP_LEVEL:
            raise r.error(key, f"unknown section '{key}'")
        if not isinstance(data[key], dict):
            raise r.error(key, f"section '{key}' must be a mapping")
        for sub in data[key]:
            if sub not in SECTION_KEYS[key]:
                raise r.error(f"{key}.{sub}", f"unknown key '{key}.{sub}'")

    def even8(v):
        return (v >= 8 and v % 2 == 0, "must be an even integer >= 8")

    grid = Grid(r.get("grid.L", float, check=_positive),
                r.get("grid.N1", int, check=even8),
                r.get("grid.N2", int, check=even8))
    dt = r.get("time.dt", float, check=_positive)
    T = r.get("time.T", float, check=_positive)
    cfl = r.get("time.cfl_safety", float, 0.5, check=lambda v: (0 < v <= 1, "must lie in (0, 1]"))
    dt_min = r.get("time.dt_min", float, None,
                   check=lambda v: (0 < v <= dt, "must lie in (0, time.dt]"))
    ramp = r.get("time.ramp_steps", int, 20, check=lambda v: (v >= 1, "must be >= 1"))
    cps = r.get("time.checkpoints", list, [T])
    try:
        cps = sorted({float(v) for v in cps} | {T})
    except (TypeError, ValueError):
        raise r.error("time.checkpoints", "checkpoints must be numbers") from None
    if any(v <= 0 or v > T for v in cps):
        raise r.error("time.checkpoints", "checkpoints must lie in (0, time.T]")

    kind = r.get("ic.kind", str)
    if kind not in SCENARIOS:
        raise r.error("ic.kind", f"unknown initial condition '{kind}'; choose from {sorted(SCENARIOS)}")
    params = r.get("ic.params", dict, {})
    allowed = set(scenario_parameters(kind))
    for p in params:
        if p not in allowed:
            raise r.error(f"ic.params.{p}", f"unknown parameter 'ic.params.{p}' for {kind}; "
                                            f"allowed: {sorted(allowed)}")
    seed = r.get("ic.seed", int, 0)

    cadence = r.get("output.cadence", float, None, check=_positive)
    out_dir = Path(r.get("output.dir", str, "run"))
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    save = r.get("output.save_trajectory", bool, True)

    center = r.get("diagnostics.center", float, grid.L / 2)
    win_spec = data.get("diagnostics", {}).get("windows", "auto")
    try:
        windows = parse_windows(win_spec, grid, center)
    except ConfigError as err:
        raise r.error("diagnostics.windows", str(err)) from None
    radii = [float(v) for v in r.get("diagnostics.distance_radii", list, [2.0])]
    if any(not 0 < v <= grid.L / 2 for v in radii):
        raise r.error("diagnostics.distance_radii", "radii must lie in (0, L/2]")
    eps = [float(v) for v in r.get("diagnostics.epsilons", list, [0.05])]
    if any(v <= 0 for v in eps):
        raise r.error("diagnostics.epsilons", "epsilons must be positive")

    M = r.get("constants.M", float, None, check=_positive)
    quad = QuadratureSpec(
        cutoff=r.get("quadrature.cutoff", float, 12.0,
                     check=lambda v: (v >= 10, "cutoff must be >= 10")),
        order=r.get("quadrature.order", int, 8, check=lambda v: (v >= 2, "must be >= 2")),
        levels=r.get("quadrature.levels", int, 24, check=lambda v: (v >= 4, "must be >= 4")),
    )
    try:
        sim = SimConfig(grid=grid, dt=dt, T_final=T, cfl_safety=cfl,
                        initial_condition=InitialCondition(kind, dict(params), seed),
                        output_cadence=cadence, checkpoints=tuple(cps), dt_min=dt_min,
                        ramp_steps=ramp)
    except ValueError as err:
        raise ConfigError(f"{source}: {err}") from None
    return RunConfig(sim=sim, out_dir=out_dir, windows=windows, center=center,
                     distance_radii=radii, epsilons=eps, M=M, quadrature=quad,
                     save_trajectory=save, raw=copy.deepcopy(data))


def load_config(path) -> RunConfig:
    """Read and validate a YAML configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ConfigError(f"{where}: YAML parse error: {getattr(err, 'problem', err)}") from None
    return parse_config(data if data is not None else {}, str(path), _line_map(text))


def set_key(data: dict, dotted: str, value) -> dict:
    """Return a deep copy of ``data`` with ``dotted`` set to ``value``."""
    out = copy.deepcopy(data)
    node = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return out
