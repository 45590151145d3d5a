"""Run configuration, CSV time series and binary snapshots."""

from __future__ import annotations

import csv
import difflib
import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import CSV_FIELDS, DiagnosticsRecord, record
from .dynamics import StepControl
from .forcing import ForcingSpec, TemporalWaveform
from .model import ModelParams, State
from .spectral import (
    LAMBDA1,
    PhysicalField,
    SpectralField,
    forward_transform,
    grid_for,
    inverse_transform,
    random_field,
    single_mode,
)


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending key path."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


# --------------------------------------------------------------------------
# config schema


@dataclass
class ModelConfig:
    nu: float
    prandtl: float
    n_squared: float


@dataclass
class GridConfig:
    resolution: int = 128


@dataclass
class InitialConfig:
    kind: str = "random_band"
    seed: int = 0
    energy: float = 1.0
    mode: tuple[int, int] = (1, 0)
    band: int = 4


@dataclass
class WaveformConfig:
    kind: str = "constant"
    frequency: float = 1.0
    phase: float = 0.0
    terms: list[list[float]] = field(default_factory=list)


@dataclass
class ForcingComponentConfig:
    k: tuple[int, int]
    parity: tuple[str, str] = ("sine", "sine")
    amplitude: float = 1.0
    waveform: WaveformConfig = field(default_factory=WaveformConfig)


@dataclass
class ForcingConfig:
    components: list[ForcingComponentConfig] = field(default_factory=list)
    eta: float = 1.0


@dataclass
class SteppingConfig:
    dt: float | None = None
    cfl_safety: float = 0.5
    max_velocity_floor: float = 0.1


@dataclass
class OutputConfig:
    t_end: float = 1.0
    sample_every: int = 10
    out_dir: str = "out"


@dataclass
class RunConfig:
    model: ModelConfig
    grid: GridConfig = field(default_factory=GridConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    stepping: SteppingConfig = field(default_factory=SteppingConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


_SECTIONS = {
    "model": ("nu", "prandtl", "n_squared"),
    "grid": ("resolution",),
    "initial": ("kind", "seed", "energy", "mode", "band"),
    "forcing": ("components", "eta"),
    "stepping": ("dt", "cfl_safety", "max_velocity_floor"),
    "output": ("t_end", "sample_every", "out_dir"),
}
_COMPONENT_KEYS = ("k", "parity", "amplitude", "waveform")
_WAVEFORM_KEYS = ("kind", "frequency", "phase", "terms")

_SYNONYMS = {
    "viscosity": "nu", "viscocity": "nu", "pr": "prandtl", "prandtl_number": "prandtl",
    "n2": "n_squared", "buoyancy_frequency": "n_squared", "nsq": "n_squared",
    "n": "resolution", "nx": "resolution", "tend": "t_end", "t_final": "t_end",
    "cfl": "cfl_safety", "output_dir": "out_dir",
}


def _suggest(key: str, allowed) -> str | None:
    k = key.lower()
    if k in _SYNONYMS and _SYNONYMS[k] in allowed:
        return _SYNONYMS[k]
    pool = list(allowed) + [s for s, t in _SYNONYMS.items() if t in allowed]
    match = difflib.get_close_matches(k, pool, n=1, cutoff=0.6)
    if match:
        return _SYNONYMS.get(match[0], match[0])
    return None


def _check_keys(obj, allowed, where: str):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", where)
    for key in obj:
        if key not in allowed:
            hint = _suggest(key, allowed)
            msg = f"unknown key {key!r}"
            if hint:
                msg += f"; did you mean {hint!r}?"
            raise ConfigError(msg, f"{where}.{key}" if where else key)


def _number(obj, key, where, default=None, positive=False, integer=False, allow_none=False):
    if key not in obj:
        if default is None and not allow_none:
            raise ConfigError("required field is missing", f"{where}.{key}")
        return default
    v = obj[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", f"{where}.{key}")
    if integer and int(v) != v:
        raise ConfigError(f"expected an integer, got {v!r}", f"{where}.{key}")
    if not math.isfinite(v):
        raise ConfigError("must be finite", f"{where}.{key}")
    if positive and v <= 0:
        raise ConfigError(f"must be positive, got {v!r}", f"{where}.{key}")
    return int(v) if integer else float(v)


def _pair(v, where, kind=int):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"expected a pair, got {v!r}", where)
    if kind is int and not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"expected two integers, got {v!r}", where)
    return tuple(v)


def parse_config(data: dict) -> RunConfig:
    _check_keys(data, _SECTIONS, "")
    if "model" not in data:
        raise ConfigError("required section is missing", "model")
    for section, keys in _SECTIONS.items():
        if section in data:
            _check_keys(data[section], keys, section)

    m = data["model"]
    model = ModelConfig(
        nu=_number(m, "nu", "model", positive=True),
        prandtl=_number(m, "prandtl", "model", positive=True),
        n_squared=_number(m, "n_squared", "model", positive=True),
    )

    g = data.get("grid", {})
    res = _number(g, "resolution", "grid", 128, positive=True, integer=True)
    if res < 16 or res & (res - 1):
        raise ConfigError(f"must be a power of two >= 16, got {res}", "grid.resolution")
    grid = GridConfig(res)

    i = data.get("initial", {})
    kind = i.get("kind", "random_band")
    if kind not in ("zero", "single_mode", "random_band"):
        raise ConfigError(f"must be zero, single_mode or random_band, got {kind!r}", "initial.kind")
    mode = _pair(i.get("mode", [1, 0]), "initial.mode")
    if mode == (0, 0):
        raise ConfigError("the (0, 0) mode is excluded by the zero-mean constraint", "initial.mode")
    seed = i.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"must be a nonnegative integer, got {seed!r}", "initial.seed")
    energy = _number(i, "energy", "initial", 1.0)
    if energy < 0:
        raise ConfigError("must be nonnegative", "initial.energy")
    initial = InitialConfig(kind, seed, energy, mode,
                            _number(i, "band", "initial", 4, positive=True, integer=True))
    if max(abs(mode[0]), abs(mode[1])) > res // 3:
        raise ConfigError("mode lies outside the dealiased band", "initial.mode")

    f = data.get("forcing", {})
    comps = []
    raw = f.get("components", [])
    if not isinstance(raw, list):
        raise ConfigError("expected a list", "forcing.components")
    for n, c in enumerate(raw):
        where = f"forcing.components[{n}]"
        _check_keys(c, _COMPONENT_KEYS, where)
        if "k" not in c:
            raise ConfigError("required field is missing", f"{where}.k")
        k = _pair(c["k"], f"{where}.k")
        parity = c.get("parity", ["sine", "sine"])
        if isinstance(parity, str):
            parity = [parity, parity]
        parity = _pair(parity, f"{where}.parity", kind=str)
        if any(p not in ("sine", "cosine") for p in parity):
            raise ConfigError(f"parity must be sine or cosine, got {parity}", f"{where}.parity")
        if max(abs(k[0]), abs(k[1])) > res // 3:
            raise ConfigError("mode lies outside the dealiased band", f"{where}.k")
        if k == (0, 0) or any(kk == 0 and p == "sine" for kk, p in zip(k, parity)):
            raise ConfigError("mode vanishes identically or is a constant", f"{where}.k")
        wv = c.get("waveform", {})
        _check_keys(wv, _WAVEFORM_KEYS, f"{where}.waveform")
        waveform = WaveformConfig(
            kind=wv.get("kind", "constant"),
            frequency=_number(wv, "frequency", f"{where}.waveform", 1.0),
            phase=_number(wv, "phase", f"{where}.waveform", 0.0),
            terms=[list(map(float, t)) for t in wv.get("terms", [])],
        )
        try:
            _waveform(waveform)
        except ValueError as exc:
            raise ConfigError(str(exc), f"{where}.waveform") from None
        comps.append(ForcingComponentConfig(k, parity, _number(c, "amplitude", where, 1.0), waveform))
    forcing = ForcingConfig(comps, _number(f, "eta", "forcing", 1.0, positive=True))

    s = data.get("stepping", {})
    cfl = _number(s, "cfl_safety", "stepping", 0.5, positive=True)
    if cfl > 1:
        raise ConfigError("must lie in (0, 1]", "stepping.cfl_safety")
    stepping = SteppingConfig(
        dt=_number(s, "dt", "stepping", None, positive=True, allow_none=True),
        cfl_safety=cfl,
        max_velocity_floor=_number(s, "max_velocity_floor", "stepping", 0.1, positive=True),
    )

    o = data.get("output", {})
    out_dir = o.get("out_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("expected a nonempty path string", "output.out_dir")
    output = OutputConfig(
        t_end=_number(o, "t_end", "output", 1.0, positive=True),
        sample_every=_number(o, "sample_every", "output", 10, positive=True, integer=True),
        out_dir=out_dir,
    )
    return RunConfig(model, grid, initial, forcing, stepping, output)


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


# --------------------------------------------------------------------------
# building model objects from a config


def _waveform(w: WaveformConfig) -> TemporalWaveform:
    return TemporalWaveform(w.kind, w.frequency, w.phase, tuple(tuple(t) for t in w.terms))


def build_params(cfg: RunConfig) -> ModelParams:
    m = cfg.model
    return ModelParams(m.nu, m.prandtl, m.n_squared, grid_for(cfg.grid.resolution))


def build_control(cfg: RunConfig) -> StepControl:
    s = cfg.stepping
    return StepControl(s.dt, s.cfl_safety, s.max_velocity_floor)


def build_forcing(cfg: RunConfig, params: ModelParams) -> ForcingSpec | None:
    if not cfg.forcing.components:
        return None
    comps = []
    for c in cfg.forcing.components:
        mode = single_mode(params.grid, c.k[0], c.k[1], c.amplitude, tuple(c.parity))
        comps.append((mode, _waveform(c.waveform)))
    return ForcingSpec(tuple(comps), cfg.forcing.eta)


def single_mode_state(params: ModelParams, kx: int, kz: int, energy: float) -> State:
    """omega and rho both functions of the phase 2 pi (kx x + kz z), so every
    Jacobian vanishes and the run stays on one wavevector pair. Energy is split
    evenly between the stream-function and density parts."""
    grid = params.grid
    lam = LAMBDA1 * (kx**2 + kz**2)
    c = math.sqrt(energy / (params.n_squared * lam))
    b = math.sqrt(energy)
    x, z = grid.coordinates
    phase = np.cos(2 * math.pi * (kx * x + kz * z))
    omega = forward_transform(PhysicalField(grid, -lam * c * phase))
    rho = forward_transform(PhysicalField(grid, b * phase))
    return State(omega, rho)


def random_state(params: ModelParams, seed: int, energy: float, band: int = 4) -> State:
    rng = np.random.default_rng(seed)
    omega = random_field(params.grid, rng, band=band)
    rho = random_field(params.grid, rng, band=band)
    e = record(State(omega, rho), params).energy
    scale = math.sqrt(energy / e) if e > 0 else 0.0
    return State(omega * scale, rho * scale)


def build_initial(cfg: RunConfig, params: ModelParams) -> State:
    i = cfg.initial
    if i.kind == "zero" or i.energy == 0:
        return State.zeros(params.grid)
    if i.kind == "single_mode":
        return single_mode_state(params, i.mode[0], i.mode[1], i.energy)
    return random_state(params, i.seed, i.energy, i.band)


# --------------------------------------------------------------------------
# CSV


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_timeseries(records, path) -> None:
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    lines = [",".join(CSV_FIELDS)]
    lines += [",".join(_fmt(v) for v in r.row()) for r in records]
    path.write_text("\n".join(lines) + "\n")


def read_timeseries(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header {header}")
        return [DiagnosticsRecord(*map(float, row)) for row in reader]


class TimeseriesWriter:
    """Append records to a CSV as they arrive so partial runs survive failure."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = None

    def __call__(self, rec: DiagnosticsRecord) -> None:
        if self._fh is None:
            self._fh = open(self.path, "w")
            self._fh.write(",".join(CSV_FIELDS) + "\n")
        self._fh.write(",".join(_fmt(v) for v in rec.row()) + "\n")
        self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# --------------------------------------------------------------------------
# snapshots

MAGIC = b"THCS"
VERSION = 1
_HEADER = struct.Struct("<4sIIdddd")


class SnapshotError(ValueError):
    pass


def write_snapshot(state: State, params: ModelParams, path) -> None:
    state.check_grid(params)
    n = params.grid.n
    header = _HEADER.pack(MAGIC, VERSION, n, float(state.time), params.nu, params.prandtl,
                          params.n_squared)
    omega = inverse_transform(state.omega).values.astype("<f8")
    rho = inverse_transform(state.rho).values.astype("<f8")
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(omega.tobytes(order="C"))
        fh.write(rho.tobytes(order="C"))
    os.replace(tmp, path)


def read_snapshot(path) -> tuple[State, ModelParams]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, n, t, nu, pr, n2 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError("not a THCS snapshot")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    size = n * n * 8
    if len(data) != _HEADER.size + 2 * size:
        raise SnapshotError(f"truncated snapshot: expected {_HEADER.size + 2 * size} bytes, got {len(data)}")
    grid = grid_for(n)
    params = ModelParams(nu, pr, n2, grid)
    fields = []
    for j in range(2):
        start = _HEADER.size + j * size
        values = np.frombuffer(data, dtype="<f8", count=n * n, offset=start).reshape(n, n)
        spec = forward_transform(PhysicalField(grid, values))
        # keep the stored samples so rewriting reproduces the file exactly
        fields.append(SpectralField(grid, spec.coefficients, PhysicalField(grid, values).values))
    return State(fields[0], fields[1], t), params
