"""Experiment configuration: a flat TOML file of scalar keys."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from cwt2.errors import ConfigError
from cwt2.spectral_noise import PeriodicGrid, SpatialCovariance
from cwt2.wave_solver import Drift, InitialData, m_of_t


@dataclass
class ExperimentConfig:
    beta: float = 1.0
    amplitude: float = 1.0
    box_length: float = 4.0
    points_per_axis: int = 16
    dt: float = 0.03125
    n_steps: int = 32
    K: float = 1.0
    drift: str = "sin"
    seed: int = 0
    replicas: int = 1000
    shift: str = "bump:amp=1.0,width=0.5,levels=1"
    probes: list = field(default_factory=lambda: ["end:8,8,8"])
    init: str = "zero"
    dealias: bool = False
    out: str = "out"

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------ derived
    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.box_length, self.points_per_axis, self.dt, self.n_steps)

    @property
    def cov(self) -> SpatialCovariance:
        return SpatialCovariance(self.beta, self.amplitude)

    def make_drift(self) -> Drift:
        if self.drift == "sin":
            return Drift.sine(self.K)
        if self.drift == "zero":
            return Drift.zero()
        if self.drift.startswith("const="):
            return Drift.constant(float(self.drift.split("=", 1)[1]))
        raise ConfigError(f"unknown drift {self.drift!r} (expected sin, zero or const=<value>)")

    def make_init(self) -> InitialData:
        spec = self.init.strip()
        if spec == "zero":
            return InitialData.zero(self.grid)
        kind, _, rest = spec.partition(":")
        if kind != "bump":
            raise ConfigError(f"unknown init {spec!r} (expected zero or bump:amp=..,width=..)")
        params = dict(amp=1.0, width=0.25)
        for item in filter(None, rest.split(",")):
            key, _, value = item.partition("=")
            if key not in params:
                raise ConfigError(f"bad init parameter {item!r}")
            params[key] = float(value)
        return InitialData.bump(self.grid, params["amp"], params["width"])

    def make_shift(self, spec: str | None = None):
        from cwt2.girsanov_coupling import parse_shift_spec

        return parse_shift_spec(self.shift if spec is None else spec, self.grid, self.cov)

    def probe_points(self, probes=None):
        return parse_probes(self.probes if probes is None else probes, self.n_steps, self.points_per_axis)

    def transport_constant(self) -> tuple[float, float]:
        """``(M(T), C(T, K))`` for this configuration."""
        from cwt2.girsanov_coupling import transport_constant

        M_T = m_of_t(self.T, self.cov)
        return M_T, transport_constant(self.T, self.make_drift().K, M_T)

    # --------------------------------------------------------------- validation
    def validate(self):
        for name in ("beta", "amplitude", "box_length", "dt", "K"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}", key=name)
        for name in ("points_per_axis", "n_steps", "seed", "replicas"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{name} must be an integer, got {v!r}", key=name)
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1", key="replicas")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative", key="seed")
        if self.K < 0:
            raise ConfigError("K must be nonnegative", key="K")
        try:
            self.cov
        except ConfigError as exc:
            raise ConfigError(str(exc), key="beta") from None
        try:
            self.grid
        except ConfigError as exc:
            bad = str(exc).split()[0]
            raise ConfigError(str(exc), key=bad) from None
        try:
            self.make_drift()
        except (ConfigError, ValueError) as exc:
            raise ConfigError(str(exc), key="drift") from None
        try:
            init = self.make_init()
        except (ConfigError, ValueError) as exc:
            raise ConfigError(str(exc), key="init") from None
        if self.T + init.support_radius >= self.box_length / 2:
            raise ConfigError(
                f"wrap-around: T + r0 = {self.T} + {init.support_radius:.6g} must be < L/2 = {self.box_length / 2}",
                key="n_steps",
            )
        try:
            self.probe_points()
        except ConfigError as exc:
            raise ConfigError(str(exc), key="probes") from None

    # ------------------------------------------------------------ serialisation
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_toml(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            lines.append(f"{key} = {_toml_value(value)}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_toml())

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            m = re.search(r"line (\d+)", str(exc))
            raise ConfigError(f"malformed config: {exc}", line=int(m.group(1)) if m else None) from None
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown key {key!r}", line=_line_of(text, key))
        if isinstance(data.get("dt"), int):
            data["dt"] = float(data["dt"])
        for name in ("beta", "amplitude", "box_length", "K"):
            if isinstance(data.get(name), int) and not isinstance(data[name], bool):
                data[name] = float(data[name])
        try:
            return cls(**data)
        except ConfigError as exc:
            raise ConfigError(exc.bare, line=_line_of(text, exc.key) if exc.key else None) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.loads(text)


def parse_probes(probes, n_steps: int, n: int):
    """``["end:8,8,8", "16:0,0,0"]`` -> ``[(32, 8, 8, 8), (16, 0, 0, 0)]``."""
    if isinstance(probes, str):
        probes = [p for p in probes.split(";") if p.strip()]
    if not probes:
        raise ConfigError("at least one probe is required")
    if len(probes) > 32:
        raise ConfigError(f"at most 32 probes are supported, got {len(probes)}")
    out = []
    for p in probes:
        when, sep, where = str(p).strip().partition(":")
        try:
            step = n_steps if when == "end" else int(when)
            ijk = tuple(int(c) for c in where.split(","))
        except ValueError:
            raise ConfigError(f"bad probe {p!r}; expected 'step:i,j,k'") from None
        if not sep or len(ijk) != 3:
            raise ConfigError(f"bad probe {p!r}; expected 'step:i,j,k'")
        if not 0 <= step <= n_steps or not all(0 <= c < n for c in ijk):
            raise ConfigError(f"probe {p!r} lies outside the {n_steps}-step, {n}^3 grid")
        out.append((step,) + ijk)
    return out


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {value!r}")


def _line_of(text: str, key: str):
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None
