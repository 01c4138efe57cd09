"""Run configuration: an INI file with one section per concern.

Example::

    [run]
    seed = 7
    shots = exact

    [mermin]
    order = 3
    eta = 0.1

Missing keys take their defaults; unknown sections or keys are rejected.
``dump_config`` writes the canonical form (every key, fixed order).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from typing import Any

from .errormodel import NoiseConfig
from .mitigation import CORRECTIONS, MerminConfig

CHANNELS = ("identity", "depolarizing", "X", "Y", "Z", "H", "S", "T", "Gx", "Gy", "CNOT")
DEFAULT_ETA_GRID = tuple(k / 10 for k in range(11))


class ConfigError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_shots(s: str) -> int | None:
    s = s.strip()
    return None if s.lower() == "exact" else int(s)


def _parse_floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _parse_words(s: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in s.split(",") if v.strip())


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "exact"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# (section, key, field, parser)
_SCHEMA = (
    ("run", "n", "n", int),
    ("run", "seed", "seed", int),
    ("run", "replicas", "replicas", int),
    ("run", "shots", "shots", _parse_shots),
    ("run", "out_dir", "out_dir", str.strip),
    ("noise", "state_depol", "state_depol", float),
    ("noise", "gate_depol", "gate_depol", float),
    ("noise", "povm_noise_target", "povm_noise_target", float),
    ("mermin", "order", "order", int),
    ("mermin", "eta", "eta", float),
    ("mermin", "eta_grid", "eta_grid", _parse_floats),
    ("flags", "bypass_gst", "bypass_gst", _parse_bool),
    ("flags", "corrections", "corrections", _parse_words),
    ("gst", "weight_rho0", "weight_rho0", float),
    ("gst", "weight_gx", "weight_gx", float),
    ("gst", "weight_gy", "weight_gy", float),
    ("gst", "weight_e0", "weight_e0", float),
    ("qpt", "n", "qpt_n", int),
    ("qpt", "channel", "channel", str.strip),
    ("qpt", "p", "channel_p", float),
    ("qpt", "max_qubits", "max_qubits", int),
)
SECTIONS = tuple(dict.fromkeys(s for s, *_ in _SCHEMA))


@dataclass(frozen=True)
class RunConfig:
    n: int = 4
    seed: int = 0
    replicas: int = 16
    shots: int | None = None
    out_dir: str = "out"
    state_depol: float = 2e-2
    gate_depol: float = 2e-4
    povm_noise_target: float = 0.06
    order: int = 4
    eta: float = 0.2
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID
    bypass_gst: bool = False
    corrections: tuple[str, ...] = CORRECTIONS
    weight_rho0: float = 1e-3
    weight_gx: float = 1.0
    weight_gy: float = 1.0
    weight_e0: float = 1e-3
    qpt_n: int = 1
    channel: str = "depolarizing"
    channel_p: float = 0.1
    max_qubits: int = 3

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        if not 1 <= self.n <= 10:
            raise ConfigError(f"run.n must be in [1, 10], got {self.n}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"run.seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.replicas < 1:
            raise ConfigError(f"run.replicas must be positive, got {self.replicas}")
        if self.shots is not None and self.shots < 1:
            raise ConfigError(f"run.shots must be positive or 'exact', got {self.shots}")
        if not self.out_dir:
            raise ConfigError("run.out_dir must not be empty")
        if not self.eta_grid:
            raise ConfigError("mermin.eta_grid must not be empty")
        if any(not 0 <= e <= 1 for e in self.eta_grid):
            raise ConfigError(f"mermin.eta_grid values must lie in [0, 1], got {self.eta_grid}")
        if not self.corrections:
            raise ConfigError("flags.corrections must name at least one of raw, T, gamma")
        bad = [c for c in self.corrections if c not in CORRECTIONS]
        if bad:
            raise ConfigError(f"flags.corrections: unknown correction(s) {bad}; choose from {list(CORRECTIONS)}")
        for name in ("weight_rho0", "weight_gx", "weight_gy", "weight_e0"):
            w = getattr(self, name)
            if not (math.isfinite(w) and w >= 0):
                raise ConfigError(f"gst.{name} must be a nonnegative number, got {w}")
        if self.weight_gx + self.weight_gy + self.weight_rho0 + self.weight_e0 == 0:
            raise ConfigError("gst weights must not all be zero")
        if self.channel not in CHANNELS:
            raise ConfigError(f"qpt.channel must be one of {list(CHANNELS)}, got {self.channel!r}")
        if self.channel == "CNOT" and self.qpt_n != 2:
            raise ConfigError("qpt.channel CNOT needs qpt.n = 2")
        if not 0 <= self.channel_p <= 1:
            raise ConfigError(f"qpt.p must be in [0, 1], got {self.channel_p}")
        if self.max_qubits < 1:
            raise ConfigError("qpt.max_qubits must be positive")
        if not 1 <= self.qpt_n <= self.max_qubits:
            raise ConfigError(f"qpt.n must be in [1, {self.max_qubits}] (qpt.max_qubits), got {self.qpt_n}")
        for n in {self.n, self.qpt_n, self.order}:
            cap = math.sqrt(2.0 * 2**n)
            if self.povm_noise_target >= cap:
                raise ConfigError(
                    f"noise.povm_noise_target {self.povm_noise_target} unreachable for n={n} (must be < {cap:.4g})"
                )
        self.noise(self.n)
        self.mermin()

    @property
    def gauge_weights(self) -> dict[str, float]:
        return {"rho0": self.weight_rho0, "Gx": self.weight_gx, "Gy": self.weight_gy, "E0": self.weight_e0}

    def noise(self, n: int | None = None) -> NoiseConfig:
        return NoiseConfig(
            n=self.n if n is None else n,
            state_depol=self.state_depol,
            gate_depol=self.gate_depol,
            povm_noise_target=self.povm_noise_target,
            seed=self.seed,
        )

    def mermin(self, eta: float | None = None) -> MerminConfig:
        return MerminConfig(
            order=self.order,
            eta=self.eta if eta is None else eta,
            replicas=self.replicas,
            state_depol=self.state_depol,
            gate_depol=self.gate_depol,
            povm_noise_target=self.povm_noise_target,
            bypass_gst=self.bypass_gst,
            shots=self.shots,
            seed=self.seed,
            gauge_weights=self.gauge_weights,
        )

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def to_dict(self) -> dict:
        out: dict[str, dict] = {s: {} for s in SECTIONS}
        for section, key, attr, _ in _SCHEMA:
            v = getattr(self, attr)
            out[section][key] = list(v) if isinstance(v, tuple) else v
        return out


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    known = {(s, k): (attr, parse) for s, k, attr, parse in _SCHEMA}
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if (section, key) not in known:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            attr, parse = known[(section, key)]
            try:
                values[attr] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from exc
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        for s, key, attr, _ in _SCHEMA:
            if s == section:
                lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"

