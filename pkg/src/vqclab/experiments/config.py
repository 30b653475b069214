"""Flat key-value experiment configuration (YAML on disk)."""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, fields

import yaml

from ..circuits import z_observable
from ..numeric import Observable

EXPERIMENTS = ("fig4", "concentration", "tail", "spread", "gradients", "design")
MODELS = ("naive", "tn-vqc", "tensor-hyper")
MAX_STATE_QUBITS = 14


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Every knob of every experiment; each driver reads the ones it needs.

    ``depth`` is the fixed ansatz depth (the fig4 subcommand); scans over n
    use ``depth_per_qubit * n`` for the unstructured circuit and
    ``ts_depth`` for the chain-entangled structured circuit.
    """

    experiment: str = "fig4"
    n: int = 12
    n_min: int = 4
    n_max: int = 9
    depth: int = 6
    depth_per_qubit: int = 4
    ts_depth: int = 2
    rank: int = 2
    models: list = field(default_factory=lambda: list(MODELS))
    observable: str = "Z0"
    m: int = 32
    m_list: list = field(default_factory=lambda: [8, 16, 32, 64, 128, 256])
    input_kind: str = "unit-norm"
    trials: int = 1000
    seeds: int = 10
    master_seed: int = 0
    ensemble: str = "circuit"
    eps_list: list = field(default_factory=lambda: [0.1, 0.2])
    param_dist: str = "uniform"
    param_scale: float = 1.0
    grad_slot: int = 0
    trace_checks: int = 8
    pairs: int = 200
    samples: int = 200
    brickwork_layers: int = 2
    gap_delta: float = 0.1

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        counts = ("n", "n_min", "n_max", "depth_per_qubit", "ts_depth", "rank", "m", "trials", "seeds",
                  "pairs", "samples", "brickwork_layers", "trace_checks")
        for name in counts:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.depth < 0:
            raise ConfigError("depth must be >= 0")
        if self.n_min > self.n_max:
            raise ConfigError("n_min exceeds n_max")
        if max(self.n, self.n_max) > MAX_STATE_QUBITS:
            raise ConfigError(f"statevector runs are limited to {MAX_STATE_QUBITS} qubits")
        if any(m < 1 for m in self.m_list):
            raise ConfigError("dataset sizes must be positive")
        if any(mod not in MODELS for mod in self.models):
            raise ConfigError(f"models must come from {MODELS}")
        if self.input_kind not in ("unit-norm", "uniform-angle"):
            raise ConfigError(f"unknown input_kind {self.input_kind!r}")
        if self.ensemble not in ("circuit", "haar"):
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")
        if self.param_dist not in ("uniform", "gaussian") or self.param_scale <= 0:
            raise ConfigError("param_dist must be uniform or gaussian with positive scale")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if any(e <= 0 for e in self.eps_list):
            raise ConfigError("eps values must be positive")
        parse_observable(self.observable, min(self.n, self.n_min))
        return self

    @property
    def n_range(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)

    @classmethod
    def from_dict(cls, data: dict, base: dict | None = None) -> "ExperimentConfig":
        """Build from ``data`` layered over ``base`` (default: field defaults)."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        for key, value in {**(base or {}), **data}.items():
            setattr(cfg, key, _coerce(key, value, getattr(cls(), key)))
        return cfg.validate()

    @classmethod
    def parse(cls, text: str, base: dict | None = None) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a flat key-value mapping")
        if any(isinstance(v, dict) for v in data.values()):
            raise ConfigError("config must be flat (no nested mappings)")
        return cls.from_dict(data, base)

    @classmethod
    def load(cls, path, base: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text, base)


def _coerce(key: str, value, default):
    """Convert ``value`` to the type of the field's default, rejecting lossy casts."""
    def one(v, kind):
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, (int, float, str)) or float(v) != int(float(v)):
                raise ValueError
            return int(float(v))
        if kind is float:
            if isinstance(v, bool):
                raise ValueError
            return float(v)
        if not isinstance(v, str):
            raise ValueError
        return v

    try:
        if isinstance(default, list):
            if not isinstance(value, (list, tuple)) or not value:
                raise ValueError
            return [one(v, type(default[0])) for v in value]
        return one(value, type(default))
    except (TypeError, ValueError, OverflowError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


# sizes each subcommand starts from before the config file is applied
EXPERIMENT_DEFAULTS = {
    "fig4": dict(n=12, depth=6, seeds=10, models=list(MODELS)),
    "concentration": dict(n_min=4, n_max=9, trials=1000, ensemble="circuit"),
    "tail": dict(n_min=4, n_max=9, trials=5000, ensemble="haar", eps_list=[0.1, 0.2]),
    "spread": dict(n_min=4, n_max=10, m=32, seeds=20, input_kind="uniform-angle", models=["naive", "tn-vqc"]),
    "gradients": dict(n_min=4, n_max=9, trials=1000, models=["naive", "tn-vqc", "tensor-hyper"]),
    "design": dict(n_min=3, n_max=6, pairs=200, samples=200),
}


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    return ExperimentConfig.from_dict({"experiment": experiment, **EXPERIMENT_DEFAULTS[experiment]})


def experiment_config(experiment: str, path=None, seed: int | None = None) -> ExperimentConfig:
    """Subcommand defaults, overlaid by the config file, overlaid by ``seed``."""
    base = default_config(experiment).to_dict()
    cfg = ExperimentConfig.load(path, base) if path else default_config(experiment)
    if cfg.experiment != experiment:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {experiment!r}")
    if seed is not None:
        cfg = ExperimentConfig.from_dict({"master_seed": seed}, cfg.to_dict())
    return cfg


_TERM = re.compile(r"([XYZ])(\d+)")


def parse_observable(spec: str, n: int) -> Observable:
    """``"I"`` or a Pauli string such as ``"Z0"`` / ``"X1Z2"``."""
    spec = spec.strip()
    if spec == "I":
        return Observable.identity(n)
    terms = _TERM.findall(spec)
    if not terms or "".join(a + b for a, b in terms) != spec:
        raise ConfigError(f"cannot parse observable {spec!r}")
    paulis = {int(q): p for p, q in terms}
    if len(paulis) != len(terms) or max(paulis) >= n:
        raise ConfigError(f"observable {spec!r} does not fit {n} qubits")
    if paulis == {0: "Z"}:
        return z_observable(n)
    return Observable.pauli(n, paulis)
