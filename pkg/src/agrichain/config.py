"""Experiment configuration: defaults, validation, JSON files and env overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

from .errors import ConfigError
from .kinetics import SensorParams

ENV_PREFIX = "AGRICHAIN_"
KINETICS_PRESETS = ("figure", "table3", "custom")
COMPLIANCE_PREDICATES = ("argmax", "p_not_e")
LIKELIHOOD_MODES = ("class-marginal", "row")
GRANULARITIES = ("window", "sweep")


@dataclass
class ExperimentConfig:
    """All knobs of a simulation run.

    ``kinetics`` picks the rate constants: ``figure`` (k_D = 10, the scale of
    the response plots), ``table3`` (k_a = 1e-2, k_d = 1e-3) or ``custom``
    using ``k_a`` / ``k_d``. ``k_D`` set to a positive value overrides all of
    them, keeping ``k_d``.
    """

    seed: int = 42
    n_farms: int = 40
    sensors_per_gateway: int = 100
    kinetics: str = "figure"
    k_a: float = 1e-4
    k_d: float = 1e-3
    k_D: float = 0.0
    r_max: float = 100.0
    epsilon_r: float = 1e-5
    inter_low: float = 0.0
    inter_high: float = 50.0
    intra_sigma: float = 1.0
    drift: float = 0.0
    tw: int = 50
    rounds: int = 15
    alpha: float = 0.05
    cr0: float = 500.0
    difficulty: int = 12
    fn_count: int = 3
    compliance: str = "argmax"
    p_not_e_threshold: float = 0.8
    likelihood: str = "class-marginal"
    granularity: str = "window"
    sbu_epsilon: float = 1e-5
    trace_threshold: float = 1e-3
    seeds: int = 10
    svg: bool = False
    out_dir: str = "results"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        def need(ok: bool, name: str, msg: str):
            if not ok:
                raise ConfigError(name, msg)

        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        need(1 <= self.n_farms <= 10_000, "n_farms", "must be in [1, 10000]")
        need(1 <= self.sensors_per_gateway <= 100_000, "sensors_per_gateway", "must be in [1, 100000]")
        need(self.kinetics in KINETICS_PRESETS, "kinetics", f"must be one of {KINETICS_PRESETS}")
        for name in ("k_a", "k_d", "r_max", "epsilon_r"):
            need(getattr(self, name) > 0, name, "must be > 0")
        need(self.k_D >= 0, "k_D", "must be >= 0 (0 disables the shortcut)")
        need(0 <= self.inter_low <= self.inter_high, "inter_low", "need 0 <= inter_low <= inter_high")
        need(self.intra_sigma >= 0, "intra_sigma", "must be >= 0")
        need(self.drift >= 0, "drift", "must be >= 0")
        need(1 <= self.tw <= 10_000, "tw", "must be in [1, 10000]")
        need(1 <= self.rounds <= 10_000, "rounds", "must be in [1, 10000]")
        need(self.alpha >= 0, "alpha", "must be >= 0")
        need(self.cr0 >= 0, "cr0", "must be >= 0")
        need(0 <= self.difficulty <= 24, "difficulty", "must be in [0, 24] bits")
        need(1 <= self.fn_count <= 1000, "fn_count", "must be in [1, 1000]")
        need(self.compliance in COMPLIANCE_PREDICATES, "compliance", f"must be one of {COMPLIANCE_PREDICATES}")
        need(0 < self.p_not_e_threshold <= 1, "p_not_e_threshold", "must be in (0, 1]")
        need(self.likelihood in LIKELIHOOD_MODES, "likelihood", f"must be one of {LIKELIHOOD_MODES}")
        need(self.granularity in GRANULARITIES, "granularity", f"must be one of {GRANULARITIES}")
        need(self.sbu_epsilon > 0, "sbu_epsilon", "must be > 0")
        need(self.trace_threshold > 0, "trace_threshold", "must be > 0")
        need(1 <= self.seeds <= 1000, "seeds", "must be in [1, 1000]")

    # -- derived ------------------------------------------------------------

    def sensor_params(self) -> SensorParams:
        if self.k_D > 0:
            return SensorParams.from_kd(self.k_D, self.k_d, r_max=self.r_max, epsilon_r=self.epsilon_r)
        if self.kinetics == "figure":
            base = SensorParams.figure()
        elif self.kinetics == "table3":
            base = SensorParams.table3()
        else:
            base = SensorParams(self.k_a, self.k_d)
        return SensorParams(base.k_a, base.k_d, self.r_max, self.epsilon_r)

    @property
    def inter_range(self) -> tuple[float, float]:
        return (self.inter_low, self.inter_high)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(name, "unknown configuration field")
        return cls(**{k: _coerce(known[k], k, v) for k, v in data.items()})

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("<file>", "top level must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def with_env(self, environ: Mapping[str, str] | None = None) -> "ExperimentConfig":
        """Apply ``AGRICHAIN_<FIELD>`` overrides (field name upper-cased)."""
        environ = os.environ if environ is None else environ
        changes = {}
        for f in fields(self):
            key = ENV_PREFIX + f.name.upper()
            if key in environ and f.name != "extra":
                changes[f.name] = _parse_text(f, environ[key])
        return self.replace(**changes) if changes else self


def _field_type(f: dataclasses.Field) -> type:
    return {"int": int, "float": float, "str": str, "bool": bool, "dict": dict}[str(f.type)]


def _coerce(f: dataclasses.Field, name: str, value):
    kind = _field_type(f)
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(value, kind) and not (kind is int and isinstance(value, bool)):
        return value
    raise ConfigError(name, f"expected {kind.__name__}, got {type(value).__name__}")


def _parse_text(f: dataclasses.Field, text: str):
    kind = _field_type(f)
    try:
        if kind is bool:
            lowered = text.strip().lower()
            if lowered not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(text)
            return lowered in ("1", "true", "yes")
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f.name, f"cannot parse {text!r} as {kind.__name__}") from exc
