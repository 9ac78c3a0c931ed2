"""Experiment configuration: JSON in, validated dataclass out."""

from __future__ import annotations

import copy
import dataclasses
import json

from .errors import BanditNewtonError, ConfigError
from .ons import ADVERSARIAL, STOCHASTIC, constants_adversarial, constants_stochastic

OVERRIDE_KEYS = ("eta", "lam", "sigma_sq", "gamma", "epsilon", "F_max", "C_log", "M")
_ALIASES = {"η": "eta", "λ": "lam", "lambda": "lam", "sigma2": "sigma_sq", "σ²": "sigma_sq",
            "γ": "gamma", "ε": "epsilon", "eps": "epsilon", "fmax": "F_max"}


@dataclasses.dataclass
class ExperimentConfig:
    body: dict
    loss: dict
    mode: str = STOCHASTIC
    n: int = 1000
    delta: float = 0.01
    overrides: dict = dataclasses.field(default_factory=dict)
    replicas: int = 1
    seed: int = 0
    out: str = "results"
    positioning: dict = dataclasses.field(default_factory=lambda: {"kind": "identity"})

    def __post_init__(self):
        if self.mode not in (STOCHASTIC, ADVERSARIAL):
            raise ConfigError(f"mode must be 'stochastic' or 'adversarial', got {self.mode!r}")
        if int(self.n) != self.n or self.n < 0:
            raise ConfigError("n must be a nonnegative integer")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigError("replicas must be a positive integer")
        self.n, self.replicas, self.seed = int(self.n), int(self.replicas), int(self.seed)
        self.delta = float(self.delta)
        self.overrides = {_canonical(k): (None if v is None else float(v)) for k, v in self.overrides.items()}
        if "kind" not in self.body:
            raise ConfigError("body spec needs a 'kind'")
        if "loss" not in self.loss:
            raise ConfigError("loss spec needs a 'loss' entry")
        self.constants()  # validates overrides

    @property
    def dim(self):
        b = self.body
        if "d" in b:
            return int(b["d"])
        for key in ("center", "lo"):
            if key in b:
                return len(b[key])
        if "shape" in b:
            return len(b["shape"])
        if "rows" in b:
            return len(b["rows"][0][0])
        raise ConfigError("cannot infer the dimension from the body spec")

    def constants(self):
        """AlgoConstants for this config; a horizon of 0 uses n = 1 for the formulas."""
        ov = dict(self.overrides)
        C_log = ov.pop("C_log", None) or 1.0
        M = ov.pop("M", None)
        n = max(self.n, 1)
        try:
            if self.mode == STOCHASTIC:
                consts = constants_stochastic(n, self.dim, self.delta, M if M else 1.0, C_log)
            else:
                consts = constants_adversarial(n, self.dim, self.delta, C_log)
            return consts.with_overrides(**ov) if ov else consts
        except BanditNewtonError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data):
        data = copy.deepcopy(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for key in ("body", "loss"):
            if key not in data:
                raise ConfigError(f"config needs '{key}'")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def with_override(self, key, value):
        """Copy with one dotted-path setting replaced (``n=500``, ``loss.noise.std=0.2``, ``eta=0.01``)."""
        data = self.to_dict()
        key = _canonical(key)
        if key in OVERRIDE_KEYS:
            data["overrides"][key] = _parse_value(value)
        else:
            parts = key.split(".")
            node = data
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    node[p] = {}
                node = node[p]
            if parts[0] not in data and len(parts) == 1:
                raise ConfigError(f"unknown setting {key!r}")
            node[parts[-1]] = _parse_value(value)
        return ExperimentConfig.from_dict(data)


def _canonical(key):
    return _ALIASES.get(key, key)


def _parse_value(value):
    if not isinstance(value, str):
        return value
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value
