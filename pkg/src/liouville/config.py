"""Experiment configuration with validation and a lossless JSON round trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

from ._validation import ConfigurationError, check_exponent_parameter
from .field import DomainSpec

EXPERIMENTS = (
    "field",
    "lbm",
    "regularity",
    "thick-dimension",
    "diffusivity",
    "differentiability",
    "clock-normalization",
    "circle-variance",
    "positive-moment",
    "negative-moment",
    "lower-tail",
    "upper-tail",
    "harmonic-tail",
    "scale-invariance",
    "covariance",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun an experiment.

    ``options`` carries experiment-specific settings (ladders, windows,
    tolerances) as plain JSON values.
    """

    experiment: str
    alpha: float = 0.0
    gamma: float = 0.0
    domain: DomainSpec = dc_field(default_factory=lambda: DomainSpec("unit-square", 512))
    dt: float = 1e-6
    eps_ladder: tuple = (0.01,)
    replicas: int = 20
    seed: int = 0
    out: str = "out"
    options: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        check_exponent_parameter(self.alpha, "alpha")
        check_exponent_parameter(self.gamma, "gamma")
        if isinstance(self.domain, dict):
            object.__setattr__(self, "domain", DomainSpec(**self.domain))
        if not isinstance(self.dt, (int, float)) or not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")
        ladder = tuple(float(e) for e in self.eps_ladder)
        if not ladder or any(not 0 < e <= 1 for e in ladder):
            raise ConfigurationError(f"eps ladder entries must lie in (0, 1], got {self.eps_ladder!r}")
        object.__setattr__(self, "eps_ladder", ladder)
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigurationError(f"replicas must be a positive integer, got {self.replicas!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigurationError(f"seed must be a nonnegative integer, got {self.seed!r}")
        object.__setattr__(self, "replicas", int(self.replicas))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "options", json.loads(json.dumps(self.options)))

    def option(self, key, default=None):
        return self.options.get(key, default)

    def to_dict(self):
        d = asdict(self)
        d["domain"] = self.domain.to_dict()
        d["eps_ladder"] = list(self.eps_ladder)
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "domain" in data:
            data["domain"] = DomainSpec(**data["domain"])
        if "eps_ladder" in data:
            data["eps_ladder"] = tuple(data["eps_ladder"])
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())
