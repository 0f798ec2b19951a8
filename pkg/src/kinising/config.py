"""Experiment configuration.

Every field has a default; files (JSON or YAML) may override any subset, and
unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .regpath import METHODS


@dataclass
class NetworkConfig:
    n_spins: int = 40
    avg_degree: float = 5.0
    coupling_scale: float = 1.0 / math.sqrt(2.0)
    field_value: float = 0.0
    seed: int = 1


@dataclass
class SimulationConfig:
    updates_per_spin: float = 200.0
    # an explicit data length overrides updates_per_spin
    n_steps: int | None = None
    burn_in: int | None = None
    seed: int = 2


@dataclass
class InferenceConfig:
    rate: float | None = None
    tolerance: float = 1e-5
    max_iters: int = 20000
    smoothing: float | None = None


@dataclass
class PathConfig:
    lambda_max: float = 60.0
    lambda_step: float = 0.5
    threshold_points: int = 200
    fisher_refresh: str = "reestimate_on_data"
    averaging: str = "all_times"
    methods: list = field(default_factory=lambda: list(METHODS))
    resimulate_seed: int = 3

    def lambda_grid(self):
        n = int(round(self.lambda_max / self.lambda_step))
        return np.arange(n + 1) * self.lambda_step


@dataclass
class EvaluationConfig:
    zero_tolerance: float = 0.0
    include_diagonal: bool = False


@dataclass
class OutputConfig:
    directory: str = "results"
    formats: list = field(default_factory=lambda: ["tables", "paths"])
    compact_history: bool = False


@dataclass
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    path: PathConfig = field(default_factory=PathConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    replicates: int = 5

    def validate(self):
        bad = [m for m in self.path.methods if m not in METHODS]
        if bad:
            raise ParameterError(f"unknown methods {bad}; choose from {METHODS}")
        if self.path.fisher_refresh not in ("reestimate_on_data", "resimulate"):
            raise ParameterError(f"unknown fisher_refresh {self.path.fisher_refresh!r}")
        if self.path.averaging not in ("all_times", "update_times"):
            raise ParameterError(f"unknown averaging {self.path.averaging!r}")
        if self.replicates < 1:
            raise ParameterError("replicates must be at least 1")
        return self

    def n_steps(self):
        if self.simulation.n_steps is not None:
            return int(self.simulation.n_steps)
        return int(round(self.network.n_spins * self.simulation.updates_per_spin))

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        """Short hash of the canonical JSON form, embedded in every table.

        The output directory is left out: where results go does not change them.
        """
        data = self.to_dict()
        del data["output"]["directory"]
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def replace(self, **sections):
        """Copy with some fields changed, e.g. ``replace(network={"seed": 4})``."""
        data = self.to_dict()
        for key, value in sections.items():
            if isinstance(value, dict):
                data[key].update(value)
            else:
                data[key] = value
        return from_dict(data)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ParameterError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ParameterError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTIONS.get(name) if cls is ExperimentConfig else None
        kwargs[name] = _build(sub, value, f"{where}.{name}") if sub else value
    return cls(**kwargs)


_SECTIONS = {
    "network": NetworkConfig,
    "simulation": SimulationConfig,
    "inference": InferenceConfig,
    "path": PathConfig,
    "evaluation": EvaluationConfig,
    "output": OutputConfig,
}


def from_dict(data) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "config").validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return from_dict(data)


def save_config(config, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def replicate_seed(seed, replicate):
    """Seed for replicate ``r``; replicate 0 keeps the configured seed."""
    if replicate == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), int(replicate)]).generate_state(1)[0])
