"""Experiment configuration files.

A config is a JSON document with the sections ``network``, ``cases``,
``sim`` and ``outputs``; see ``configs/paper_4_2.json`` for the reference
two-station study. ``network`` may be ``{"preset": "<name>"}`` or an
explicit description (``alpha``, ``P`` and optionally ``mu``,
``arrival_dist``, ``service_dist``). Each case sets the traffic
intensities and, optionally, gamma shapes or explicit distributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .approx import PMF_CONVENTIONS
from .network import DistributionSpec, NetworkSpec, validate
from .sim import SimConfig

DEFAULT_QUANTILES = (0.25, 0.50, 0.75, 0.90)
OUTPUTS = ("means", "quantiles", "histogram", "joint", "gtest", "bar-check")

PRESETS: dict[str, dict[str, Any]] = {
    "paper-4.2": {
        "alpha": [0.3, 0.2],
        "mu": [1.0, 1.0],
        "P": [[0.3, 0.6], [0.4, 0.2]],
        "arrival_dist": [{"family": "exponential"}] * 2,
        "service_dist": [{"family": "exponential"}] * 2,
    },
}

PAPER_SCALE = {"horizon": 1e9, "warmup_fraction": 0.9, "num_batches": 20, "joint_interval": 1e6}
DESK_HORIZON = 1e7


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Case:
    label: str
    spec: NetworkSpec
    rho: np.ndarray


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    network: NetworkSpec
    cases: tuple[Case, ...]
    sim: SimConfig
    outputs: tuple[str, ...] = OUTPUTS
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILES
    pmf_convention: str = "mass-preserving"
    source: dict = field(default_factory=dict)

    def select(self, labels: list[str] | None) -> ExperimentConfig:
        if not labels:
            return self
        missing = set(labels) - {c.label for c in self.cases}
        if missing:
            raise ConfigError(f"unknown case label(s): {', '.join(sorted(missing))}")
        return replace(self, cases=tuple(c for c in self.cases if c.label in labels))

    def with_sim(self, **changes: Any) -> ExperimentConfig:
        return replace(self, sim=replace(self.sim, **changes))


def _network(data: dict[str, Any]) -> NetworkSpec:
    if "preset" in data:
        name = data["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown network preset {name!r}")
        merged = dict(PRESETS[name])
        merged.update({k: v for k, v in data.items() if k != "preset"})
        data = merged
    data = dict(data)
    data.setdefault("mu", [1.0] * len(data["alpha"]))
    try:
        return NetworkSpec.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad network section: {exc}") from exc


def _case(base: NetworkSpec, data: dict[str, Any]) -> Case:
    label = str(data["label"])
    rho = np.asarray(data["rho"], dtype=float)
    if rho.shape != (base.J,):
        raise ConfigError(f"case {label}: rho needs {base.J} entries")
    if np.any(rho <= 0) or np.any(rho >= 1):
        raise ConfigError(f"case {label}: every rho must lie in (0, 1)")
    changes: dict[str, Any] = {}
    for key, shapes_key in (("arrival_dist", "arrival_shapes"), ("service_dist", "service_shapes")):
        if shapes_key in data:
            changes[key] = [DistributionSpec.gamma(s) for s in data[shapes_key]]
        elif key in data:
            changes[key] = [DistributionSpec.from_dict(d) for d in data[key]]
    spec = base.replace(**changes)
    problems = validate(spec)
    if problems:
        raise ConfigError(f"case {label}: " + "; ".join(problems))
    return Case(label=label, spec=spec.with_rho(rho), rho=rho)


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    if "network" not in data:
        raise ConfigError("config needs a 'network' section")
    network = _network(data["network"])
    problems = validate(network)
    if problems:
        raise ConfigError("network: " + "; ".join(problems))
    cases_data = data.get("cases") or [{"label": "base", "rho": (network.alpha * 0 + 0.5).tolist()}]
    cases = tuple(_case(network, c) for c in cases_data)
    labels = [c.label for c in cases]
    if len(set(labels)) != len(labels):
        raise ConfigError("case labels must be unique")
    sim_data = dict(data.get("sim", {}))
    sim_data.setdefault("horizon", DESK_HORIZON)
    if "joint_pair" in sim_data:
        sim_data["joint_pair"] = tuple(sim_data["joint_pair"])
    try:
        sim = SimConfig(**sim_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim: {exc}") from exc
    outputs = tuple(data.get("outputs", OUTPUTS))
    unknown = set(outputs) - set(OUTPUTS)
    if unknown:
        raise ConfigError(f"unknown outputs: {', '.join(sorted(unknown))}")
    levels = tuple(float(q) for q in data.get("quantile_levels", DEFAULT_QUANTILES))
    if any(not 0 < q < 1 for q in levels):
        raise ConfigError("quantile levels must lie in (0, 1)")
    convention = data.get("pmf_convention", "mass-preserving")
    if convention not in PMF_CONVENTIONS:
        raise ConfigError(f"unknown pmf_convention {convention!r}")
    return ExperimentConfig(
        network=network,
        cases=cases,
        sim=sim,
        outputs=outputs,
        quantile_levels=levels,
        pmf_convention=convention,
        source=data,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data)
