"""Scenario files: a YAML schema for one coupled-network experiment.

A scenario pins the problem flavor, the agent matrices, the topology (an
inline coupling matrix or a seeded random generator), the initial
condition (inline stacked vector or a seeded random draw), and the
integration settings. Matrices are row-major nested arrays; floats are
written with full round-trip precision so validation tolerances are never
consumed by serialization loss.

Example::

    problem: output-coupling
    agent:
      A: [[0.0, 1.0], [-1.0, 0.0]]
      C: [[0.0, 1.0]]
    topology:
      gamma: [[-1.0, 1.0], [1.0, -1.0]]
    x0:
      random: true
      seed: 7
      scale: 1.0
    horizon: 20.0
    step: 0.001
    method: exact-expm
    outputs: out
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .gains import LinearAgent
from .network import (
    NetworkTopology,
    random_connected_topology,
    validate_topology,
)

__all__ = [
    "TopologySpec",
    "InitialStateSpec",
    "ScenarioConfig",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "write_config",
    "build_topology",
    "build_initial_state",
]

PROBLEMS = ("output-coupling", "state-coupling")
METHODS = ("exact-expm", "rk4")


@dataclass(frozen=True)
class TopologySpec:
    """Inline coupling matrix or generator parameters, never both."""

    gamma: np.ndarray | None = None
    p: int | None = None
    density: float | None = None
    seed: int | None = None

    @property
    def is_generated(self) -> bool:
        return self.gamma is None


@dataclass(frozen=True)
class InitialStateSpec:
    """Inline stacked vector or a seeded uniform draw from [-scale, scale]."""

    values: np.ndarray | None = None
    seed: int | None = None
    scale: float = 1.0

    @property
    def is_random(self) -> bool:
        return self.values is None


@dataclass(frozen=True)
class ScenarioConfig:
    problem: str
    agent: LinearAgent
    topology: TopologySpec
    x0: InitialStateSpec
    horizon: float
    step: float
    method: str = "exact-expm"
    outputs: str | None = None


def _matrix(node, name: str) -> np.ndarray:
    try:
        arr = np.array(node, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a numeric array: {exc}") from exc
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be a nested (2-D) array")
    return arr


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Validate a parsed scenario mapping into a ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("scenario root must be a mapping")
    missing = {"problem", "agent", "topology", "x0", "horizon", "step"} - raw.keys()
    if missing:
        raise ConfigError(f"scenario is missing keys: {sorted(missing)}")

    problem = raw["problem"]
    if problem not in PROBLEMS:
        raise ConfigError(f"problem must be one of {PROBLEMS}, got {problem!r}")

    agent_node = raw["agent"]
    if not isinstance(agent_node, dict) or "A" not in agent_node:
        raise ConfigError("agent must be a mapping with at least A")
    has_c = "C" in agent_node
    has_b = "B" in agent_node
    if has_c == has_b:
        raise ConfigError("agent must carry exactly one of C or B")
    if problem == "output-coupling" and not has_c:
        raise ConfigError("output-coupling requires agent.C")
    if problem == "state-coupling" and not has_b:
        raise ConfigError("state-coupling requires agent.B")
    a = _matrix(agent_node["A"], "agent.A")
    agent = LinearAgent(
        A=a,
        C=_matrix(agent_node["C"], "agent.C") if has_c else None,
        B=_matrix(agent_node["B"], "agent.B") if has_b else None,
    )

    topo_node = raw["topology"]
    if not isinstance(topo_node, dict):
        raise ConfigError("topology must be a mapping")
    if "gamma" in topo_node:
        if {"p", "density", "seed"} & topo_node.keys():
            raise ConfigError("topology must have exactly one source: gamma or generator")
        topology = TopologySpec(gamma=_matrix(topo_node["gamma"], "topology.gamma"))
    else:
        missing = {"p", "density", "seed"} - topo_node.keys()
        if missing:
            raise ConfigError(f"topology generator is missing {sorted(missing)}")
        topology = TopologySpec(
            p=int(topo_node["p"]),
            density=float(topo_node["density"]),
            seed=int(topo_node["seed"]),
        )

    x0_node = raw["x0"]
    if not isinstance(x0_node, dict):
        raise ConfigError("x0 must be a mapping")
    if "values" in x0_node:
        if x0_node.get("random"):
            raise ConfigError("x0 must have exactly one source: values or random")
        values = np.asarray(x0_node["values"], dtype=float).ravel()
        x0 = InitialStateSpec(values=values)
    elif x0_node.get("random"):
        if "seed" not in x0_node:
            raise ConfigError("random x0 requires a seed")
        x0 = InitialStateSpec(
            seed=int(x0_node["seed"]), scale=float(x0_node.get("scale", 1.0))
        )
    else:
        raise ConfigError("x0 must carry values or random: true")

    horizon = float(raw["horizon"])
    step = float(raw["step"])
    if horizon <= 0 or step <= 0:
        raise ConfigError("horizon and step must be positive")
    if step > horizon:
        raise ConfigError("step must not exceed horizon")
    method = raw.get("method", "exact-expm")
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")

    outputs = raw.get("outputs")
    return ScenarioConfig(
        problem=problem, agent=agent, topology=topology, x0=x0,
        horizon=horizon, step=step, method=method,
        outputs=str(outputs) if outputs is not None else None,
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario file is not valid YAML: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(config: ScenarioConfig) -> dict:
    """Plain mapping with native lists/floats, ready for YAML emission."""
    agent: dict = {"A": config.agent.A.tolist()}
    if config.agent.C is not None:
        agent["C"] = config.agent.C.tolist()
    if config.agent.B is not None:
        agent["B"] = config.agent.B.tolist()
    if config.topology.is_generated:
        topology: dict = {
            "p": config.topology.p,
            "density": config.topology.density,
            "seed": config.topology.seed,
        }
    else:
        topology = {"gamma": config.topology.gamma.tolist()}
    if config.x0.is_random:
        x0: dict = {"random": True, "seed": config.x0.seed, "scale": config.x0.scale}
    else:
        x0 = {"values": config.x0.values.tolist()}
    out = {
        "problem": config.problem,
        "agent": agent,
        "topology": topology,
        "x0": x0,
        "horizon": config.horizon,
        "step": config.step,
        "method": config.method,
    }
    if config.outputs is not None:
        out["outputs"] = config.outputs
    return out


def write_config(config: ScenarioConfig, path) -> None:
    """Write a scenario file; floats round-trip bit-identically."""
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False))


def build_topology(config: ScenarioConfig, seed_override: int | None = None) -> NetworkTopology:
    spec = config.topology
    if spec.is_generated:
        seed = seed_override if seed_override is not None else spec.seed
        return random_connected_topology(spec.p, spec.density, seed)
    return validate_topology(spec.gamma)


def build_initial_state(
    config: ScenarioConfig,
    topology: NetworkTopology,
    seed_override: int | None = None,
) -> tuple[np.ndarray, int | None]:
    """Materialize x0; returns the vector and the seed actually used."""
    size = topology.p * config.agent.n
    spec = config.x0
    if not spec.is_random:
        if spec.values.size != size:
            raise ConfigError(
                f"x0 has {spec.values.size} entries, expected p*n = {size}"
            )
        return spec.values.copy(), None
    seed = seed_override if seed_override is not None else spec.seed
    rng = np.random.default_rng(seed)
    return rng.uniform(-spec.scale, spec.scale, size=size), seed
