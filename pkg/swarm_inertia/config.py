"""
Configuration Module
Loads experiment configs from YAML, command-line overrides and the environment
"""
from __future__ import annotations

import copy
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import yaml
from dotenv import load_dotenv

from swarm_inertia.exceptions import ConfigurationError
from swarm_inertia.schemes import SchemeKind
from swarm_inertia.swarm_state import SwarmConfig

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "SWARM_INERTIA_THREADS"
OUT_DIR_ENV_VAR = "SWARM_INERTIA_OUT_DIR"
DEFAULT_OUT_DIR = "results"
BOX_KEYS = ("position_box", "velocity_box")
SWARM_KEYS = {f for f in SwarmConfig.__dataclass_fields__ if f != "lipschitz"}
LIPSCHITZ_KEYS = {"value", "samples", "seed", "inflate", "safety_factor", "box"}
BUNDLED_TABLES = ("ex1", "rastrigin", "rosenbrock", "styblinski", "oscillatory", "velocity")


class SuccessMode(str, Enum):
    F_GAP = "f_gap"
    X_DISTANCE = "x_distance"


@dataclass(frozen=True)
class SuccessCriterion:
    mode: SuccessMode
    tol: float

    def __post_init__(self):
        object.__setattr__(self, "mode", SuccessMode(self.mode))
        if not self.tol > 0:
            raise ConfigurationError(f"success.tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class MethodSpec:
    """A named scheme variant, e.g. SBI-IMEX without mass conservation."""

    label: str
    scheme: SchemeKind
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", SchemeKind(self.scheme))
        except ValueError as e:
            raise ConfigurationError(f"Unknown scheme '{self.scheme}' in method '{self.label}'") from e
        unknown = set(self.overrides) - SWARM_KEYS - set(BOX_KEYS)
        if unknown:
            raise ConfigurationError(f"Method '{self.label}' overrides unknown keys {sorted(unknown)}")


@dataclass
class ExperimentConfig:
    """Everything a batch needs: objective, methods, swarm sizes, boxes and seeds."""

    objective: str = "exp_sin_1d"
    dims: List[int] = field(default_factory=lambda: [1])
    methods: List[MethodSpec] = field(default_factory=lambda: [MethodSpec("SBI-SIMEX", SchemeKind.SBI_SIMEX)])
    swarm_sizes: List[int] = field(default_factory=lambda: [5, 10, 15, 20, 30])
    runs: int = 1000
    position_box: Any = field(default_factory=lambda: [-3.0, -1.0])
    velocity_box: Any = field(default_factory=lambda: [1.0, 5.0])
    swarm: Dict[str, Any] = field(default_factory=dict)
    lipschitz: Dict[str, Any] = field(default_factory=dict)
    success: Optional[SuccessCriterion] = None
    seed: int = 0
    out_dir: str = DEFAULT_OUT_DIR
    threads: int = 1
    trace: bool = False
    name: str = "experiment"

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError(f"runs must be >= 1, got {self.runs}")
        if not self.dims or any(int(d) < 1 for d in self.dims):
            raise ConfigurationError(f"dims must be a non-empty list of positive integers, got {self.dims}")
        if not self.swarm_sizes or any(int(n) < 1 for n in self.swarm_sizes):
            raise ConfigurationError(f"swarm_sizes must be positive integers, got {self.swarm_sizes}")
        if not self.methods:
            raise ConfigurationError("at least one method is required")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"method labels must be unique, got {labels}")
        unknown = set(self.swarm) - SWARM_KEYS
        if unknown:
            raise ConfigurationError(f"unknown swarm keys {sorted(unknown)}")
        unknown = set(self.lipschitz) - LIPSCHITZ_KEYS
        if unknown:
            raise ConfigurationError(f"unknown lipschitz keys {sorted(unknown)}")
        for d in self.dims:
            for method in self.methods:
                self.box_for("position_box", int(d), method)
                self.box_for("velocity_box", int(d), method)

    def box_for(self, key: str, dim: int, method: Optional[MethodSpec] = None) -> Tuple[np.ndarray, np.ndarray]:
        spec = getattr(self, key)
        if method is not None and key in method.overrides:
            spec = method.overrides[key]
        return resolve_box(spec, dim, key)


def resolve_box(spec: Any, dim: int, key: str = "box") -> Tuple[np.ndarray, np.ndarray]:
    """
    Turn a box spec into per-coordinate (lower, upper) arrays

    Accepts [lo, hi] (same interval on every coordinate), a list of [lo, hi]
    pairs, or a mapping with `lower`/`upper` entries (scalars or lists).
    """
    if isinstance(spec, dict):
        lower, upper = spec.get("lower"), spec.get("upper")
    elif isinstance(spec, (list, tuple)) and len(spec) == 2 and all(np.isscalar(s) for s in spec):
        lower, upper = spec
    elif isinstance(spec, (list, tuple)) and all(isinstance(s, (list, tuple)) and len(s) == 2 for s in spec):
        lower, upper = [s[0] for s in spec], [s[1] for s in spec]
    else:
        raise ConfigurationError(f"{key} must be [lo, hi], a list of pairs or {{lower, upper}}, got {spec!r}")
    try:
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).copy()
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).copy()
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"{key} does not fit dimension {dim}: {spec!r}") from e
    if np.any(lower > upper):
        raise ConfigurationError(f"{key} has lower > upper: {spec!r}")
    return lower, upper


def _parse_methods(raw: Any) -> List[MethodSpec]:
    if raw is None:
        return [MethodSpec("SBI-SIMEX", SchemeKind.SBI_SIMEX)]
    if isinstance(raw, str):
        raw = [raw]
    methods = []
    for entry in raw:
        if isinstance(entry, str):
            methods.append(MethodSpec(entry, entry))
        elif isinstance(entry, dict):
            entry = dict(entry)
            scheme = entry.pop("scheme", None)
            label = entry.pop("label", scheme)
            overrides = entry.pop("overrides", {}) or {}
            overrides.update(entry)
            if scheme is None:
                raise ConfigurationError(f"method entry {label!r} has no scheme")
            methods.append(MethodSpec(str(label), scheme, overrides))
        else:
            raise ConfigurationError(f"cannot read method entry {entry!r}")
    return methods


def experiment_config_from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    raw = copy.deepcopy(raw or {})
    known = set(ExperimentConfig.__dataclass_fields__) | {"scheme", "dim"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    if "dim" in raw:
        raw.setdefault("dims", [raw.pop("dim")])
    if "scheme" in raw:
        raw.setdefault("methods", [raw.pop("scheme")])
    if not isinstance(raw.get("dims", [1]), list):
        raw["dims"] = [raw["dims"]]
    if not isinstance(raw.get("swarm_sizes", [5]), list):
        raw["swarm_sizes"] = [raw["swarm_sizes"]]
    raw["methods"] = _parse_methods(raw.get("methods"))
    success = raw.get("success")
    if isinstance(success, dict):
        raw["success"] = SuccessCriterion(success.get("mode", "f_gap"), float(success["tol"]))
    try:
        return ExperimentConfig(**raw)
    except TypeError as e:
        raise ConfigurationError(f"invalid experiment config: {e}") from e


def experiment_config_to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Plain-data echo of a config, as written into report headers."""
    return {
        "name": cfg.name,
        "objective": cfg.objective,
        "dims": [int(d) for d in cfg.dims],
        "methods": [
            {"label": m.label, "scheme": m.scheme.value, "overrides": dict(sorted(m.overrides.items()))}
            for m in cfg.methods
        ],
        "swarm_sizes": [int(n) for n in cfg.swarm_sizes],
        "runs": cfg.runs,
        "position_box": cfg.position_box,
        "velocity_box": cfg.velocity_box,
        "swarm": dict(sorted(cfg.swarm.items())),
        "lipschitz": dict(sorted(cfg.lipschitz.items())),
        "success": None if cfg.success is None else {"mode": cfg.success.mode.value, "tol": cfg.success.tol},
        "seed": cfg.seed,
        "trace": cfg.trace,
    }


def set_dotted(raw: Dict[str, Any], dotted: str, value: Any) -> None:
    node = raw
    parts = dotted.split(".")
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigurationError(f"cannot set '{dotted}': '{part}' is not a mapping")
        node = child
    node[parts[-1]] = value


def apply_overrides(raw: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply `key.sub=value` strings; values are parsed as YAML scalars or lists."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override '{item}' is not of the form key=value")
        key, text = item.split("=", 1)
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"cannot parse override value '{text}' for '{key}'") from e
        set_dotted(raw, key.strip(), value)
    return raw


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Read a YAML experiment config

    Args:
        path: Path to the YAML file

    Returns:
        Parsed mapping
    """
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigurationError(f"config file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} must hold a mapping at top level")
    logger.info("Loaded configuration from %s", path)
    return raw


def bundled_table_path(name: str) -> str:
    if name not in BUNDLED_TABLES:
        raise ConfigurationError(f"unknown table '{name}'; choose one of {list(BUNDLED_TABLES)}")
    return str(resources.files("swarm_inertia").joinpath("configs", f"{name}.yaml"))


def _env_fallback(raw: Dict[str, Any]) -> None:
    """Fill threads/out_dir from the environment (.env included) when the file leaves them out."""
    load_dotenv()
    if "threads" not in raw and os.getenv(THREADS_ENV_VAR):
        try:
            raw["threads"] = int(os.environ[THREADS_ENV_VAR])
            logger.info("Loaded threads from %s", THREADS_ENV_VAR)
        except ValueError as e:
            raise ConfigurationError(f"{THREADS_ENV_VAR} must be an integer") from e
    if "out_dir" not in raw and os.getenv(OUT_DIR_ENV_VAR):
        raw["out_dir"] = os.environ[OUT_DIR_ENV_VAR]
        logger.info("Loaded output directory from %s", OUT_DIR_ENV_VAR)


def load_experiment_config(
    path: Optional[str] = None,
    overrides: Iterable[str] = (),
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from file, overrides, environment and flags

    Precedence, lowest first: built-in defaults, environment, config file,
    `--set` overrides, explicit arguments.

    Args:
        path: YAML config path (optional)
        overrides: `key=value` strings
        seed: Master seed override
        threads: Parallelism override
        out_dir: Output directory override

    Returns:
        Validated ExperimentConfig
    """
    raw = read_config_file(path) if path else {}
    apply_overrides(raw, overrides)
    _env_fallback(raw)
    if seed is not None:
        raw["seed"] = seed
    if threads is not None:
        raw["threads"] = threads
    if out_dir is not None:
        raw["out_dir"] = out_dir
    return experiment_config_from_dict(raw)
