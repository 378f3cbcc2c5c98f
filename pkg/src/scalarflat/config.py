"""Experiment configuration: YAML in, validated dataclass out, JSON echo back."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .errors import ValidationError
from .geometry import H_T_FLOOR

COMMANDS = ("build", "curvature", "solve-linear", "solve-yamabe", "balance", "deform", "sweep")
SWEEP_QUANTITIES = ("exactness", "curvature", "dirichlet", "approx", "linear", "yamabe", "deform")


@dataclass
class GridConfig:
    h_t: float = H_T_FLOOR
    collar_nodes: Optional[int] = None


@dataclass
class SolverConfig:
    gamma: float = 0.25
    tol: float = 1e-13
    max_iter: int = 25


@dataclass
class SweepConfig:
    quantity: str = "curvature"
    eps: list = field(default_factory=lambda: [2.0**-k for k in range(4, 9)])
    h_t: list = field(default_factory=lambda: [0.05, 0.025, 0.0125, 0.00625])
    R: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    samples: int = 20


@dataclass
class ExperimentConfig:
    command: str = "build"
    m: int = 3
    n: Optional[int] = None
    eps: float = 2.0**-6
    alpha: Optional[float] = None
    R: float = 1.0
    Q: float = 1.0
    lump_volume_1: float = 1.0
    lump_volume_2: float = 1.0
    ricci_pairing: float = 1.0
    quad_coeff: float = 0.5
    R_max: float = 16.0
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    out: str = "out"
    seed: int = 0
    jobs: int = 1

    @property
    def codim(self) -> int:
        return self.n if self.n is not None else self.m

    def effective_h_t(self) -> float:
        """h_t, tightened so that the neck carries at least ``collar_nodes`` intervals."""
        h = self.grid.h_t
        if self.grid.collar_nodes:
            h = min(h, 2.0 * -math.log(self.eps) / self.grid.collar_nodes)
        return h

    def validate(self) -> "ExperimentConfig":
        def bad(key, msg):
            raise ValidationError(f"{key}: {msg}")

        if self.command not in COMMANDS:
            bad("command", f"must be one of {', '.join(COMMANDS)}")
        if self.m < 3:
            bad("m", "must be >= 3")
        if self.n is not None and not 3 <= self.n <= self.m:
            bad("n", "must satisfy 3 <= n <= m")
        if not 0.0 < self.eps < 1.0:
            bad("eps", "must lie in (0, 1)")
        if self.alpha is not None and not self.alpha > 0:
            bad("alpha", "must be positive")
        for key in ("R", "Q", "lump_volume_1", "lump_volume_2", "R_max"):
            if not getattr(self, key) > 0:
                bad(key, "must be positive")
        if not 0 < self.grid.h_t <= H_T_FLOOR:
            bad("grid.h_t", f"must lie in (0, {H_T_FLOOR}]")
        if self.grid.collar_nodes is not None and self.grid.collar_nodes < 8:
            bad("grid.collar_nodes", "must be >= 8")
        if not 0.0 < self.solver.gamma < 0.5:
            bad("solver.gamma", "must lie in (0, 1/2)")
        if not self.solver.tol > 0:
            bad("solver.tol", "must be positive")
        if self.solver.max_iter < 1:
            bad("solver.max_iter", "must be >= 1")
        if self.sweep.quantity not in SWEEP_QUANTITIES:
            bad("sweep.quantity", f"must be one of {', '.join(SWEEP_QUANTITIES)}")
        if any(not 0 < e < 1 for e in self.sweep.eps):
            bad("sweep.eps", "values must lie in (0, 1)")
        if any(not 0 < h <= H_T_FLOOR for h in self.sweep.h_t):
            bad("sweep.h_t", f"values must lie in (0, {H_T_FLOOR}]")
        if any(not v > 0 for v in list(self.sweep.R) + list(self.sweep.Q)):
            bad("sweep.R/Q", "values must be positive")
        if self.sweep.samples < 1:
            bad("sweep.samples", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must fit in an unsigned 64-bit integer")
        if self.jobs < 1:
            bad("jobs", "must be >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON echo (jobs and out excluded: they do not change results)."""
        d = self.to_dict()
        d.pop("jobs")
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


_NESTED = {"grid": GridConfig, "solver": SolverConfig, "sweep": SweepConfig}


def _build(cls, data: dict, prefix: str = ""):
    if not isinstance(data, dict):
        raise ValidationError(f"{prefix or 'config'}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValidationError(f"unknown key(s): {', '.join(prefix + k for k in unknown)}")
    kw = {}
    for k, v in data.items():
        if cls is ExperimentConfig and k in _NESTED:
            kw[k] = _build(_NESTED[k], v or {}, prefix=f"{k}.")
        else:
            kw[k] = v
    try:
        return cls(**kw)
    except TypeError as exc:  # pragma: no cover - guarded by the key check
        raise ValidationError(str(exc)) from exc


def _coerce(cfg: ExperimentConfig) -> ExperimentConfig:
    """Cast numeric fields so YAML ints/strings like 1e-3 behave."""
    def num(obj, key, typ):
        val = getattr(obj, key)
        if val is None:
            return
        try:
            setattr(obj, key, typ(val))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{key}: expected {typ.__name__}, got {val!r}") from exc
        if typ is int and float(val) != int(val):
            raise ValidationError(f"{key}: expected an integer, got {val!r}")

    for key in ("eps", "alpha", "R", "Q", "lump_volume_1", "lump_volume_2", "ricci_pairing", "quad_coeff", "R_max"):
        num(cfg, key, float)
    for key in ("m", "n", "seed", "jobs"):
        num(cfg, key, int)
    num(cfg.grid, "h_t", float)
    num(cfg.grid, "collar_nodes", int)
    num(cfg.solver, "gamma", float)
    num(cfg.solver, "tol", float)
    num(cfg.solver, "max_iter", int)
    num(cfg.sweep, "samples", int)
    for key in ("eps", "h_t", "R", "Q"):
        try:
            setattr(cfg.sweep, key, [float(x) for x in getattr(cfg.sweep, key)])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"sweep.{key}: expected a list of numbers") from exc
    return cfg


def config_from_dict(data: dict) -> ExperimentConfig:
    return _coerce(_build(ExperimentConfig, dict(data))).validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise ValidationError(f"config: cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config: invalid YAML: {exc}") from exc
    return config_from_dict(data)
