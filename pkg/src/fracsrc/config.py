"""Experiment configuration files.

A config is a JSON object; ``docs/config_schema.json`` documents the keys.
Everything is validated in :func:`load_config` so that the CLI can reject a
bad file before any computation starts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from fracsrc.errors import DomainError
from fracsrc.expr import compile_expression
from fracsrc.fractional_calculus import DeltaTrain, FracParams, GridFunction, TemporalGrid, TemporalSource
from fracsrc.inverse_solver import RegularizationSpec
from fracsrc.spectral_operator import OperatorSpec, Point, Subdomain

_TOP_KEYS = {
    "operator", "alpha", "beta", "theta", "grid", "f", "source", "observation",
    "regularization", "noise", "seed", "output_dir", "data", "oracle_factor",
    "max_atoms", "tol", "n_modes",
}


@dataclass(frozen=True)
class ObservationSpec:
    kind: str  # "subdomain" or "point"
    fraction: float = 0.25
    index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("subdomain", "point"):
            raise DomainError(f"observation type must be 'subdomain' or 'point', got {self.kind!r}")
        if self.kind == "point" and self.index is None:
            raise DomainError("a point observation needs an 'index'")

    def build(self, n_interior: int) -> Subdomain | Point:
        if self.kind == "subdomain":
            return Subdomain.central(n_interior, self.fraction)
        return Point(int(self.index), n_interior)


@dataclass(frozen=True)
class ExperimentConfig:
    operator: OperatorSpec
    frac: FracParams
    grid: TemporalGrid
    f_source: Any  # expression string or list of nodal values
    regular: Any = None  # expression in t, list of nodal values, or None
    atoms: DeltaTrain | None = None
    observation: ObservationSpec = field(default_factory=lambda: ObservationSpec("subdomain"))
    regularization: RegularizationSpec = field(default_factory=RegularizationSpec)
    noise: float = 0.0
    seed: int = 0
    output_dir: Path = Path("out")
    data: Path | None = None
    oracle_factor: int = 2
    max_atoms: int = 5
    tol: float = 1e-2
    n_modes: int | None = None

    @property
    def f_values(self) -> np.ndarray:
        return self.f_function(self.operator.nodes)

    def f_function(self, x: np.ndarray) -> np.ndarray:
        if isinstance(self.f_source, str):
            return compile_expression(self.f_source)(x)
        vals = np.asarray(self.f_source, dtype=float)
        if vals.shape != np.shape(x):
            raise DomainError("sampled f cannot be evaluated on a different spatial grid")
        return vals

    def regular_function(self):
        if self.regular is None:
            return None
        if isinstance(self.regular, str):
            return compile_expression(self.regular, "t")
        vals = np.asarray(self.regular, dtype=float)

        def sampled(t):
            if np.shape(t) != vals.shape:
                raise DomainError("sampled source cannot be evaluated on a different temporal grid")
            return vals

        return sampled

    def temporal_source(self) -> TemporalSource:
        reg = None
        fn = self.regular_function()
        if fn is not None:
            reg = GridFunction(self.grid, fn(self.grid.nodes))
        return TemporalSource(regular=reg, atoms=self.atoms)


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise DomainError(f"{where} is missing {key!r}")
    return d[key]


def _number(v, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DomainError(f"{name} must be a number, got {v!r}")
    return float(v)


def parse_config(d: dict[str, Any], base: Path | None = None) -> ExperimentConfig:
    """Validate a config dictionary, including the ``alpha <= beta < 1``, ``beta > 1/2`` chain."""
    if not isinstance(d, dict):
        raise DomainError("config must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise DomainError(f"unknown config keys: {sorted(unknown)}")
    op = OperatorSpec.from_dict(_need(d, "operator", "config"))
    frac = FracParams(
        _number(_need(d, "alpha", "config"), "alpha"),
        _number(_need(d, "beta", "config"), "beta"),
        _number(d.get("theta", 0.0), "theta"),
    )
    frac.check_singular_chain()
    g = _need(d, "grid", "config")
    grid = TemporalGrid(_number(_need(g, "T", "grid"), "grid.T"), int(_need(g, "n_steps", "grid")))

    f_src = d.get("f", "sin(pi*x)+x*(1-x)")
    if not isinstance(f_src, str) and np.shape(f_src) != (op.n_interior,):
        raise DomainError(f"f must be an expression or {op.n_interior} nodal values")

    src = d.get("source", {})
    regular = src.get("regular")
    if regular is not None and not isinstance(regular, str) and np.shape(regular) != (grid.n_steps,):
        raise DomainError(f"source.regular must be an expression in t or {grid.n_steps} values")
    atoms = None
    if src.get("atoms"):
        try:
            atoms = DeltaTrain.from_pairs((a, r) for a, r in src["atoms"])
        except (TypeError, ValueError) as exc:
            raise DomainError(f"source.atoms must be [a, r] pairs: {exc}") from None
        atoms.check_horizon(grid.T)

    obs_d = d.get("observation", {"type": "subdomain", "fraction": 0.25})
    obs = ObservationSpec(
        obs_d.get("type", "subdomain"), float(obs_d.get("fraction", 0.25)), obs_d.get("index")
    )
    obs.build(op.n_interior)

    rd = d.get("regularization", {})
    reg = RegularizationSpec(
        rd.get("kind", "ridge"),
        float(rd.get("weight", 1e-12)),
        rd.get("selection", "fixed"),
        float(rd.get("noise_level", 0.0)),
    )
    noise = _number(d.get("noise", 0.0), "noise")
    if noise < 0:
        raise DomainError("noise must be >= 0")
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise DomainError(f"seed must be a nonnegative integer, got {seed!r}")
    base = base or Path(".")
    out = Path(d.get("output_dir", "out"))
    data = d.get("data")
    factor = d.get("oracle_factor", 2)
    if not isinstance(factor, int) or factor < 1:
        raise DomainError("oracle_factor must be a positive integer")
    n_modes = d.get("n_modes")
    return ExperimentConfig(
        operator=op,
        frac=frac,
        grid=grid,
        f_source=f_src,
        regular=regular,
        atoms=atoms,
        observation=obs,
        regularization=reg,
        noise=noise,
        seed=seed,
        output_dir=Path(os.path.normpath(out if out.is_absolute() else base / out)),
        data=None if data is None else (Path(data) if Path(data).is_absolute() else base / data),
        oracle_factor=factor,
        max_atoms=int(d.get("max_atoms", 5)),
        tol=_number(d.get("tol", 1e-2), "tol"),
        n_modes=None if n_modes is None else int(n_modes),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DomainError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(d, path.parent)
