"""Observation data from the L1 time-stepping solver on a refined grid.

Reconstructions use the spectral forward maps, so generating data with a
different discretization (finer, and by marching instead of modal sums)
keeps the reported errors honest.
"""

from __future__ import annotations

import numpy as np

from fracsrc.errors import DomainError
from fracsrc.forward_solver import SpaceTimeField, solve_timestep_oracle
from fracsrc.fractional_calculus import DeltaTrain, GridFunction, TemporalGrid, rl_forward
from fracsrc.special import gamma
from fracsrc.spectral_operator import OperatorSpec, Subdomain, assemble


def cell_averaged_source(order: float, regular, atoms: DeltaTrain | None, grid: TemporalGrid) -> GridFunction:
    """``J_order`` of ``regular + atoms`` with the atom part averaged over each cell.

    ``(t - a)_+^(order-1)`` is unbounded right after ``a``; nodal samples of it
    feed an O(1) error into the marching scheme, cell averages do not.
    ``regular`` is a callable of ``t`` or ``None``.  ``order = 0`` means no
    transform (atoms are then not allowed).
    """
    t = grid.nodes
    g = np.zeros_like(t)
    if regular is not None:
        vals = GridFunction(grid, np.asarray(regular(t), dtype=float))
        g += vals.values if order == 0 else rl_forward(order, vals).values
    if atoms is not None and atoms.count:
        if order == 0:
            raise DomainError("atoms need a positive transform order")
        P = np.zeros_like(t)
        for a, r in atoms.atoms:
            P += r * np.clip(t - a, 0.0, None) ** order / gamma(order + 1.0)
        g[1:] += np.diff(P) / grid.h
    return GridFunction(grid, g)


def oracle_field(spec: OperatorSpec, f, source: GridFunction, alpha: float) -> SpaceTimeField:
    """March ``(d^alpha + A) v = source * f`` with ``f`` a callable of ``x``."""
    A = assemble(spec)
    return solve_timestep_oracle(A, f(spec.nodes), source, alpha, source.grid)


def _fine(spec: OperatorSpec, grid: TemporalGrid, factor: int, refine_space: bool):
    fine_grid = grid.refine(factor)
    if not refine_space:
        return fine_grid, spec, lambda j: j
    fine_spec = OperatorSpec(spec.L, factor * (spec.n_interior + 1) - 1, spec.a, spec.c, spec.b)
    return fine_grid, fine_spec, lambda j: factor * (np.asarray(j) + 1) - 1


def subdomain_data(spec: OperatorSpec, f, regular, alpha: float, grid: TemporalGrid,
                   obs: Subdomain, factor: int = 2, atoms: DeltaTrain | None = None,
                   order: float = 0.0, refine_space: bool = True) -> np.ndarray:
    """Time-major observation vector on ``obs x {t_1..t_N}`` from a ``factor``-times finer run.

    The run is driven by ``J_order(regular + atoms)``.  Space is refined too
    unless ``refine_space`` is false (needed when ``f`` or the coefficients are
    given as samples).
    """
    fine_grid, fine_spec, to_fine = _fine(spec, grid, factor, refine_space)
    src = cell_averaged_source(order, regular, atoms, fine_grid)
    v = oracle_field(fine_spec, f, src, alpha)
    coarse = v.values[::factor][:, to_fine(np.arange(spec.n_interior))]
    return coarse[1:, obs.indices].ravel()


def point_data(spec: OperatorSpec, f, regular, atoms: DeltaTrain | None, order: float,
               alpha: float, grid: TemporalGrid, x0: int, factor: int = 2,
               refine_space: bool = False) -> GridFunction:
    """Samples at interior node ``x0`` of the solution driven by ``J_order(regular + atoms)``."""
    fine_grid, fine_spec, to_fine = _fine(spec, grid, factor, refine_space)
    src = cell_averaged_source(order, regular, atoms, fine_grid)
    v = oracle_field(fine_spec, f, src, alpha)
    return GridFunction(grid, v.values[::factor, int(to_fine(x0))].copy())


def add_noise(d: np.ndarray, level: float, seed: int) -> np.ndarray:
    """Additive Gaussian noise with standard deviation ``level * rms(d)``."""
    d = np.asarray(d, dtype=float)
    if level == 0.0:
        return d.copy()
    rng = np.random.default_rng(seed)
    scale = level * float(np.sqrt(np.mean(d**2)))
    return d + scale * rng.standard_normal(d.shape)
