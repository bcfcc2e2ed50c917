"""Riemann-Liouville integrals, the Caputo derivative and the source transform on uniform grids.

All operators act on :class:`GridFunction` values sampled at the nodes of a
:class:`TemporalGrid`.  The forward integral uses product integration with a
piecewise-linear integrand; the Caputo derivative is the exact inverse of that
quadrature on functions vanishing at ``t = 0``.  Point masses in a source are
never put on the grid: their transform is evaluated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np
import scipy.linalg as la

from fracsrc.errors import DomainError, GridMismatchError, PreconditionError
from fracsrc.special import gamma

__all__ = [
    "TemporalGrid",
    "GridFunction",
    "DeltaTrain",
    "TemporalSource",
    "FracParams",
    "rl_weights",
    "rl_forward",
    "rl_backward",
    "reflect",
    "caputo",
    "l1_matrix",
    "convolve",
    "atom_transform",
    "regularize_source",
]


# {{{ data types


@dataclass(frozen=True)
class TemporalGrid:
    """Uniform nodes ``t_i = i T / (n_steps - 1)`` on ``[0, T]``."""

    T: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.T > 0.0) or not math.isfinite(self.T):
            raise DomainError(f"horizon T must be positive, got {self.T!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self) -> float:
        return self.T / (self.n_steps - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        t = self.h * np.arange(self.n_steps, dtype=float)
        t[-1] = self.T
        t.flags.writeable = False
        return t

    def refine(self, factor: int) -> TemporalGrid:
        """Grid with ``factor`` times as many cells; every old node is kept."""
        return TemporalGrid(self.T, (self.n_steps - 1) * int(factor) + 1)

    def __len__(self) -> int:
        return self.n_steps


@dataclass(frozen=True)
class GridFunction:
    grid: TemporalGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_steps,):
            raise DomainError(
                f"expected {self.grid.n_steps} values for the grid, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: TemporalGrid, func) -> GridFunction:
        return cls(grid, func(grid.nodes))

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def l2_norm(self) -> float:
        """Trapezoidal ``L^2(0, T)`` norm."""
        v2 = self.values**2
        return math.sqrt(self.grid.h * (v2.sum() - 0.5 * (v2[0] + v2[-1])))

    def with_values(self, values) -> GridFunction:
        return GridFunction(self.grid, values)

    def __add__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self.grid, other.grid)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        _check_same_grid(self.grid, other.grid)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> GridFunction:
        return GridFunction(self.grid, c * self.values)

    __rmul__ = __mul__


def _check_same_grid(a: TemporalGrid, b: TemporalGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True)
class DeltaTrain:
    """Finite sum of weighted point masses ``sum_k r_k delta(t - a_k)``.

    An empty train is allowed (it is what a reconstruction returns for zero
    data) but cannot be used as a source.
    """

    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        atoms = tuple((float(a), float(r)) for a, r in self.atoms)
        locs = [a for a, _ in atoms]
        if any(not math.isfinite(a) or not math.isfinite(r) for a, r in atoms):
            raise DomainError("atom locations and weights must be finite")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise DomainError("atom locations must be strictly increasing")
        if any(r == 0.0 for _, r in atoms):
            raise DomainError("atom weights must be nonzero")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> DeltaTrain:
        return cls(tuple(sorted((float(a), float(r)) for a, r in pairs)))

    @property
    def count(self) -> int:
        return len(self.atoms)

    @property
    def locations(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([r for _, r in self.atoms])

    def check_horizon(self, T: float) -> None:
        if self.count == 0:
            raise DomainError("a delta train used as a source needs at least one atom")
        for a, _ in self.atoms:
            if not (0.0 < a < T):
                raise DomainError(f"atom location {a} is outside the open interval (0, {T})")


@dataclass(frozen=True)
class TemporalSource:
    """Temporal source factor: a grid function, a delta train, or their sum."""

    regular: GridFunction | None = None
    atoms: DeltaTrain | None = None

    def __post_init__(self) -> None:
        if self.regular is None and self.atoms is None:
            raise DomainError("a temporal source needs a regular part, atoms, or both")

    @property
    def kind(self) -> str:
        if self.atoms is None:
            return "regular"
        if self.regular is None:
            return "atomic"
        return "mixed"


@dataclass(frozen=True)
class FracParams:
    """Equation order ``alpha``, transform order ``beta``, fractional power ``theta``."""

    alpha: float
    beta: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta must lie in (0, 1), got {self.beta!r}")
        if self.theta < 0.0:
            raise DomainError(f"theta must be nonnegative, got {self.theta!r}")

    def violations(self) -> list[str]:
        """Inequalities of the singular-source chain that fail."""
        out = []
        if not self.alpha <= self.beta:
            out.append(f"alpha <= beta (alpha={self.alpha}, beta={self.beta})")
        if not self.beta < 1.0:
            out.append(f"beta < 1 (beta={self.beta})")
        if not self.beta > 0.5:
            out.append(f"beta > 1/2 (beta={self.beta})")
        return out

    def check_singular_chain(self) -> None:
        bad = self.violations()
        if bad:
            raise DomainError("parameter chain violated: " + "; ".join(bad))


# }}}


# {{{ Riemann-Liouville integrals


def _check_order(order: float) -> None:
    if not (0.0 < order < 1.0):
        raise DomainError(f"fractional order must lie in (0, 1), got {order!r}")


@lru_cache(maxsize=32)
def rl_weights(order: float, n_steps: int, h: float) -> np.ndarray:
    """Product-integration matrix of ``J_order`` for piecewise-linear integrands.

    Row ``n`` holds the weights of ``(J v)(t_n) = sum_j W[n, j] v_j``.  The
    returned array is shared and read-only.
    """
    _check_order(order)
    a = order
    n = np.arange(n_steps, dtype=float)
    p = n ** (a + 1.0)
    # interior weight for lag k = n - j >= 1: (k+1)^(a+1) - 2 k^(a+1) + (k-1)^(a+1)
    lag = np.zeros(n_steps)
    lag[1:-1] = p[2:] - 2.0 * p[1:-1] + p[:-2]

    W = np.zeros((n_steps, n_steps))
    rows, cols = np.tril_indices(n_steps, k=-1)
    W[rows, cols] = lag[rows - cols]
    idx = np.arange(1, n_steps)
    W[idx, idx] = 1.0
    # first column: (n-1)^(a+1) - (n - 1 - a) n^a
    W[idx, 0] = p[idx - 1] - (n[idx] - 1.0 - a) * n[idx] ** a
    W *= h**a / gamma(a + 2.0)
    W.flags.writeable = False
    return W


def rl_forward(order: float, v: GridFunction) -> GridFunction:
    """Forward Riemann-Liouville integral ``J_order v`` at the grid nodes."""
    W = rl_weights(float(order), v.grid.n_steps, v.grid.h)
    return GridFunction(v.grid, W @ v.values)


def reflect(v: GridFunction) -> GridFunction:
    """Time reversal ``t -> T - t``."""
    return GridFunction(v.grid, v.values[::-1])


def rl_backward(order: float, v: GridFunction) -> GridFunction:
    """Backward integral ``(1/Gamma(a)) int_t^T (s - t)^(a-1) v(s) ds``, as reflect o J o reflect."""
    return reflect(rl_forward(order, reflect(v)))


@lru_cache(maxsize=16)
def _caputo_factor(order: float, n_steps: int, h: float):
    if n_steps < 4:
        raise DomainError("the Caputo derivative needs at least 4 grid nodes")
    W = rl_weights(order, n_steps, h)
    # unknowns w_1..w_{N-1}; w_0 is tied to them by quadratic extrapolation
    A = np.array(W[1:, 1:])
    c0 = W[1:, 0]
    A[:, 0] += 3.0 * c0
    A[:, 1] -= 3.0 * c0
    A[:, 2] += c0
    return la.lu_factor(A)


def caputo(order: float, v: GridFunction) -> GridFunction:
    """Caputo derivative of a grid function with ``v(0) = 0``.

    Computed as the inverse of :func:`rl_forward`; the value at ``t_0``,
    where the quadrature gives no equation, is extrapolated from ``t_1..t_3``.
    """
    _check_order(order)
    vals = v.values
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if abs(vals[0]) > 1e-12 * scale:
        raise PreconditionError(
            f"Caputo derivative needs v(0) = 0; got v(0) = {vals[0]:.3e} (max |v| = {scale:.3e})"
        )
    lu = _caputo_factor(float(order), v.grid.n_steps, v.grid.h)
    w = np.empty_like(vals)
    w[1:] = la.lu_solve(lu, vals[1:])
    w[0] = 3.0 * w[1] - 3.0 * w[2] + w[3]
    return GridFunction(v.grid, w)


@lru_cache(maxsize=16)
def l1_matrix(order: float, n_steps: int, h: float) -> np.ndarray:
    """Matrix of the L1 discretization of the Caputo derivative (order in (0, 1]).

    ``(D v)_n = h^-a / Gamma(2-a) * sum_{k<n} b_k (v_{n-k} - v_{n-k-1})`` with
    ``b_k = (k+1)^(1-a) - k^(1-a)``; row 0 is zero.
    """
    if not (0.0 < order <= 1.0):
        raise DomainError(f"L1 order must lie in (0, 1], got {order!r}")
    k = np.arange(n_steps, dtype=float)
    b = np.diff(np.r_[0.0, (k + 1.0) ** (1.0 - order)])  # avoids 0**0 = 1 at order 1
    # coefficient of v_j in row n: b_{n-j} - b_{n-j-1} (b_{-1} := 0)
    coef = np.zeros(n_steps)
    coef[0] = b[0]
    coef[1:] = b[1:] - b[:-1]
    D = np.zeros((n_steps, n_steps))
    rows, cols = np.tril_indices(n_steps)
    D[rows, cols] = coef[rows - cols]
    # column 0 only collects -b_{n-1}
    D[1:, 0] = -b[: n_steps - 1]
    D[0, :] = 0.0
    D *= h ** (-order) / gamma(2.0 - order)
    D.flags.writeable = False
    return D


def convolve(g: GridFunction, v: GridFunction) -> GridFunction:
    """Trapezoidal ``int_0^t g(s) v(t - s) ds`` at every node."""
    _check_same_grid(g.grid, v.grid)
    n = g.grid.n_steps
    full = np.convolve(g.values, v.values)[:n]
    # trapezoid: halve the two endpoint products of each partial sum
    out = full - 0.5 * (g.values[0] * v.values + g.values * v.values[0])
    out *= g.grid.h
    out[0] = 0.0
    return GridFunction(g.grid, out)


# }}}


# {{{ source transform


def atom_transform(beta: float, atoms: DeltaTrain, t) -> np.ndarray:
    """``J_beta`` of a delta train at times ``t``: ``sum_k r_k (t - a_k)_+^(beta-1) / Gamma(beta)``.

    Nodes with ``t <= a_k`` receive nothing from atom ``k``.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    c = 1.0 / gamma(beta)
    for a, r in atoms.atoms:
        after = t > a
        out[after] += r * c * (t[after] - a) ** (beta - 1.0)
    return out


def regularize_source(beta: float, mu: TemporalSource, grid: TemporalGrid) -> GridFunction:
    """Map a (possibly singular) temporal source to the square-integrable ``g = J_beta mu``."""
    _check_order(beta)
    g = np.zeros(grid.n_steps)
    if mu.regular is not None:
        _check_same_grid(mu.regular.grid, grid)
        g += rl_forward(beta, mu.regular).values
    if mu.atoms is not None:
        mu.atoms.check_horizon(grid.T)
        g += atom_transform(beta, mu.atoms, grid.nodes)
    return GridFunction(grid, g)


# }}}
