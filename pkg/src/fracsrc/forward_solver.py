"""Forward solvers for ``(d_t^alpha + A) v = g(t) f(x)`` with ``v(0) = 0``.

Three routes are provided and cross-checked in the tests:

* the homogeneous expansion ``z`` plus Duhamel's convolution in time,
* direct per-mode convolution with the relaxation kernel,
* implicit L1 time stepping, which also accepts a nonsymmetric operator.

Kernel convolutions use product integration with a piecewise-linear source
and exact kernel moments, obtained in closed form from the antiderivative rule
``int_0^t s^(g-1) E_{a,g}(-lam s^a) ds = t^g E_{a,g+1}(-lam t^a)``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as la
from scipy.special import roots_jacobi

from fracsrc.errors import DomainError, GridMismatchError, NumericalFailure
from fracsrc.fractional_calculus import (
    FracParams,
    GridFunction,
    TemporalGrid,
    TemporalSource,
    l1_matrix,
    regularize_source,
)
from fracsrc.mittag_leffler import mittag_leffler, ml_scaled
from fracsrc.special import gamma
from fracsrc.spectral_operator import DiscreteOperator, EigenDecomposition, project

__all__ = [
    "SpaceTimeField",
    "SingularSolution",
    "convolution_weights",
    "modal_convolve",
    "solve_homogeneous",
    "solve_duhamel",
    "solve_modal_convolution",
    "solve_singular",
    "atom_modal_response",
    "transform_check",
    "solve_timestep_oracle",
    "pde_residual",
]

FSTF_MAGIC = b"FSTF"
FSTF_VERSION = 1


@dataclass(frozen=True)
class SpaceTimeField:
    """Values on the time grid by interior spatial nodes, shape ``(n_steps, n_interior)``."""

    grid: TemporalGrid
    x: np.ndarray
    values: np.ndarray
    L: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_steps, np.size(self.x)):
            raise DomainError(f"field shape {v.shape} does not match grid and nodes")
        if not np.all(np.isfinite(v)):
            raise NumericalFailure("space-time field has non-finite entries")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return self.L / (np.size(self.x) + 1)

    def norm(self) -> float:
        """Discrete ``L^2(0, T; L^2)`` norm (trapezoid in time, ``h``-weighted in space)."""
        s = self.h * np.sum(self.values**2, axis=1)
        return math.sqrt(self.grid.h * (s.sum() - 0.5 * (s[0] + s[-1])))

    def at_time(self, i: int) -> np.ndarray:
        return self.values[i]

    def at_node(self, j: int) -> GridFunction:
        return GridFunction(self.grid, self.values[:, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x,value\n")
        t = self.grid.nodes
        for i in range(t.size):
            for j in range(self.x.size):
                buf.write(f"{t[i]:.17g},{self.x[j]:.17g},{self.values[i, j]:.17g}\n")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        header = struct.pack(
            "<4sIIIdd", FSTF_MAGIC, FSTF_VERSION, self.grid.n_steps, self.x.size, self.grid.T, self.L
        )
        return header + np.asfortranarray(self.values).astype("<f8").tobytes(order="F")

    @classmethod
    def from_bytes(cls, data: bytes) -> SpaceTimeField:
        magic, version, n_steps, n_x, T, L = struct.unpack_from("<4sIIIdd", data)
        if magic != FSTF_MAGIC or version != FSTF_VERSION:
            raise DomainError("not an FSTF v1 dump")
        vals = np.frombuffer(data, dtype="<f8", offset=32, count=n_steps * n_x)
        grid = TemporalGrid(T, n_steps)
        x = (L / (n_x + 1)) * np.arange(1, n_x + 1)
        return cls(grid, x, vals.reshape((n_steps, n_x), order="F"), L)

    def __add__(self, other: SpaceTimeField) -> SpaceTimeField:
        if other.grid != self.grid or other.values.shape != self.values.shape:
            raise GridMismatchError("cannot add fields on different grids")
        return SpaceTimeField(self.grid, self.x, self.values + other.values, self.L)


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")


def _field(e: EigenDecomposition, grid: TemporalGrid, coeffs: np.ndarray, meta=None) -> SpaceTimeField:
    """``coeffs`` has shape (n_steps, n_modes)."""
    L = e.h * (e.n_interior + 1)
    x = e.h * np.arange(1, e.n_interior + 1)
    return SpaceTimeField(grid, x, coeffs @ e.modes.T, L, dict(meta or {}))


def _tail(e: EigenDecomposition, f: np.ndarray, c: np.ndarray) -> float:
    return max(0.0, e.h * float(f @ f) - float(c @ c))


def _check_source(g: GridFunction, grid: TemporalGrid) -> None:
    if g.grid != grid:
        raise GridMismatchError(f"source grid {g.grid} differs from output grid {grid}")


# {{{ product integration with exact moments


def convolution_weights(alpha: float, index: float, lams, grid: TemporalGrid):
    """Weights for ``int_0^t k(s) g(t - s) ds`` with ``k(s) = s^(index-1) E_{alpha,index}(-lam s^alpha)``.

    With ``g`` piecewise linear on the grid,
    ``(k * g)(t_i) = sum_{m<i} w[:, m] g_{i-m} + end[:, i] g_0``.
    Returns ``(w, end)``, each of shape ``(n_lams, n_steps)``; ``end[:, 0] = 0``.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    h = grid.h
    t = grid.nodes[1:]
    K1 = np.zeros((lams.size, grid.n_steps))
    K2 = np.zeros((lams.size, grid.n_steps))
    K1[:, 1:] = ml_scaled(alpha, index + 1.0, lams[:, None], t[None, :])
    K2[:, 1:] = ml_scaled(alpha, index + 2.0, lams[:, None], t[None, :])
    dK2 = np.diff(K2, axis=1)  # dK2[:, m] = K2(t_{m+1}) - K2(t_m)
    w = np.zeros_like(K1)
    w[:, 0] = K2[:, 1] / h
    w[:, 1:-1] = (dK2[:, 1:] - dK2[:, :-1]) / h
    end = np.zeros_like(K1)
    end[:, 1:] = K1[:, 1:] - dK2 / h
    return w, end


def modal_convolve(w: np.ndarray, end: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Apply :func:`convolution_weights` to samples ``g``; returns shape ``(n_lams, n_steps)``."""
    n = g.size
    out = np.empty((w.shape[0], n))
    out[:, 0] = 0.0
    for i in range(1, n):
        out[:, i] = w[:, :i] @ g[i:0:-1] + end[:, i] * g[0]
    return out


def _modal_response(e, alpha, index, g: GridFunction) -> np.ndarray:
    w, end = convolution_weights(alpha, index, e.lambdas, g.grid)
    return modal_convolve(w, end, g.values)


# }}}


# {{{ spectral routes


def solve_homogeneous(e: EigenDecomposition, f, alpha: float, grid: TemporalGrid) -> SpaceTimeField:
    """``z(t) = sum_n E_{alpha,1}(-lam_n t^alpha) (f, phi_n) phi_n`` with ``z(0) = f``."""
    _check_alpha(alpha)
    f = np.asarray(f, dtype=float)
    c = project(e, f)
    t = grid.nodes
    E = mittag_leffler(alpha, 1.0, -(t[:, None] ** alpha) * e.lambdas[None, :])
    out = _field(e, grid, E * c[None, :], {"tail": _tail(e, f, c)})
    return out


def solve_duhamel(e: EigenDecomposition, f, g: GridFunction, alpha: float, grid: TemporalGrid) -> SpaceTimeField:
    """``w(t) = int_0^t g(s) z(t - s) ds``; solves the equation with source ``(J_{1-alpha} g) f``."""
    _check_alpha(alpha)
    _check_source(g, grid)
    f = np.asarray(f, dtype=float)
    c = project(e, f)
    resp = _modal_response(e, alpha, 1.0, g)
    return _field(e, grid, (resp * c[:, None]).T, {"tail": _tail(e, f, c)})


def solve_modal_convolution(e: EigenDecomposition, f, g: GridFunction, alpha: float, grid: TemporalGrid) -> SpaceTimeField:
    """Per-mode convolution of ``g`` with ``s^(alpha-1) E_{alpha,alpha}(-lam_n s^alpha)``."""
    _check_alpha(alpha)
    _check_source(g, grid)
    f = np.asarray(f, dtype=float)
    c = project(e, f)
    resp = _modal_response(e, alpha, alpha, g)
    return _field(e, grid, (resp * c[:, None]).T, {"tail": _tail(e, f, c)})


def atom_modal_response(alpha: float, index: float, lams, atoms, t) -> np.ndarray:
    """``sum_k r_k (t - a_k)_+^(index-1) E_{alpha,index}(-lam (t - a_k)_+^alpha)``, shape ``(n_lams, n_t)``.

    Nodes with ``t <= a_k`` get nothing from atom ``k``.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    t = np.asarray(t, dtype=float)
    out = np.zeros((lams.size, t.size))
    for a, r in atoms.atoms:
        after = t > a
        if after.any():
            out[:, after] += r * ml_scaled(alpha, index, lams[:, None], (t[after] - a)[None, :])
    return out


@dataclass(frozen=True)
class SingularSolution:
    v: SpaceTimeField
    g: GridFunction
    u: SpaceTimeField | None = None
    transform_gap: float | None = None


def solve_singular(
    e: EigenDecomposition,
    f,
    mu: TemporalSource,
    params: FracParams,
    grid: TemporalGrid,
    check: bool = True,
    check_tol: float = 1e-3,
) -> SingularSolution:
    """Solve the transformed system for a singular source ``mu``.

    ``g = J_beta mu`` is formed first.  Its grid part is convolved with the
    kernel by product integration; the atoms are convolved exactly, which
    gives ``(t - a)^(alpha+beta-1) E_{alpha,alpha+beta}(-lam (t - a)^alpha)``.
    For a pure delta train ``u`` itself is returned as well and, with
    ``check=True``, ``J_beta u = v`` is verified mode by mode.
    """
    params.check_singular_chain()
    alpha, beta = params.alpha, params.beta
    g = regularize_source(beta, mu, grid)
    f = np.asarray(f, dtype=float)
    c = project(e, f)

    resp = np.zeros((e.n_modes, grid.n_steps))
    if mu.regular is not None:
        g_reg = regularize_source(beta, TemporalSource(regular=mu.regular), grid)
        resp += _modal_response(e, alpha, alpha, g_reg)
    if mu.atoms is not None:
        resp += atom_modal_response(alpha, alpha + beta, e.lambdas, mu.atoms, grid.nodes)
    meta = {"tail": _tail(e, f, c), "kind": mu.kind}
    v = _field(e, grid, (resp * c[:, None]).T, meta)

    u = None
    gap = None
    if mu.kind == "atomic":
        u_resp = atom_modal_response(alpha, alpha, e.lambdas, mu.atoms, grid.nodes)
        u = _field(e, grid, (u_resp * c[:, None]).T, meta)
        if check:
            gap = transform_check(alpha, beta, e.lambdas, mu.atoms, grid.nodes)
            if gap > check_tol:
                raise NumericalFailure(
                    f"transform check failed: max relative gap {gap:.3e} > {check_tol:g}"
                )
    return SingularSolution(v=v, g=g, u=u, transform_gap=gap)


def _graded_rule(beta: float, alpha: float, xmax: float, n_gl: int = 8, n_gj: int = 16):
    """Nodes and weights for ``int_0^1 (1-y)^(beta-1) ratio(y) F(y) dy``.

    ``F(y) = E(-X y)`` has a layer of width ``1/X`` at ``y = 0``; dyadic
    panels resolve it, and the last panel carries the endpoint weight exactly.
    """
    levels = max(4, int(math.ceil(math.log2(max(xmax, 1.0)))) + 3)
    edges = np.concatenate([[0.0], 0.5 ** np.arange(levels, 0, -1)])
    xg, wg = np.polynomial.legendre.leggauss(n_gl)
    lo, hi = edges[:-1, None], edges[1:, None]
    y = (0.5 * (hi - lo) * (xg + 1.0) + lo).ravel()
    w = (0.5 * (hi - lo) * wg).ravel() * (1.0 - y) ** (beta - 1.0)
    # panel [1/2, 1] with weight (1-y)^(beta-1): y = 1/2 + (1+x)/4
    xj, wj = roots_jacobi(n_gj, beta - 1.0, 0.0)
    y = np.concatenate([y, 0.75 + 0.25 * xj])
    w = np.concatenate([w, wj * 0.25**beta])
    # ((1 - y^(1/alpha)) / (1 - y))^(beta-1); its limit at y -> 1 is alpha^(1-beta)
    ratio = ((1.0 - y ** (1.0 / alpha)) / (1.0 - y)) ** (beta - 1.0)
    return y, w * ratio


def transform_check(alpha: float, beta: float, lams, atoms, t) -> float:
    """Largest per-mode relative gap between ``J_beta`` of the atom response and its closed form.

    ``J_beta`` is evaluated by quadrature after the substitution
    ``s - a = tau * y^(1/alpha)``, which removes the ``(s-a)^(alpha-1)``
    singularity and leaves the weight ``(1-y)^(beta-1)``.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    t = np.asarray(t, dtype=float)
    xmax = float(lams.max()) * float(t.max()) ** alpha
    y, wq = _graded_rule(beta, alpha, xmax)
    lhs = np.zeros((lams.size, t.size))
    for a, r in atoms.atoms:
        after = t > a
        tau = t[after] - a
        if tau.size == 0:
            continue
        zarg = -(lams[:, None, None] * tau[None, :, None] ** alpha) * y[None, None, :]
        integral = mittag_leffler(alpha, alpha, zarg) @ wq
        lhs[:, after] += r * tau ** (alpha + beta - 1.0) * integral / (alpha * gamma(beta))
    rhs = atom_modal_response(alpha, alpha + beta, lams, atoms, t)
    scale = np.maximum(np.abs(rhs).max(axis=1), 1e-300)
    return float((np.abs(lhs - rhs).max(axis=1) / scale).max())


# }}}


# {{{ L1 time stepping


def solve_timestep_oracle(A: DiscreteOperator, f, g: GridFunction, alpha: float, grid: TemporalGrid) -> SpaceTimeField:
    """Implicit L1 marching for ``(d_t^alpha + A) v = g f``, ``v(0) = 0``.

    Each step solves ``(c0 I + A) v^n = g_n f + c0 v^{n-1} - c0 sum_{k>=1} b_k (v^{n-k} - v^{n-k-1})``.
    Works for nonsymmetric ``A``; first order in time for smooth solutions.
    """
    _check_alpha(alpha)
    _check_source(g, grid)
    f = np.asarray(f, dtype=float)
    if f.shape != (A.n,):
        raise DomainError(f"field has {f.size} entries, operator has {A.n} nodes")
    n = grid.n_steps
    h = grid.h
    c0 = h ** (-alpha) / gamma(2.0 - alpha)
    k = np.arange(n, dtype=float)
    b = np.diff(np.r_[0.0, (k + 1.0) ** (1.0 - alpha)])  # avoids 0**0 = 1 at order 1

    M = A.dense() + c0 * np.eye(A.n)
    try:
        lu = la.lu_factor(M, check_finite=True)
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"marching matrix factorization failed: {exc}") from exc
    cond = float(np.linalg.cond(M))

    v = np.zeros((n, A.n))
    dv = np.zeros((n, A.n))  # dv[j] = v^j - v^{j-1}
    gv = g.values
    for i in range(1, n):
        hist = b[1:i] @ dv[i - 1 : 0 : -1] if i > 1 else 0.0
        rhs = gv[i] * f + c0 * (v[i - 1] - hist)
        v[i] = la.lu_solve(lu, rhs)
        dv[i] = v[i] - v[i - 1]
    if not np.all(np.isfinite(v)):
        raise NumericalFailure("time stepping produced non-finite values")
    return SpaceTimeField(grid, A.x.copy(), v, A.h * (A.n + 1), {"condition": cond})


def pde_residual(v: SpaceTimeField, A: DiscreteOperator, f, g: GridFunction, alpha: float) -> float:
    """Relative ``L^2`` residual of ``(D_L1 + A) v - g f`` over ``t_1..t_N``."""
    _check_source(g, v.grid)
    f = np.asarray(f, dtype=float)
    D = l1_matrix(float(alpha), v.grid.n_steps, v.grid.h)
    R = D @ v.values + A.matvec(v.values.T).T - np.outer(g.values, f)
    src = np.outer(g.values, f)
    num = float(np.sum(R[1:] ** 2))
    den = float(np.sum(src[1:] ** 2))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return math.sqrt(num / den)


# }}}
