"""Finite-difference Dirichlet operator ``-(a u')' + c u`` on ``(0, L)`` and its spectral calculus.

Fields are plain arrays over the interior nodes ``x_i = i h``, ``h = L/(n+1)``;
boundary values are zero and never stored.  The discrete inner product is
``(u, v)_h = h * sum(u_i v_i)``, and eigenvectors are normalized in it.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Union

import numpy as np
import scipy.linalg as la

from fracsrc.errors import DomainError, NumericalFailure, PreconditionError
from fracsrc.expr import compile_expression

__all__ = [
    "OperatorSpec",
    "DiscreteOperator",
    "EigenDecomposition",
    "Subdomain",
    "Point",
    "assemble",
    "eigendecompose",
    "project",
    "synthesize",
    "apply_fractional_power",
    "apply_inverse",
    "group_projection",
    "is_m_matrix",
    "inverse_sign_violations",
]

Coefficient = Union[float, int, str, Callable, list, tuple, np.ndarray]

GROUP_RTOL = 1e-8


def _sample(coef: Coefficient, x: np.ndarray, name: str) -> np.ndarray:
    if isinstance(coef, str):
        vals = compile_expression(coef)(x)
    elif callable(coef):
        vals = np.broadcast_to(np.asarray(coef(x), dtype=float), x.shape)
    elif np.ndim(coef) == 0:
        vals = np.full(x.shape, float(coef))
    else:
        vals = np.asarray(coef, dtype=float)
        if vals.shape != x.shape:
            raise DomainError(f"{name}: expected {x.size} samples, got {vals.size}")
    vals = np.array(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError(f"{name}: coefficient samples must be finite")
    vals.flags.writeable = False
    return vals


@dataclass(frozen=True)
class OperatorSpec:
    """Coefficients of ``A v = -(a v')' + c v`` (plus an optional drift ``b v'``).

    ``a`` is sampled at the cell midpoints ``x_{i+1/2}``, ``c`` and ``b`` at the
    interior nodes.  Each may be a constant, an expression in ``x``, a callable
    or an explicit sample array.
    """

    L: float
    n_interior: int
    a: Coefficient = 1.0
    c: Coefficient = 0.0
    b: Coefficient | None = None
    a_mid: np.ndarray = field(init=False, repr=False, compare=False)
    c_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    b_nodes: np.ndarray | None = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.L > 0.0) or not math.isfinite(self.L):
            raise DomainError(f"domain length must be positive, got {self.L!r}")
        if int(self.n_interior) != self.n_interior or self.n_interior < 3:
            raise DomainError(f"n_interior must be an integer >= 3, got {self.n_interior!r}")
        object.__setattr__(self, "n_interior", int(self.n_interior))
        a_mid = _sample(self.a, self.midpoints, "a")
        if np.any(a_mid <= 0.0):
            raise DomainError(f"ellipticity violated: min a = {a_mid.min():.6g} <= 0")
        object.__setattr__(self, "a_mid", a_mid)
        object.__setattr__(self, "c_nodes", _sample(self.c, self.nodes, "c"))
        b = None if self.b is None else _sample(self.b, self.nodes, "b")
        object.__setattr__(self, "b_nodes", b)

    @property
    def h(self) -> float:
        return self.L / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_interior + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.h * (np.arange(self.n_interior + 1) + 0.5)

    @property
    def kappa(self) -> float:
        """Ellipticity constant ``min a``."""
        return float(self.a_mid.min())

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> OperatorSpec:
        unknown = set(d) - {"L", "n", "a", "c", "b"}
        if unknown:
            raise DomainError(f"unknown operator keys: {sorted(unknown)}")
        try:
            return cls(float(d["L"]), d["n"], d.get("a", 1.0), d.get("c", 0.0), d.get("b"))
        except KeyError as exc:
            raise DomainError(f"operator config is missing {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> OperatorSpec:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict[str, Any]:
        def enc(v):
            if v is None or isinstance(v, (str, int, float)):
                return v
            if callable(v):
                raise DomainError("callable coefficients cannot be serialized")
            return [float(s) for s in np.asarray(v).ravel()]

        out = {"L": self.L, "n": self.n_interior, "a": enc(self.a), "c": enc(self.c)}
        if self.b is not None:
            out["b"] = enc(self.b)
        return out


@dataclass(frozen=True)
class DiscreteOperator:
    """Tridiagonal matrix acting on interior-node fields."""

    lower: np.ndarray  # A[i+1, i]
    diag: np.ndarray
    upper: np.ndarray  # A[i, i+1]
    h: float
    x: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.lower, self.upper))

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """``A v``; ``v`` may carry extra trailing axes (columns)."""
        v = np.asarray(v, dtype=float)
        shape = (-1,) + (1,) * (v.ndim - 1)
        out = self.diag.reshape(shape) * v
        out[:-1] += self.upper.reshape(shape) * v[1:]
        out[1:] += self.lower.reshape(shape) * v[:-1]
        return out

    def banded(self, shift: float = 0.0) -> np.ndarray:
        """``(A + shift I)`` in the LAPACK (1, 1) banded layout."""
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.upper
        ab[1] = self.diag + shift
        ab[2, :-1] = self.lower
        return ab


def assemble(spec: OperatorSpec, drift: bool = False, check: bool = True) -> DiscreteOperator:
    """Three-point discretization; the drift ``b`` enters only with ``drift=True``.

    Row ``i``: ``-a_{i-1/2}/h^2, (a_{i-1/2} + a_{i+1/2})/h^2 + c_i, -a_{i+1/2}/h^2``.
    """
    h = spec.h
    a = spec.a_mid
    diag = (a[:-1] + a[1:]) / h**2 + spec.c_nodes
    off = -a[1:-1] / h**2
    lower, upper = off.copy(), off.copy()
    if drift and spec.b_nodes is not None:
        b = spec.b_nodes
        upper += b[:-1] / (2.0 * h)
        lower -= b[1:] / (2.0 * h)
    op = DiscreteOperator(lower, diag, upper, h, spec.nodes)
    if check and op.symmetric:
        lam_min = la.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0]
        if not lam_min > 0.0:
            raise NumericalFailure(
                f"definiteness check failed: smallest eigenvalue {lam_min:.6g} <= 0"
            )
    return op


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs normalized in ``(u, v)_h``; ``modes[:, k]`` is ``phi_{k+1}``."""

    lambdas: np.ndarray
    modes: np.ndarray
    h: float
    groups: tuple[np.ndarray, ...]

    @property
    def n_modes(self) -> int:
        return self.lambdas.size

    @property
    def n_interior(self) -> int:
        return self.modes.shape[0]

    @property
    def rho(self) -> np.ndarray:
        """Distinct eigenvalues, one per group."""
        return np.array([self.lambdas[g].mean() for g in self.groups])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,lambda\n")
        for k, lam in enumerate(self.lambdas, start=1):
            buf.write(f"{k},{lam:.17g}\n")
        return buf.getvalue()


def _group(lams: np.ndarray) -> tuple[np.ndarray, ...]:
    tol = GROUP_RTOL * float(np.max(np.abs(lams)))
    groups, start = [], 0
    for k in range(1, lams.size + 1):
        if k == lams.size or lams[k] - lams[k - 1] > tol:
            groups.append(np.arange(start, k))
            start = k
    return tuple(groups)


def eigendecompose(A, n_modes: int | None = None, h: float | None = None) -> EigenDecomposition:
    """Lowest ``n_modes`` eigenpairs of a symmetric operator.

    ``A`` is a :class:`DiscreteOperator` or a dense symmetric matrix; for a
    dense matrix the inner-product weight ``h`` defaults to 1.
    """
    if isinstance(A, DiscreteOperator):
        if not A.symmetric:
            raise PreconditionError("eigendecompose needs a symmetric operator (no drift)")
        n, h = A.n, A.h
    else:
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * np.abs(A).max()):
            raise PreconditionError("eigendecompose needs a square symmetric matrix")
        h = 1.0 if h is None else float(h)
    k = n if n_modes is None else int(n_modes)
    if not 1 <= k <= n:
        raise DomainError(f"n_modes must lie in [1, {n}], got {n_modes}")
    try:
        if isinstance(A, DiscreteOperator):
            lams, V = la.eigh_tridiagonal(
                A.diag, A.upper, select="i" if k < n else "a", select_range=(0, k - 1)
            )
        else:
            lams, V = la.eigh(A, subset_by_index=[0, k - 1])
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    if not lams[0] > 0.0:
        raise NumericalFailure(f"operator is not positive definite: lambda_1 = {lams[0]:.6g}")
    V = V / math.sqrt(h)
    # fix the sign: first entry of significant size is positive
    for j in range(k):
        col = V[:, j]
        i = int(np.argmax(np.abs(col) > 1e-8 * np.abs(col).max()))
        if col[i] < 0:
            V[:, j] = -col
    lams.flags.writeable = False
    V.flags.writeable = False
    return EigenDecomposition(lams, V, h, _group(lams))


def _check_field(e: EigenDecomposition, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != e.n_interior:
        raise DomainError(f"field has {f.shape[0]} entries, operator has {e.n_interior} nodes")
    return f


def project(e: EigenDecomposition, f) -> np.ndarray:
    """Coefficients ``(f, phi_n)_h``."""
    f = _check_field(e, f)
    return e.h * (e.modes.T @ f)


def synthesize(e: EigenDecomposition, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != e.n_modes:
        raise DomainError(f"expected {e.n_modes} coefficients, got {coeffs.shape[0]}")
    return e.modes @ coeffs


def apply_fractional_power(e: EigenDecomposition, theta: float, f) -> np.ndarray:
    """``A^theta f`` through the spectral expansion."""
    return synthesize(e, e.lambdas**theta * project(e, f))


def apply_inverse(e: EigenDecomposition, f, tol: float = 1e-12) -> np.ndarray:
    if not e.lambdas[0] > tol:
        raise NumericalFailure(f"inverse undefined: lambda_1 = {e.lambdas[0]:.6g} <= {tol:g}")
    return synthesize(e, project(e, f) / e.lambdas)


def group_projection(e: EigenDecomposition, k: int, f) -> np.ndarray:
    """Projection of ``f`` onto the ``k``-th eigenspace (0-based group index)."""
    idx = e.groups[k]
    return e.modes[:, idx] @ project(e, f)[idx]


def is_m_matrix(A: DiscreteOperator) -> bool:
    """Positive diagonal, nonpositive off-diagonal and positive definite."""
    if np.any(A.diag <= 0) or np.any(A.lower > 0) or np.any(A.upper > 0):
        return False
    try:
        la.cholesky_banded(np.vstack([np.r_[0.0, A.upper], A.diag]))
    except la.LinAlgError:
        return False
    return True


def inverse_sign_violations(A: DiscreteOperator) -> int:
    """Number of nonpositive entries of ``A^{-1}`` (zero for an irreducible M-matrix)."""
    inv = la.solve_banded((1, 1), A.banded(), np.eye(A.n))
    return int(np.count_nonzero(inv <= 0.0))


# {{{ observation specs


@dataclass(frozen=True)
class Subdomain:
    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 1 or not m.any():
            raise DomainError("subdomain mask must be a nonempty 1D boolean vector")
        idx = np.flatnonzero(m)
        if idx[-1] - idx[0] + 1 != idx.size:
            raise DomainError("subdomain mask must be a single contiguous run")
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @classmethod
    def central(cls, n_interior: int, fraction: float) -> Subdomain:
        """Nodes within the central ``fraction`` of the interval."""
        if not 0.0 < fraction <= 1.0:
            raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
        s = (np.arange(1, n_interior + 1)) / (n_interior + 1)
        m = np.abs(s - 0.5) <= 0.5 * fraction + 1e-12
        if not m.any():
            m[n_interior // 2] = True
        return cls(m)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True)
class Point:
    index: int
    n_interior: int

    def __post_init__(self) -> None:
        if not 0 <= int(self.index) < int(self.n_interior):
            raise DomainError(
                f"observation point index {self.index} is not an interior node (0..{self.n_interior - 1})"
            )

    @property
    def indices(self) -> np.ndarray:
        return np.array([int(self.index)])


# }}}
