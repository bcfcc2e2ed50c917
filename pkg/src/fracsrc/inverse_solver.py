"""Inverse source problems: recover ``f`` from subdomain data, or ``mu`` from one point.

Both problems are linear and are discretized through the spectral forward
solver.  ``f`` is reconstructed by Tikhonov-regularized least squares;
``mu`` in ``L^2`` by regularized deconvolution against the point kernel; a
delta train by matching pursuit over shifted kernels followed by damped
Gauss-Newton refinement of locations and weights.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from fracsrc.errors import DomainError, HypothesisViolation, NumericalFailure
from fracsrc.forward_solver import convolution_weights
from fracsrc.fractional_calculus import DeltaTrain, GridFunction, TemporalGrid
from fracsrc.mittag_leffler import mittag_leffler, ml_scaled
from fracsrc.spectral_operator import EigenDecomposition, Point, Subdomain, apply_inverse, group_projection, project
from fracsrc.special import gamma

__all__ = [
    "ForwardMap",
    "RegularizationSpec",
    "FieldEstimate",
    "SourceEstimate",
    "PointKernel",
    "TrainEstimate",
    "InjectivityReport",
    "AsymptoticReport",
    "build_forward_map_f",
    "recover_f",
    "build_point_kernel",
    "recover_mu_l2",
    "recover_delta_train",
    "injectivity_report",
    "asymptotic_diagnostic",
]

log = logging.getLogger(__name__)

UNIQUENESS_RTOL = 1e-10


@dataclass(frozen=True)
class RegularizationSpec:
    kind: str = "ridge"  # or "ridge-on-derivative"
    weight: float = 1e-12
    selection: str = "fixed"  # or "discrepancy"
    noise_level: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("ridge", "ridge-on-derivative"):
            raise DomainError(f"unknown regularization kind {self.kind!r}")
        if self.selection not in ("fixed", "discrepancy"):
            raise DomainError(f"unknown parameter selection {self.selection!r}")
        if not (self.weight >= 0.0) or not math.isfinite(self.weight):
            raise DomainError(f"regularization weight must be >= 0, got {self.weight!r}")
        if self.selection == "discrepancy" and not self.noise_level > 0.0:
            raise DomainError("discrepancy selection needs a positive noise level")


@dataclass(frozen=True)
class ForwardMap:
    """Dense linear map from unknowns to stacked observations.

    Rows are ordered time-major over ``t_1..t_N`` (``t_0`` carries no
    information since the solution vanishes there) and then over observed
    nodes.
    """

    matrix: np.ndarray
    obs: Subdomain | Point
    grid: TemporalGrid
    unknowns: str = "spatial nodes"

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.matrix)):
            raise NumericalFailure("forward map has non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def observe(self, values: np.ndarray) -> np.ndarray:
        """Stack a ``(n_steps, n_interior)`` field into the data layout of this map."""
        return np.asarray(values)[1:, self.obs.indices].ravel()


# {{{ regularized least squares


def _first_difference(n: int) -> np.ndarray:
    return np.diff(np.eye(n), axis=0)


def _ridge_solve(M: np.ndarray, d: np.ndarray, R: np.ndarray, lam: float):
    N = M.T @ M + lam * (R.T @ R)
    try:
        c = la.cho_factor(N)
    except la.LinAlgError as exc:
        raise NumericalFailure(
            f"normal matrix is singular at regularization weight {lam:g}; "
            "use a positive weight"
        ) from exc
    x = la.cho_solve(c, M.T @ d)
    return x, float(np.linalg.norm(M @ x - d))


def _select_weight(M, d, R, reg: RegularizationSpec):
    """Return ``(x, residual, weight)`` according to the selection rule.

    The discrepancy rule takes the largest weight whose residual stays within
    10% above ``noise_level * sqrt(n)``.  For a map of low numerical rank the
    residual sits at the noise level over many decades of weights, so the
    first weight that merely matches the target would be arbitrary.
    """
    if reg.selection == "fixed":
        x, res = _ridge_solve(M, d, R, reg.weight)
        return x, res, reg.weight
    target = 1.1 * reg.noise_level * math.sqrt(d.size)
    # the residual grows with the weight; bisect in log space for the crossing
    scale = float(np.linalg.norm(M, 2)) ** 2
    lo, hi = math.log10(scale) - 16.0, math.log10(scale) + 4.0
    x_lo, r_lo = _ridge_solve(M, d, R, 10.0**lo)
    if r_lo > target:
        log.warning("discrepancy target is below the residual at the smallest weight; noise level too small?")
        return x_lo, r_lo, 10.0**lo
    x_hi, r_hi = _ridge_solve(M, d, R, 10.0**hi)
    if r_hi <= target:
        return x_hi, r_hi, 10.0**hi
    best = (x_lo, r_lo, 10.0**lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        x, res = _ridge_solve(M, d, R, 10.0**mid)
        if res <= target:
            lo, best = mid, (x, res, 10.0**mid)
        else:
            hi = mid
        if hi - lo < 1e-3:
            break
    return best


@dataclass(frozen=True)
class FieldEstimate:
    values: np.ndarray
    residual: float
    weight: float
    relative_residual: float


@dataclass(frozen=True)
class SourceEstimate:
    mu: GridFunction
    residual: float
    weight: float
    condition: float


# }}}


# {{{ recovering f


def _modal_response(e: EigenDecomposition, g: GridFunction, alpha: float) -> np.ndarray:
    w, end = convolution_weights(alpha, alpha, e.lambdas, g.grid)
    n = g.grid.n_steps
    out = np.zeros((e.n_modes, n))
    for i in range(1, n):
        out[:, i] = w[:, :i] @ g.values[i:0:-1] + end[:, i] * g.values[0]
    return out


def build_forward_map_f(
    e: EigenDecomposition, g: GridFunction, alpha: float, obs: Subdomain, grid: TemporalGrid
) -> ForwardMap:
    """Matrix of ``f -> v|_{obs x (0, T]}`` with ``f`` given by its nodal values."""
    if g.grid != grid:
        raise DomainError("source and output grids differ")
    if not np.any(g.values != 0.0):
        raise HypothesisViolation("hypothesis μ≢0 violated: the temporal source vanishes identically")
    if obs.mask.size != e.n_interior:
        raise DomainError("observation mask does not match the spatial grid")
    resp = _modal_response(e, g, alpha)[:, 1:]  # (modes, N)
    phi_obs = e.modes[obs.indices]  # (n_obs, modes)
    # v(x_j, t_i) = sum_n resp[n, i] phi_n(x_j) h phi_n . f
    M = np.einsum("ni,jn,kn->ijk", resp, phi_obs, e.h * e.modes)
    return ForwardMap(M.reshape(-1, e.n_interior), obs, grid)


def recover_f(obs_data, fmap: ForwardMap, reg: RegularizationSpec) -> FieldEstimate:
    d = np.asarray(obs_data, dtype=float).ravel()
    M = fmap.matrix
    if d.size != M.shape[0]:
        raise DomainError(f"data has {d.size} entries, forward map has {M.shape[0]} rows")
    n = M.shape[1]
    R = np.eye(n) if reg.kind == "ridge" else _first_difference(n)
    x, res, lam = _select_weight(M, d, R, reg)
    dn = float(np.linalg.norm(d))
    return FieldEstimate(x, res, lam, res / dn if dn > 0 else 0.0)


# }}}


# {{{ recovering mu from a point


@dataclass(frozen=True)
class PointKernel:
    """``K(t) = sum_n c_n phi_n(x0) t^(index-1) E_{alpha,index}(-lam_n t^alpha)``, ``index = alpha + order``.

    ``order = 0`` gives the kernel of ``u(x0, .) = mu * K``; ``order = beta``
    gives the kernel acting on the transformed data ``J_beta u``.  Node 0
    holds the mean of ``K`` over the first cell, since ``K`` may be singular
    there.  ``matrix`` is the lower-triangular product-integration operator
    for piecewise-linear sources.
    """

    grid: TemporalGrid
    alpha: float
    order: float
    x0: int
    lambdas: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    matrix: np.ndarray = field(repr=False)

    @property
    def index(self) -> float:
        return self.alpha + self.order

    def evaluate(self, tau) -> np.ndarray:
        """``K`` at lags ``tau``; zero for ``tau <= 0``."""
        tau = np.asarray(tau, dtype=float)
        out = np.zeros(tau.shape)
        pos = tau > 0
        if pos.any():
            vals = ml_scaled(self.alpha, self.index, self.lambdas[:, None], tau[pos][None, :])
            out[pos] = self.weights @ vals
        return out

    def derivative(self, tau) -> np.ndarray:
        """``dK/dtau`` for ``tau > 0``; analytic when ``index > 1``."""
        tau = np.asarray(tau, dtype=float)
        out = np.zeros(tau.shape)
        pos = tau > 0
        if not pos.any():
            return out
        tp = tau[pos]
        if self.index > 1.0:
            vals = ml_scaled(self.alpha, self.index - 1.0, self.lambdas[:, None], tp[None, :])
            out[pos] = self.weights @ vals
        else:
            step = 1e-6 * tp
            out[pos] = (self.evaluate(tp + step) - self.evaluate(tp - step)) / (2.0 * step)
        return out

    def shifted(self, a: float) -> np.ndarray:
        """``K(t_i - a)`` at the grid nodes."""
        return self.evaluate(self.grid.nodes - a)


def build_point_kernel(
    e: EigenDecomposition, f, alpha: float, x0: int, grid: TemporalGrid, order: float = 0.0
) -> PointKernel:
    f = np.asarray(f, dtype=float)
    Point(x0, e.n_interior)
    if not (np.all(f >= 0.0) or np.all(f <= 0.0)) or not np.any(f != 0.0):
        warnings.warn(
            "spatial factor is not of one sign (or vanishes); the point-data problem may be non-unique",
            stacklevel=2,
        )
    weights = project(e, f) * e.modes[x0]
    if not np.any(weights != 0.0):
        raise DomainError("point kernel vanishes identically at the observation node")
    index = alpha + order
    w, end = convolution_weights(alpha, index, e.lambdas, grid)
    wk = weights @ w
    ek = weights @ end
    n = grid.n_steps
    B = np.zeros((n, n))
    for i in range(1, n):
        B[i, 1 : i + 1] = wk[:i][::-1]
        B[i, 0] = ek[i]
    values = np.zeros(n)
    values[1:] = weights @ ml_scaled(alpha, index, e.lambdas[:, None], grid.nodes[None, 1:])
    # first-cell mean: (1/h) int_0^h K = K1(h)/h
    values[0] = weights @ ml_scaled(alpha, index + 1.0, e.lambdas, grid.h) / grid.h
    return PointKernel(grid, alpha, order, int(x0), e.lambdas, weights, values, B)


def recover_mu_l2(point_data: GridFunction, K: PointKernel, reg: RegularizationSpec) -> SourceEstimate:
    """Deconvolve ``u(x0, .) = K * mu`` for a square-integrable ``mu``."""
    if point_data.grid != K.grid:
        raise DomainError("data and kernel grids differ")
    B = K.matrix[1:]
    d = point_data.values[1:]
    n = B.shape[1]
    R = np.eye(n) if reg.kind == "ridge" else _first_difference(n)
    x, res, lam = _select_weight(B, d, R, reg)
    sv = la.svdvals(B)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    return SourceEstimate(GridFunction(K.grid, x), res, lam, cond)


# }}}


# {{{ delta trains


@dataclass(frozen=True)
class TrainEstimate:
    train: DeltaTrain
    residual: float
    relative_residual: float
    converged: bool
    iterations: int


def _model(K: PointKernel, a: np.ndarray, r: np.ndarray) -> np.ndarray:
    t = K.grid.nodes
    return sum(rk * K.evaluate(t - ak) for ak, rk in zip(a, r)) if a.size else np.zeros_like(t)


def _cell_bounds(a: np.ndarray, h: float, T: float, eps: float) -> tuple[np.ndarray, np.ndarray]:
    j = np.floor(a / h + 1e-9)
    lo = np.maximum(j * h, eps)
    hi = np.minimum((j + 1.0) * h, T - eps)
    return lo, hi


def _refine_in_cells(K: PointKernel, d: np.ndarray, a, r, lo, hi, max_iter: int = 50):
    """Levenberg-Marquardt on ``||d - sum r_k K(t - a_k)||^2`` with ``a_k`` boxed in ``[lo_k, hi_k]``.

    Within one grid cell the model is smooth in ``a_k``; crossing a node
    switches a sample on or off, which is why the boxes are cells.
    """
    t = K.grid.nodes

    def cost(a_, r_):
        res_ = d - _model(K, a_, r_)
        return float(res_ @ res_), res_

    a = np.clip(np.asarray(a, dtype=float), lo, hi)
    r = np.asarray(r, dtype=float)
    c, res = cost(a, r)
    floor = (1e-15 * float(np.linalg.norm(d))) ** 2
    lm = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if c <= floor:
            converged = True
            break
        cols_r = [K.evaluate(t - ak) for ak in a]
        cols_a = [-rk * K.derivative(t - ak) for ak, rk in zip(a, r)]
        J = np.column_stack(cols_a + cols_r)
        JtJ = J.T @ J
        grad = J.T @ res
        scale = np.diag(JtJ).copy()
        scale[scale == 0.0] = 1.0
        accepted = False
        for _ in range(25):
            try:
                with warnings.catch_warnings():
                    # ill-conditioning is expected and handled by damping
                    warnings.simplefilter("ignore", la.LinAlgWarning)
                    step = la.solve(JtJ + lm * np.diag(scale), grad, assume_a="pos")
            except (la.LinAlgError, ValueError):
                lm *= 10.0
                continue
            a_new = np.clip(a + step[: a.size], lo, hi)
            r_new = r + step[a.size :]
            c_new, res_new = cost(a_new, r_new)
            if c_new < c:
                accepted = True
                break
            lm *= 10.0
        if not accepted:
            # no descent left inside the boxes
            converged = True
            break
        small = np.all(np.abs(a_new - a) <= 1e-9 * K.grid.h) and np.all(
            np.abs(r_new - r) <= 1e-9 * np.abs(r_new)
        )
        # with a nonzero residual (model mismatch) Gauss-Newton converges only
        # linearly; a relative decrease below 1e-6 moves a_k by ~1e-4 h at most
        flat = c - c_new <= 1e-6 * c
        a, r, c, res = a_new, r_new, c_new, res_new
        lm = max(lm / 10.0, 1e-12)
        if small or flat:
            converged = True
            break
    return a, r, c, converged, it


def _refine(K: PointKernel, d: np.ndarray, a: np.ndarray, r: np.ndarray):
    """Cell-boxed refinement, then move atoms stuck on a cell edge into the neighbouring cell."""
    h, T = K.grid.h, K.grid.T
    eps = 1e-9 * T
    lo, hi = _cell_bounds(a, h, T, eps)
    a, r, c, converged, iters = _refine_in_cells(K, d, a, r, lo, hi)
    for _ in range(4 * max(a.size, 1)):
        moved = False
        for k in range(a.size):
            for side in (-1.0, 1.0):
                edge = lo[k] if side < 0 else hi[k]
                if abs(a[k] - edge) > 1e-6 * h:
                    continue
                start = a.copy()
                start[k] = edge + side * 0.5 * h
                if not eps < start[k] < T - eps:
                    continue
                lo2, hi2 = lo.copy(), hi.copy()
                nlo, nhi = _cell_bounds(start[k : k + 1], h, T, eps)
                lo2[k], hi2[k] = nlo[0], nhi[0]
                a2, r2, c2, conv2, it2 = _refine_in_cells(K, d, start, r, lo2, hi2)
                iters += it2
                if c2 < c * (1.0 - 1e-9):
                    a, r, c, converged, lo, hi = a2, r2, c2, conv2, lo2, hi2
                    moved = True
                    break
        if not moved:
            break
    return a, r, c, converged, iters


def recover_delta_train(
    point_data: GridFunction, K: PointKernel, max_atoms: int = 5, tol: float = 1e-6, refine: int = 8
) -> TrainEstimate:
    """Matching pursuit over kernels shifted on a ``refine``-times finer grid, then joint refinement."""
    if point_data.grid != K.grid:
        raise DomainError("data and kernel grids differ")
    d = point_data.values.astype(float)
    dn = float(np.linalg.norm(d))
    if dn == 0.0:
        return TrainEstimate(DeltaTrain(()), 0.0, 0.0, True, 0)
    grid = K.grid
    h = grid.h
    n = grid.n_steps
    # dictionary: fine table of K at lags m h / refine, shifts a_p = p h / refine
    lags = (h / refine) * np.arange(refine * (n - 1) + 1)
    table = K.evaluate(lags)
    p = np.arange(1, refine * (n - 1))
    shift = refine * np.arange(n)[:, None] - p[None, :]
    D = np.where(shift > 0, table[np.clip(shift, 0, None)], 0.0)
    norms = np.linalg.norm(D, axis=0)
    usable = norms > 0
    a = np.zeros(0)
    r = np.zeros(0)
    res = d.copy()
    converged = True
    iters = 0
    for _ in range(max_atoms):
        corr = np.where(usable, np.abs(D.T @ res) / np.where(usable, norms, 1.0), -np.inf)
        j = int(np.argmax(corr))
        a_try = np.r_[a, p[j] * h / refine]
        cols = np.column_stack([K.evaluate(grid.nodes - ak) for ak in a_try])
        r_try = np.linalg.lstsq(cols, d, rcond=None)[0]
        a, r, c, converged, it = _refine(K, d, a_try, r_try)
        iters += it
        res = d - _model(K, a, r)
        if math.sqrt(c) <= tol * dn:
            break
    # merge atoms that collapsed onto each other, drop negligible ones
    order = np.argsort(a)
    a, r = a[order], r[order]
    keep_a, keep_r = [], []
    for ak, rk in zip(a, r):
        if keep_a and abs(ak - keep_a[-1]) < 1e-6 * h:
            keep_r[-1] += rk
        else:
            keep_a.append(float(ak))
            keep_r.append(float(rk))
    scale = max(abs(x) for x in keep_r)
    pairs = [(ak, rk) for ak, rk in zip(keep_a, keep_r) if abs(rk) > 1e-8 * scale]
    final = np.array([x for x, _ in pairs]), np.array([y for _, y in pairs])
    resid = float(np.linalg.norm(d - _model(K, *final)))
    if not converged:
        log.warning("atom refinement did not converge; returning the best iterate")
    return TrainEstimate(DeltaTrain(tuple(pairs)), resid, resid / dn, converged, iters)


# }}}


# {{{ diagnostics


@dataclass(frozen=True)
class InjectivityReport:
    singular_values: np.ndarray
    condition: float
    rank: int
    unique: bool

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])


def injectivity_report(fmap) -> InjectivityReport:
    M = fmap.matrix if isinstance(fmap, ForwardMap) else np.asarray(fmap, dtype=float)
    sv = la.svdvals(M)
    smax = float(sv[0]) if sv.size else 0.0
    rank = int(np.count_nonzero(sv > UNIQUENESS_RTOL * smax)) if smax > 0 else 0
    full = min(M.shape) == M.shape[1]
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else math.inf
    unique = bool(full and smax > 0 and sv[-1] > UNIQUENESS_RTOL * smax)
    return InjectivityReport(sv, cond, rank, unique)


@dataclass(frozen=True)
class AsymptoticReport:
    S: float
    S_groups: float
    fitted: float
    predicted: float
    relative_error: float
    horizon: float
    coefficients: np.ndarray


def asymptotic_diagnostic(
    K: PointKernel, e: EigenDecomposition, f, alpha: float, horizon: float | None = None, n_terms: int = 4
) -> AsymptoticReport:
    """Fit the long-time expansion of ``z(x0, t)`` and compare its ``t^-alpha`` coefficient.

    The leading coefficient should equal ``(A^{-1} f)(x0) / Gamma(1 - alpha)``.
    """
    f = np.asarray(f, dtype=float)
    x0 = K.x0
    S = float(apply_inverse(e, f)[x0])
    S_groups = float(
        sum(group_projection(e, k, f)[x0] / rho for k, rho in enumerate(e.rho))
    )
    if horizon is None:
        horizon = 50.0 * e.lambdas[0] ** (-1.0 / alpha)
    t = np.geomspace(horizon / 10.0, horizon, 200)
    z = K.weights @ mittag_leffler(alpha, 1.0, -e.lambdas[:, None] * t[None, :] ** alpha)
    basis = np.column_stack([t ** (-k * alpha) for k in range(1, n_terms + 1)])
    coef = np.linalg.lstsq(basis, z, rcond=None)[0]
    predicted = S / gamma(1.0 - alpha)
    rel = abs(coef[0] - predicted) / abs(predicted) if predicted != 0 else math.inf
    return AsymptoticReport(S, S_groups, float(coef[0]), float(predicted), float(rel), float(horizon), coef)


# }}}
