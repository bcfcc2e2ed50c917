"""Acceptance suite: each criterion is a list of measured checks against fixed limits.

``run_all`` is what ``fracsrc report`` serializes.  Nothing here depends on
wall-clock time or unseeded randomness, so two runs give identical reports.
"""

from __future__ import annotations

import math
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fracsrc.forward_solver import (
    solve_duhamel,
    solve_modal_convolution,
    solve_singular,
    solve_timestep_oracle,
)
from fracsrc.fractional_calculus import (
    DeltaTrain,
    FracParams,
    GridFunction,
    TemporalGrid,
    TemporalSource,
    caputo,
    convolve,
    regularize_source,
    rl_forward,
)
from fracsrc.inverse_solver import (
    RegularizationSpec,
    asymptotic_diagnostic,
    build_forward_map_f,
    build_point_kernel,
    injectivity_report,
    recover_delta_train,
    recover_f,
    recover_mu_l2,
)
from fracsrc.mittag_leffler import (
    ml_asymptotic_leading,
    ml_integral,
    ml_kernel,
    ml_scaled,
    ml_series,
    mittag_leffler,
)
from fracsrc.special import gamma
from fracsrc.spectral_operator import (
    OperatorSpec,
    Subdomain,
    apply_inverse,
    assemble,
    eigendecompose,
    inverse_sign_violations,
    is_m_matrix,
)
from fracsrc import synthetic

# reference configuration
ALPHA = 0.5
BETA = 0.75
T_END = 1.0
N_STEPS = 101
N_INTERIOR = 99
X0 = 29  # observation node for the point problems, x = 0.3
ATOMS = ((0.25, 2.0), (0.75, 3.0))


def reference_f(x):
    return np.sin(np.pi * x) + x * (1.0 - x)


def smooth_mu(t):
    return np.sin(2.0 * np.pi * t) + 1.5 * t


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    relation: str = "<="  # "<=", ">=", ">", "=="

    @property
    def passed(self) -> bool:
        v, lim = self.value, self.limit
        if not math.isfinite(v) and self.relation != "==":
            return False
        return {
            "<=": v <= lim,
            ">=": v >= lim,
            ">": v > lim,
            "==": v == lim,
        }[self.relation]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "limit": float(self.limit),
            "relation": self.relation,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    checks: tuple[Check, ...]
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def line(self) -> str:
        bad = [c.name for c in self.checks if not c.passed]
        tail = "" if not bad else "  failing: " + ", ".join(bad)
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}{tail}"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "info": self.info,
        }


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    nb = float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b)) / nb if nb > 0 else float(np.linalg.norm(a))


def _smooth_random(t, seed: int, n_terms: int = 4):
    """A fixed smooth function built from a seeded random trigonometric sum."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n_terms)
    k = np.arange(1, n_terms + 1)
    return (c[None, :] * np.sin(np.outer(t, k) + k)).sum(axis=1) / k.size


def _reference_setup(n_interior: int = N_INTERIOR):
    spec = OperatorSpec(1.0, n_interior)
    A = assemble(spec)
    return spec, A, eigendecompose(A)


# {{{ 1 special functions


def completely_monotone_violations(alpha: float, lo: float = 1e-3, decades: int = 6,
                                   per_decade: int = 201, order: int = 2) -> int:
    """Sign violations of ``(-1)^k Delta^k E_{alpha,1}(-x)`` on uniform grids, one per decade.

    A difference counts as a violation only when it has the wrong sign by more
    than ``2^k * 2e-14``, the propagated evaluation error.
    """
    bad = 0
    for j in range(decades):
        x = np.linspace(lo * 10.0**j, lo * 10.0 ** (j + 1), per_decade)
        y = mittag_leffler(alpha, 1.0, -x)
        bad += int(np.count_nonzero(y < 0.0))
        d = y
        for k in range(1, order + 1):
            d = np.diff(d)
            bad += int(np.count_nonzero((-1) ** k * d < -(2.0**k) * 2e-14))
    return bad


def criterion_1() -> CriterionResult:
    x = np.linspace(0.0, 50.0, 2001)
    err_exp = float(np.max(np.abs(mittag_leffler(1.0, 1.0, -x) - np.exp(-x))))

    z = -np.linspace(4.0, 6.0, 41)
    overlap = 0.0
    for a in (0.3, 0.5, 0.7, 0.9):
        for b in (0.5, 0.75, 1.0, 1.5):
            overlap = max(overlap, float(np.max(np.abs(ml_series(a, b, z) - ml_integral(a, b, z)))))

    viol = sum(completely_monotone_violations(a) for a in (0.1, 0.3, 0.5, 0.7, 0.9))
    return CriterionResult(1, "special functions", (
        Check("max |E_11(-x) - exp(-x)|, x in [0,50]", err_exp, 1e-12),
        Check("series/integral overlap on |z| in [4,6]", overlap, 1e-10),
        Check("complete monotonicity violations, 6 decades", viol, 0, "=="),
    ))


# }}}


# {{{ 2 kernel identities


def derivative_identity_order(alpha: float, lam: float, t: float, h0: float) -> tuple[float, float]:
    """Observed order of the central difference of ``-E_{alpha,1}(-lam t^alpha)`` against ``lam * kernel``."""
    target = lam * ml_kernel(alpha, lam, t)

    def fd(h):
        up = mittag_leffler(alpha, 1.0, -lam * (t + h) ** alpha)
        dn = mittag_leffler(alpha, 1.0, -lam * (t - h) ** alpha)
        return -(up - dn) / (2.0 * h)

    e1 = abs(fd(h0) - target)
    e2 = abs(fd(0.5 * h0) - target)
    return math.log2(e1 / e2), e1


def graded_kernel_integral(alpha: float, lam: float, T: float, n_gl: int = 16) -> float:
    """``int_0^T lam t^(alpha-1) E_{alpha,alpha}(-lam t^alpha) dt`` on a graded mesh.

    With ``t = T u^(1/alpha)`` the integrand becomes ``(X/alpha) E_{alpha,alpha}(-X u)``,
    ``X = lam T^alpha``, which is smooth; its layer of width ``1/X`` at ``u = 0`` is
    resolved by dyadic panels.
    """
    X = lam * T**alpha
    levels = max(4, int(math.ceil(math.log2(max(X, 1.0)))) + 6)
    edges = np.concatenate([[0.0], 0.5 ** np.arange(levels, -1, -1)])
    xg, wg = np.polynomial.legendre.leggauss(n_gl)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = (0.5 * (hi - lo) * (xg + 1.0) + lo).ravel()
    w = (0.5 * (hi - lo) * wg).ravel()
    return float((X / alpha) * (w @ mittag_leffler(alpha, alpha, -X * u)))


def criterion_2() -> CriterionResult:
    orders = []
    for a in (0.3, 0.5, 0.8):
        for lam in (1.0, 10.0, 100.0):
            for t in (0.25, 0.5, 1.0):
                orders.append(derivative_identity_order(a, lam, t, t / 50.0)[0])
    int_err = 0.0
    for a in (0.3, 0.5, 0.8):
        for lam in (1.0, 10.0, 100.0):
            lhs = graded_kernel_integral(a, lam, 1.0)
            rhs = 1.0 - mittag_leffler(a, 1.0, -lam)
            int_err = max(int_err, abs(lhs - rhs))
    neg = 0
    t = np.geomspace(1e-4, 1e2, 10_000)
    for a in (0.1, 0.3, 0.5, 0.7, 0.9):
        for lam in (0.0, 1.0, 10.0, 100.0, 1e4):
            neg += int(np.count_nonzero(ml_kernel(a, lam, t) < 0.0))
    return CriterionResult(2, "kernel identities", (
        Check("min observed order, derivative identity", min(orders), 1.9, ">="),
        Check("max |graded integral - (1 - E_a1(-lam T^a))|", int_err, 1e-8),
        Check("kernel negativity count, 10^4-point grid", neg, 0, "=="),
    ))


# }}}


# {{{ 3 long-time asymptotics


def asymptotic_constants(alpha: float, t, rho) -> np.ndarray:
    """``C(t, rho) = rho^2 t^(2 alpha) |E_{alpha,1}(-rho t^alpha) - leading term|``."""
    tt, rr = np.meshgrid(np.asarray(t, dtype=float), np.asarray(rho, dtype=float), indexing="ij")
    x = rr * tt**alpha
    resid = np.abs(mittag_leffler(alpha, 1.0, -x) - ml_asymptotic_leading(alpha, rr, tt))
    return resid * x**2


def criterion_3() -> CriterionResult:
    rho = (1.0, 10.0, 100.0)
    coarse_t = np.array([10.0, 100.0, 1000.0, 10000.0])
    fine_t = np.geomspace(10.0, 1e4, 61)
    drift = 0.0
    bound_excess = 0.0
    spread = {}
    for a in (0.3, 0.5, 0.8):
        C_cal = float(asymptotic_constants(a, coarse_t, rho).max())
        C_fine = asymptotic_constants(a, fine_t, rho)
        drift = max(drift, abs(float(C_fine.max()) / C_cal - 1.0))
        bound_excess = max(bound_excess, float((C_fine / (1.2 * C_cal)).max()))
        spread[f"alpha={a}"] = float(C_fine.max() / C_fine.min())
    return CriterionResult(3, "long-time asymptotics", (
        Check("calibrated C drift coarse->fine grid", drift, 0.2),
        Check("max residual / bound with 1.2 * calibrated C", bound_excess, 1.0),
    ), {"pointwise max/min of C per alpha": spread})


# }}}


# {{{ 4 operator calculus


def semigroup_gap(v: GridFunction, pairs=((0.3, 0.4), (0.25, 0.5), (0.1, 0.8), (0.4, 0.3))) -> float:
    """Largest relative ``L^2`` gap between ``J_a J_c v`` (both orders) and ``J_{a+c} v``."""
    gap = 0.0
    for a, c in pairs:
        both = rl_forward(a + c, v)
        for x in (rl_forward(a, rl_forward(c, v)), rl_forward(c, rl_forward(a, v))):
            gap = max(gap, (x - both).l2_norm() / both.l2_norm())
    return gap


def criterion_4() -> CriterionResult:
    g401 = TemporalGrid(1.0, 401)
    t = g401.nodes
    draws = [_smooth_random(t, s) for s in range(6)]
    # inputs vanishing at t = 0, the class the Caputo derivative acts on
    semi = max(semigroup_gap(GridFunction(g401, w - w[0])) for w in draws)
    semi_offset = max(semigroup_gap(GridFunction(g401, w)) for w in draws)
    v = GridFunction(g401, draws[4] + 1.0)
    trip = 0.0
    for o in (0.3, 0.5, 0.8):
        back = caputo(o, rl_forward(o, v)).values
        trip = max(trip, float(np.abs(back - v.values).max()) / float(np.abs(v.values).max()))
    mono = 0.0
    for o in (0.3, 0.5, 0.8):
        for p in (0, 1):
            exact = gamma(p + 1.0) / gamma(p + 1.0 + o) * t ** (p + o)
            mono = max(mono, float(np.abs(rl_forward(o, GridFunction(g401, t**p)).values - exact).max()))
    one = GridFunction(g401, np.ones_like(t))
    caputo_const = max(
        float(np.abs(caputo(o, rl_forward(o, one)).values - 1.0).max()) for o in (0.3, 0.5, 0.8)
    )
    return CriterionResult(4, "operator calculus", (
        Check("semigroup, both orders, relative L2, v(0) = 0, 401 nodes", semi, 1e-5),
        Check("caputo(rl_forward(w)) round trip", trip, 1e-6),
        Check("rl_forward monomial error, p in {0,1}", mono, 1e-12),
        Check("caputo of J_o 1 is 1", caputo_const, 1e-4),
    ), {"semigroup gap for v(0) != 0 (first-cell t^c layer)": semi_offset})


# }}}


# {{{ 5 transform pipeline


def criterion_5() -> CriterionResult:
    spec, A, e = _reference_setup()
    grid = TemporalGrid(T_END, N_STEPS)
    f = reference_f(spec.nodes)
    params = FracParams(ALPHA, BETA)
    sol = solve_singular(e, f, TemporalSource(atoms=DeltaTrain(((0.5, 1.0),))), params, grid)
    causal = float(np.abs(sol.g.values[grid.nodes <= 0.5]).max())

    mu = GridFunction(grid, smooth_mu(grid.nodes))
    v1 = solve_singular(e, f, TemporalSource(regular=mu), params, grid).v.values
    v2 = solve_modal_convolution(e, f, rl_forward(BETA, mu), ALPHA, grid).values
    same = float(np.abs(v1 - v2).max())
    return CriterionResult(5, "transform pipeline", (
        Check("per-mode gap J_beta u vs v, delta at 0.5", sol.transform_gap, 1e-3),
        Check("g(t) for t <= 0.5", causal, 0.0, "=="),
        Check("L2 source: singular path vs modal path", same, 0.0, "=="),
    ))


# }}}


# {{{ 6 Duhamel routes


def criterion_6() -> CriterionResult:
    g401 = TemporalGrid(1.0, 401)
    t = g401.nodes
    g = GridFunction(g401, _smooth_random(t, 6) + 0.5)
    v = GridFunction(g401, t**2 + t * np.sin(3.0 * t))
    lhs = caputo(ALPHA, convolve(g, v)).values
    rhs = convolve(g, caputo(ALPHA, v)).values
    commute = float(np.abs(lhs - rhs)[1:].max()) / float(np.abs(rhs).max())

    spec, A, e = _reference_setup()
    f = reference_f(spec.nodes)
    # the gap is O(h^2); asserted on the same 401-node grid as the commutation check
    route_gap = {}
    for n in (101, 201, 401):
        gr = TemporalGrid(T_END, n)
        worst = 0.0
        for seed in range(6):
            w = _smooth_random(gr.nodes, seed)
            gn = GridFunction(gr, w - w[0])
            modal = solve_modal_convolution(e, f, gn, ALPHA, gr).values
            duh = solve_duhamel(e, f, caputo(1.0 - ALPHA, gn), ALPHA, gr).values
            worst = max(worst, _rel(duh, modal))
        route_gap[n] = worst
    routes = route_gap[401]

    src = lambda s: np.sin(2.0 * np.pi * s) * s + s**2  # noqa: E731
    errs, sizes = [], []
    for n in (101, 201, 401):
        gr = TemporalGrid(T_END, n)
        gn = GridFunction(gr, src(gr.nodes))
        m = solve_modal_convolution(e, f, gn, ALPHA, gr).values
        w = solve_duhamel(e, f, caputo(1.0 - ALPHA, gn), ALPHA, gr).values
        o = solve_timestep_oracle(A, f, gn, ALPHA, gr).values
        errs.append((_rel(m, o), _rel(w, o)))
        sizes.append(gr.h)
    limit = max(3.0 * sizes[0] ** ALPHA, 1e-3)
    worst = max(max(p) for p in errs)
    modal_err = [p[0] for p in errs]
    decreasing = float(all(b < a for a, b in zip(modal_err, modal_err[1:])))
    order = math.log2(modal_err[-2] / modal_err[-1])
    return CriterionResult(6, "Duhamel routes", (
        Check("caputo/convolution commutation, 401 nodes", commute, 1e-4),
        Check("modal(g) vs duhamel(caputo(1-a, g)), 401 nodes", routes, 1e-4),
        Check("both routes vs L1 oracle (relative L2)", worst, limit),
        Check("oracle gap decreases under halving", decreasing, 1.0, "=="),
        Check("observed convergence order", order, 0.5, ">="),
    ), {"oracle gaps [modal, duhamel] at 101/201/401 nodes": errs,
        "route gap at 101/201/401 nodes": [route_gap[n] for n in (101, 201, 401)]})


# }}}


# {{{ 7 recovering f


def criterion_7() -> CriterionResult:
    f_star = lambda x: np.sin(np.pi * x)  # noqa: E731
    g_fn = lambda s: s  # noqa: E731
    sig = {}
    for n_t, n_x in ((51, 49), (101, 99), (201, 199)):
        spec, _, e = _reference_setup(n_x)
        gr = TemporalGrid(T_END, n_t)
        obs = Subdomain.central(n_x, 0.25)
        rep = injectivity_report(build_forward_map_f(e, GridFunction(gr, g_fn(gr.nodes)), ALPHA, obs, gr))
        sig[f"{n_t}x{n_x}"] = {"sigma_min": rep.sigma_min, "sigma_max": rep.sigma_max, "rank": rep.rank}

    spec, A, e = _reference_setup()
    grid = TemporalGrid(T_END, N_STEPS)
    obs = Subdomain.central(N_INTERIOR, 0.25)
    fmap = build_forward_map_f(e, GridFunction(grid, g_fn(grid.nodes)), ALPHA, obs, grid)
    d = synthetic.subdomain_data(spec, f_star, g_fn, ALPHA, grid, obs, factor=2)
    fs = f_star(spec.nodes)
    est = recover_f(d, fmap, RegularizationSpec("ridge", 1e-12))
    err = _rel(est.values, fs)
    zero = recover_f(np.zeros_like(d), fmap, RegularizationSpec("ridge", 1e-12))
    sweep = {}
    for lam in (1e-12, 1e-10, 1e-9, 1e-8, 1e-6):
        sweep[f"{lam:g}"] = _rel(recover_f(d, fmap, RegularizationSpec("ridge", lam)).values, fs)
    crime = _rel(recover_f(fmap.apply(fs), fmap, RegularizationSpec("ridge", 1e-12)).values, fs)
    return CriterionResult(7, "inverse f from subdomain data", (
        Check("noiseless round trip, relative L2", err, 1e-3),
        Check("min sigma_min over 3 resolutions", min(v["sigma_min"] for v in sig.values()), 0.0, ">"),
        Check("zero data -> max |f|", float(np.abs(zero.values).max()), 0.0, "=="),
    ), {
        "singular values": sig,
        "error vs weight (oracle data)": sweep,
        "inverse-crime error at 1e-12": crime,
        "data mismatch oracle vs spectral": _rel(d, fmap.apply(fs)),
    })


# }}}


# {{{ 8 recovering mu


def criterion_8() -> CriterionResult:
    spec, A, e = _reference_setup()
    grid = TemporalGrid(T_END, N_STEPS)
    f = reference_f(spec.nodes)
    t = grid.nodes
    K = build_point_kernel(e, f, ALPHA, X0, grid)
    d = synthetic.point_data(spec, reference_f, smooth_mu, None, 0.0, ALPHA, grid, X0,
                             factor=2, refine_space=True)
    est = recover_mu_l2(d, K, RegularizationSpec("ridge-on-derivative", 1e-12))
    trim = t >= 2.0 * grid.h
    smooth_err = _rel(est.mu.values[trim], smooth_mu(t)[trim])

    Kb = build_point_kernel(e, f, ALPHA, X0, grid, order=BETA)
    train = DeltaTrain(ATOMS)
    dv = synthetic.point_data(spec, reference_f, None, train, BETA, ALPHA, grid, X0, factor=2)
    rec = recover_delta_train(dv, Kb, max_atoms=4, tol=1e-2)
    found = rec.train
    n_hat = found.count
    if n_hat == len(ATOMS):
        loc = float(np.abs(found.locations - train.locations).max())
        wt = float((np.abs(found.weights - train.weights) / np.abs(train.weights)).max())
    else:
        loc = wt = math.inf
    return CriterionResult(8, "inverse mu from point data", (
        Check("smooth mu, relative L2 on t >= 2h", smooth_err, 1e-2),
        Check("recovered atom count", n_hat, len(ATOMS), "=="),
        Check("max |a_hat - a|", loc, grid.h),
        Check("max relative weight error", wt, 1e-2),
    ), {"atoms": [{"a": a, "r": r} for a, r in found.atoms],
        "relative residual": rec.relative_residual,
        "refinement converged": rec.converged})


# }}}


# {{{ 9 long-time diagnostic


def criterion_9() -> CriterionResult:
    spec, A, e = _reference_setup()
    grid = TemporalGrid(T_END, N_STEPS)
    f = reference_f(spec.nodes)
    K = build_point_kernel(e, f, ALPHA, X0, grid)
    rep = asymptotic_diagnostic(K, e, f, ALPHA)
    Ainv_f = apply_inverse(e, f)
    return CriterionResult(9, "long-time diagnostic", (
        Check("fitted t^-alpha coefficient vs S/Gamma(1-a)", rep.relative_error, 0.05),
        Check("S = (A^-1 f)(x0)", rep.S, 0.0, ">"),
        Check("nonpositive entries of A^-1 f", int(np.count_nonzero(Ainv_f <= 0.0)), 0, "=="),
        Check("sign violations of the M-matrix inverse", inverse_sign_violations(A), 0, "=="),
        Check("M-matrix", float(is_m_matrix(A)), 1.0, "=="),
    ), {"S": rep.S, "fitted": rep.fitted, "predicted": rep.predicted, "horizon": rep.horizon})


# }}}


# {{{ 10 determinism


def criterion_10() -> CriterionResult:
    """Run a small CLI pipeline twice and compare every output file byte for byte."""
    from fracsrc.cli import main

    def run(root: Path) -> dict[str, bytes]:
        cfg = root / "cfg.json"
        cfg.write_text(
            '{"operator": {"L": 1, "n": 19}, "alpha": 0.5, "beta": 0.75,'
            ' "grid": {"T": 1, "n_steps": 21}, "source": {"atoms": [[0.5, 1]]},'
            ' "observation": {"type": "point", "index": 5},'
            f' "noise": 0.01, "seed": 7, "output_dir": "{(root / "out").as_posix()}"}}'
        )
        codes = [
            main(["ml", "--alpha", "0.5", "--beta", "1", "--xmax", "10", "--n", "11",
                  "--out", str(root / "out" / "ml.csv")]),
            main(["forward", "--config", str(cfg)]),
            main(["invert-mu", "--config", str(cfg)]),
        ]
        if any(codes):
            raise RuntimeError(f"CLI exit codes {codes}")
        return {p.name: p.read_bytes() for p in sorted((root / "out").iterdir())}

    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        ra, rb = run(Path(a)), run(Path(b))
    differing = sum(1 for k in ra if ra[k] != rb.get(k)) + len(set(ra) ^ set(rb))
    return CriterionResult(10, "determinism", (
        Check("files differing between two seeded runs", differing, 0, "=="),
        Check("files compared", len(ra), 1, ">="),
    ))


# }}}


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(numbers=None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if numbers is None else numbers
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [CRITERIA[k]() for k in numbers]


def report(results: list[CriterionResult]) -> dict:
    return {
        "criteria": [r.to_dict() for r in results],
        "passed": sum(r.passed for r in results),
        "total": len(results),
    }
