"""Fast invariant checks behind ``fracsrc selftest``.

Each check draws seeded random inputs and returns ``(name, ok, detail)``.
The full property-based suites live in the test directory.
"""

from __future__ import annotations

import numpy as np

from fracsrc.forward_solver import solve_modal_convolution, solve_timestep_oracle
from fracsrc.fractional_calculus import GridFunction, TemporalGrid, reflect, rl_backward, rl_forward
from fracsrc.mittag_leffler import mittag_leffler, ml_kernel
from fracsrc.spectral_operator import OperatorSpec, assemble, eigendecompose, inverse_sign_violations


def _check_reflection(rng):
    g = TemporalGrid(1.0, 64)
    v = GridFunction(g, rng.normal(size=64))
    o = float(rng.uniform(0.05, 0.95))
    same = np.array_equal(rl_backward(o, v).values, reflect(rl_forward(o, reflect(v))).values)
    inv = np.array_equal(reflect(reflect(v)).values, v.values)
    return "reflection conjugation and involution", same and inv, f"order={o:.3f}"


def _check_positivity(rng):
    g = TemporalGrid(1.0, 80)
    v = GridFunction(g, np.abs(rng.normal(size=80)))
    o = float(rng.uniform(0.05, 0.95))
    m = float(rl_forward(o, v).values.min())
    return "J_o keeps nonnegative inputs nonnegative", m >= 0.0, f"min={m:.3e}"


def _check_monotone(rng):
    a = float(rng.uniform(0.1, 0.95))
    x = np.geomspace(1e-6, 1e6, 400)
    y = mittag_leffler(a, 1.0, -x)
    ok = bool(np.all(y >= 0) and np.all(np.diff(y) <= 1e-15))
    return "E_{a,1}(-x) nonnegative and nonincreasing", ok, f"alpha={a:.3f}"


def _check_kernel(rng):
    a = float(rng.uniform(0.1, 0.95))
    lam = float(10 ** rng.uniform(-2, 4))
    k = ml_kernel(a, lam, np.geomspace(1e-4, 1e2, 500))
    return "relaxation kernel nonnegative", bool(np.all(k >= 0)), f"alpha={a:.3f} lambda={lam:.3g}"


def _check_m_matrix(rng):
    spec = OperatorSpec(1.0, 40, 1.0 + rng.uniform(0, 1, size=41), np.abs(rng.normal(size=40)))
    bad = inverse_sign_violations(assemble(spec))
    return "stiffness inverse is nonnegative", bad == 0, f"violations={bad}"


def _check_linearity(rng):
    spec = OperatorSpec(1.0, 15)
    A = assemble(spec)
    e = eigendecompose(A)
    g = TemporalGrid(1.0, 21)
    f1, f2 = rng.normal(size=15), rng.normal(size=15)
    s = GridFunction(g, g.nodes * rng.uniform(0.5, 2.0))
    c = float(rng.normal())
    lhs = solve_modal_convolution(e, f1 + c * f2, s, 0.5, g).values
    rhs = solve_modal_convolution(e, f1, s, 0.5, g).values + c * solve_modal_convolution(e, f2, s, 0.5, g).values
    err = float(np.abs(lhs - rhs).max() / max(np.abs(lhs).max(), 1e-300))
    o = solve_timestep_oracle(A, f1, s, 0.5, g).values
    gap = float(np.linalg.norm(o - solve_modal_convolution(e, f1, s, 0.5, g).values) / np.linalg.norm(o))
    return "forward solver linear and close to the L1 oracle", err < 1e-12 and gap < 3 * g.h**0.5, (
        f"linearity={err:.1e} oracle gap={gap:.1e}"
    )


CHECKS = (_check_reflection, _check_positivity, _check_monotone, _check_kernel, _check_m_matrix, _check_linearity)


def run_selftest(seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in CHECKS]
