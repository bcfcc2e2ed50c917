import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erfcx

from fracsrc.errors import DomainError, GridMismatchError, NumericalFailure
from fracsrc.forward_solver import (
    SpaceTimeField,
    atom_modal_response,
    convolution_weights,
    modal_convolve,
    pde_residual,
    solve_duhamel,
    solve_homogeneous,
    solve_modal_convolution,
    solve_singular,
    solve_timestep_oracle,
    transform_check,
)
from fracsrc.fractional_calculus import (
    DeltaTrain,
    FracParams,
    GridFunction,
    TemporalGrid,
    TemporalSource,
    caputo,
    convolve,
    rl_forward,
)
from fracsrc.mittag_leffler import mittag_leffler, ml_kernel
from fracsrc.spectral_operator import OperatorSpec, assemble, eigendecompose, project


def setup(n=39, **kw):
    spec = OperatorSpec(1.0, n, **kw)
    A = assemble(spec)
    return spec, A, eigendecompose(A)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def ref():
    return setup()


# homogeneous problem


def test_homogeneous_initial_value(ref):
    spec, _, e = ref
    grid = TemporalGrid(1.0, 11)
    f = np.sin(np.pi * spec.nodes) + spec.nodes
    z = solve_homogeneous(e, f, 0.5, grid)
    np.testing.assert_allclose(z.values[0], f, atol=1e-13)
    assert z.meta["tail"] <= 1e-12


def test_homogeneous_heat_limit(ref):
    spec, _, e = ref
    grid = TemporalGrid(0.5, 21)
    f = spec.nodes * (1 - spec.nodes)
    z = solve_homogeneous(e, f, 1.0, grid)
    c = project(e, f)
    exact = np.exp(-np.outer(grid.nodes, e.lambdas)) * c @ e.modes.T
    assert np.abs(z.values - exact).max() <= 1e-10


def test_homogeneous_single_mode(ref):
    _, _, e = ref
    grid = TemporalGrid(2.0, 9)
    z = solve_homogeneous(e, e.modes[:, 0], 0.5, grid)
    norms = np.sqrt(e.h * np.sum(z.values**2, axis=1))
    # E_{1/2,1}(-x) = erfcx(x), an independent closed form
    np.testing.assert_allclose(norms, erfcx(e.lambdas[0] * np.sqrt(grid.nodes)), rtol=1e-12)


def test_truncation_tail_reported():
    spec, _, _ = setup()
    e = eigendecompose(assemble(spec), n_modes=5)
    f = spec.nodes**2
    z = solve_homogeneous(e, f, 0.5, TemporalGrid(1.0, 4))
    c = project(e, f)
    assert z.meta["tail"] == pytest.approx(e.h * f @ f - c @ c, rel=1e-12)
    assert z.meta["tail"] > 0


@given(st.floats(0.1, 0.99))
def test_decay_bound(alpha):
    spec, _, e = setup(25)
    f = 1.0 + spec.nodes * (1 - spec.nodes)
    grid = TemporalGrid(3.0, 31)
    z = solve_homogeneous(e, f, alpha, grid)
    norms = np.sqrt(e.h * np.sum(z.values**2, axis=1))
    bound = mittag_leffler(alpha, 1.0, -e.lambdas[0] * grid.nodes**alpha) * math.sqrt(e.h * f @ f)
    assert np.all(norms <= bound * (1 + 1e-12))
    single = solve_homogeneous(e, e.modes[:, 0], alpha, grid).values[:, 5]
    assert np.all(np.diff(single) <= 0)


# convolution routes


def test_zero_source_gives_zero(ref):
    spec, A, e = ref
    grid = TemporalGrid(1.0, 21)
    zero = GridFunction(grid, np.zeros(21))
    f = np.ones(spec.n_interior)
    assert not np.any(solve_duhamel(e, f, zero, 0.5, grid).values)
    assert not np.any(solve_modal_convolution(e, f, zero, 0.5, grid).values)
    assert not np.any(solve_timestep_oracle(A, f, zero, 0.5, grid).values)


def test_duhamel_heat_single_mode(ref):
    _, _, e = ref
    grid = TemporalGrid(1.0, 51)
    w = solve_duhamel(e, e.modes[:, 0], GridFunction(grid, np.ones(51)), 1.0, grid)
    coef = e.h * w.values @ e.modes[:, 0]
    lam = e.lambdas[0]
    np.testing.assert_allclose(coef, (1 - np.exp(-lam * grid.nodes)) / lam, rtol=1e-12, atol=1e-15)


def test_zero_eigenvalue_mode_is_rl_integral():
    grid = TemporalGrid(1.0, 81)
    g = np.cos(4 * grid.nodes) + grid.nodes
    w, end = convolution_weights(0.4, 0.4, [0.0], grid)
    out = modal_convolve(w, end, g)[0]
    np.testing.assert_allclose(out, rl_forward(0.4, GridFunction(grid, g)).values, rtol=1e-12, atol=1e-14)


def test_steady_forcing_single_mode(ref):
    _, _, e = ref
    grid = TemporalGrid(1.0, 41)
    v = solve_modal_convolution(e, e.modes[:, 2], GridFunction(grid, np.ones(41)), 0.5, grid)
    coef = e.h * v.values @ e.modes[:, 2]
    lam = e.lambdas[2]
    exact = (1 - mittag_leffler(0.5, 1.0, -lam * grid.nodes**0.5)) / lam
    np.testing.assert_allclose(coef, exact, rtol=1e-12, atol=1e-15)


def test_routes_agree(ref):
    spec, _, e = ref
    grid = TemporalGrid(1.0, 401)
    t = grid.nodes
    g = GridFunction(grid, np.sin(3 * t) + t**2)  # vanishes at 0
    f = np.sin(np.pi * spec.nodes) + spec.nodes * (1 - spec.nodes)
    modal = solve_modal_convolution(e, f, g, 0.5, grid)
    duh = solve_duhamel(e, f, caputo(0.5, g), 0.5, grid)
    assert rel(duh.values, modal.values) <= 1e-4


def test_commutation():
    grid = TemporalGrid(1.0, 401)
    t = grid.nodes
    g = GridFunction(grid, np.exp(-t) * np.cos(2 * t))
    v = GridFunction(grid, np.sin(2 * t) + t**2)
    lhs = caputo(0.5, convolve(g, v)).values
    rhs = convolve(g, caputo(0.5, v)).values
    assert rel(lhs, rhs) <= 1e-4


def test_oracle_agreement_and_residuals():
    spec, A, e = setup(49)
    f = np.sin(np.pi * spec.nodes) + spec.nodes * (1 - spec.nodes)
    gaps = []
    for n in (51, 101, 201):
        grid = TemporalGrid(1.0, n)
        g = GridFunction(grid, 1.0 + np.sin(2 * np.pi * grid.nodes))
        modal = solve_modal_convolution(e, f, g, 0.5, grid)
        oracle = solve_timestep_oracle(A, f, g, 0.5, grid)
        gaps.append(rel(oracle.values, modal.values))
        assert gaps[-1] <= max(3 * grid.h**0.5, 1e-3)
        assert pde_residual(oracle, A, f, g, 0.5) <= 1e-13
    assert gaps[0] > gaps[1] > gaps[2]


def test_residual_of_modal_solution_at_fine_resolution():
    spec, A, e = setup(199)
    grid = TemporalGrid(1.0, 801)
    f = np.sin(np.pi * spec.nodes) + spec.nodes * (1 - spec.nodes)
    g = GridFunction(grid, 1.0 + np.sin(2 * np.pi * grid.nodes))
    v = solve_modal_convolution(e, f, g, 0.5, grid)
    assert pde_residual(v, A, f, g, 0.5) <= 1e-2


def test_residual_of_zero_field(ref):
    spec, A, _ = ref
    grid = TemporalGrid(1.0, 11)
    zero = SpaceTimeField(grid, spec.nodes, np.zeros((11, spec.n_interior)), 1.0)
    g = GridFunction(grid, np.ones(11))
    assert pde_residual(zero, A, np.ones(spec.n_interior), g, 0.5) == pytest.approx(1.0)


def test_backward_euler_limit(ref):
    _, A, e = ref
    lam = e.lambdas[0]
    errs = []
    for n in (41, 81):
        grid = TemporalGrid(1.0, n)
        v = solve_timestep_oracle(A, e.modes[:, 0], GridFunction(grid, np.ones(n)), 1.0, grid)
        coef = e.h * v.values @ e.modes[:, 0]
        # backward Euler for c' + lam c = 1 exactly
        be = np.zeros(n)
        for i in range(1, n):
            be[i] = (be[i - 1] + grid.h) / (1 + lam * grid.h)
        np.testing.assert_allclose(coef, be, rtol=1e-10, atol=1e-14)
        errs.append(np.abs(coef - (1 - np.exp(-lam * grid.nodes)) / lam).max())
    assert 1.8 < errs[0] / errs[1] < 2.2


def test_oracle_accepts_drift():
    spec = OperatorSpec(1.0, 19, 1.0, 0.0, 2.0)
    A = assemble(spec, drift=True)
    grid = TemporalGrid(1.0, 21)
    v = solve_timestep_oracle(A, np.ones(19), GridFunction(grid, np.ones(21)), 0.5, grid)
    assert np.all(np.isfinite(v.values)) and v.meta["condition"] >= 1.0


@given(st.integers(0, 1000), st.floats(-3, 3))
def test_linearity(seed, c):
    spec, A, e = setup(15)
    grid = TemporalGrid(1.0, 21)
    rng = np.random.default_rng(seed)
    f1, f2 = rng.normal(size=(2, 15))
    g = GridFunction(grid, rng.normal(size=21))
    for solve in (solve_modal_convolution, solve_duhamel):
        lhs = solve(e, f1 + c * f2, g, 0.6, grid).values
        rhs = solve(e, f1, g, 0.6, grid).values + c * solve(e, f2, g, 0.6, grid).values
        assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(lhs).max())
    lhs = solve_timestep_oracle(A, f1, g * (1 + c), 0.6, grid).values
    rhs = (1 + c) * solve_timestep_oracle(A, f1, g, 0.6, grid).values
    assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(lhs).max())


def test_grid_mismatch(ref):
    spec, A, e = ref
    g = GridFunction(TemporalGrid(1.0, 11), np.ones(11))
    with pytest.raises(GridMismatchError):
        solve_modal_convolution(e, np.ones(spec.n_interior), g, 0.5, TemporalGrid(1.0, 12))
    with pytest.raises(DomainError):
        solve_homogeneous(e, np.ones(spec.n_interior), 1.5, TemporalGrid(1.0, 4))


# singular sources


def test_single_atom_u(ref):
    _, _, e = ref
    grid = TemporalGrid(1.0, 101)
    t = grid.nodes
    mu = TemporalSource(atoms=DeltaTrain(((0.5, 1.0),)))
    sol = solve_singular(e, e.modes[:, 0], mu, FracParams(0.5, 0.75), grid)
    coef = e.h * sol.u.values @ e.modes[:, 0]
    after = t > 0.5
    assert np.all(coef[~after] == 0.0)
    np.testing.assert_allclose(coef[after], ml_kernel(0.5, e.lambdas[0], t[after] - 0.5), rtol=1e-12)
    assert sol.transform_gap <= 1e-3
    assert np.all(sol.g.values[t <= 0.5] == 0.0)


def test_atom_as_limit_of_narrow_bumps(ref):
    """A unit-mass bump of width w drives the same response as the atom once w -> 0."""
    _, _, e = ref
    lam = e.lambdas[0]
    t_eval = 0.8
    ref_val = ml_kernel(0.5, lam, t_eval - 0.5)
    gaps = []
    for width in (0.04, 0.02, 0.01):
        grid = TemporalGrid(1.0, 4001)
        t = grid.nodes
        bump = np.where(np.abs(t - 0.5) < width / 2, 1.0, 0.0)
        bump /= np.trapezoid(bump, t)  # unit mass for the piecewise-linear interpolant
        w, end = convolution_weights(0.5, 0.5, [lam], grid)
        out = modal_convolve(w, end, bump)[0]
        gaps.append(abs(out[np.searchsorted(t, t_eval)] - ref_val) / ref_val)
    assert gaps[-1] < 1e-3
    assert gaps[0] > gaps[1] > gaps[2]


def test_l2_source_same_path(ref):
    spec, _, e = ref
    grid = TemporalGrid(1.0, 41)
    mu = GridFunction(grid, np.cos(grid.nodes))
    f = spec.nodes * (1 - spec.nodes)
    sol = solve_singular(e, f, TemporalSource(regular=mu), FracParams(0.5, 0.75), grid)
    direct = solve_modal_convolution(e, f, rl_forward(0.75, mu), 0.5, grid)
    assert np.array_equal(sol.v.values, direct.values)
    assert sol.u is None


def test_two_atoms_superpose(ref):
    spec, _, e = ref
    grid = TemporalGrid(1.0, 101)
    f = np.sin(np.pi * spec.nodes)
    p = FracParams(0.5, 0.75)
    both = solve_singular(e, f, TemporalSource(atoms=DeltaTrain(((0.25, 2.0), (0.75, 3.0)))), p, grid)
    one = solve_singular(e, f, TemporalSource(atoms=DeltaTrain(((0.25, 1.0),))), p, grid)
    two = solve_singular(e, f, TemporalSource(atoms=DeltaTrain(((0.75, 1.0),))), p, grid)
    np.testing.assert_allclose(both.u.values, 2 * one.u.values + 3 * two.u.values, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(both.v.values, 2 * one.v.values + 3 * two.v.values, rtol=1e-13, atol=1e-13)


def test_transform_check_per_mode(ref):
    _, _, e = ref
    t = TemporalGrid(1.0, 101).nodes
    gap = transform_check(0.5, 0.75, e.lambdas, DeltaTrain(((0.5, 1.0),)), t)
    assert gap <= 1e-3


def test_chain_violation(ref):
    spec, _, e = ref
    grid = TemporalGrid(1.0, 11)
    mu = TemporalSource(atoms=DeltaTrain(((0.5, 1.0),)))
    with pytest.raises(DomainError, match="alpha <= beta"):
        solve_singular(e, np.ones(spec.n_interior), mu, FracParams(0.8, 0.75), grid)


def test_atom_response_shapes():
    out = atom_modal_response(0.5, 0.5, [1.0, 2.0], DeltaTrain(((0.35, 1.0),)), np.linspace(0, 1, 11))
    assert out.shape == (2, 11)
    assert np.all(out[:, :4] == 0.0) and np.all(out[:, 4:] > 0.0)


# serialization


def test_field_binary_round_trip(ref):
    spec, _, e = ref
    grid = TemporalGrid(2.0, 7)
    z = solve_homogeneous(e, spec.nodes, 0.5, grid)
    data = z.to_bytes()
    magic, version, n_steps, n_x, T, L = struct.unpack_from("<4sIIIdd", data)
    assert (magic, version, n_steps, n_x, T, L) == (b"FSTF", 1, 7, spec.n_interior, 2.0, 1.0)
    assert len(data) == 32 + 8 * 7 * spec.n_interior
    back = SpaceTimeField.from_bytes(data)
    assert np.array_equal(back.values, z.values)
    with pytest.raises(DomainError):
        SpaceTimeField.from_bytes(b"XXXX" + data[4:])


def test_field_csv(ref):
    spec, _, e = ref
    z = solve_homogeneous(e, spec.nodes, 0.5, TemporalGrid(1.0, 3))
    lines = z.to_csv().splitlines()
    assert lines[0] == "t,x,value"
    assert len(lines) == 1 + 3 * spec.n_interior
    t, x, v = map(float, lines[1].split(","))
    assert (t, x, v) == (0.0, spec.nodes[0], z.values[0, 0])


def test_non_finite_field_rejected():
    with pytest.raises(NumericalFailure):
        SpaceTimeField(TemporalGrid(1.0, 2), np.array([0.5]), np.array([[0.0], [np.inf]]), 1.0)
