import numpy as np
import pytest

from kirchhoff_lab import NoConvergenceError, build_grid, cg_solve, principal_eigenpair, solve_poisson_unit
from kirchhoff_lab.grid import neg_laplacian_values
from kirchhoff_lab.linalg import diagonal_operator, identity_operator, neg_laplacian_operator

from conftest import discrete_lambda1, torsion_center_series


def test_cg_identity(rng):
    g = build_grid(1, 1.0, 20)
    rhs = g.field(rng.normal(size=g.shape))
    np.testing.assert_allclose(cg_solve(identity_operator(g), rhs, 1e-12).values, rhs.values)


def test_cg_torsion_1d(line199):
    A = neg_laplacian_operator(line199)
    e = cg_solve(A, line199.field(np.ones(line199.shape)), 1e-12)
    exact = line199.sample(lambda x: x * (1 - x) / 2).values
    assert np.max(np.abs(e.values - exact)) <= 1e-4


def test_cg_residual_contract_on_diagonal(rng):
    g = build_grid(2, [1, 1], [10, 10])
    d = rng.uniform(0.5, 50.0, g.shape)
    rhs = rng.normal(size=g.shape)
    u = cg_solve(diagonal_operator(g, d), g.field(rhs), 1e-12)
    assert np.linalg.norm(d * u.values - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_cg_iteration_cap(line199):
    with pytest.raises(NoConvergenceError) as info:
        cg_solve(neg_laplacian_operator(line199), line199.field(np.ones(line199.shape)), 1e-12, max_iter=3)
    assert info.value.residual > 1e-12


def test_cg_zero_rhs():
    g = build_grid(1, 1.0, 5)
    assert np.all(cg_solve(neg_laplacian_operator(g), g.zeros()).values == 0)


def test_eigenpair_interval(line199):
    eig = principal_eigenpair(line199, 1e-8)
    assert abs(eig.lambda1 - np.pi**2) <= 1e-2
    assert eig.lambda1 == pytest.approx(discrete_lambda1(line199), rel=1e-9)
    x = line199.axis_coords(0)
    assert np.max(np.abs(eig.phi1.values - np.sin(np.pi * x))) <= 1e-3
    assert np.min(eig.phi1.values) > 0 and np.max(eig.phi1.values) == 1.0


def test_eigenpair_square(square63):
    eig = principal_eigenpair(square63, 1e-8)
    assert abs(eig.lambda1 - 2 * np.pi**2) <= 5e-2
    assert eig.lambda1 == pytest.approx(discrete_lambda1(square63), rel=1e-9)
    resid = np.max(np.abs(neg_laplacian_values(eig.phi1) - eig.lambda1 * eig.phi1.values))
    assert resid <= 1e-8 * eig.lambda1


@pytest.mark.parametrize("grid", [build_grid(1, 2.0, 15), build_grid(2, [1.0, 3.0], [7, 11])])
def test_eigen_normalisation(grid):
    eig = principal_eigenpair(grid)
    assert np.max(eig.phi1.values) == 1.0
    assert np.min(eig.phi1.values) > 0


def test_eigenvalue_domain_monotonicity():
    small = principal_eigenpair(build_grid(2, [1.0, 1.0], [31, 31])).lambda1
    large = principal_eigenpair(build_grid(2, [1.5, 1.2], [31, 31])).lambda1
    assert large < small


def test_poisson_interval(line199):
    e = solve_poisson_unit(line199)
    assert e.values[99] == pytest.approx(0.125, abs=1e-4)
    assert np.min(e.values) > 0


def test_poisson_square(square63):
    e = solve_poisson_unit(square63)
    assert e.values[31, 31] == pytest.approx(torsion_center_series(), abs=1e-3)
    assert torsion_center_series() == pytest.approx(0.0737, abs=1e-4)
    assert np.min(e.values) > 0
