import numpy as np
import pytest

from cuspma.errors import InterpolationError, PositivityError, UnsupportedError
from cuspma.forcing import make_forcing, zero_forcing
from cuspma.geometry import ModelGeometry
from cuspma.grid import TorusGrid, laplacian
from cuspma.solver import (BumpSolution, SolutionField, Sine4Solution, jacobian, manufactured_forcing,
                           positivity_check, reduce_ma_operator)

'''
The reduced operator, its exact Jacobian and the positivity check.
'''


def _scaled_residual(phi, F, eps):
    return reduce_ma_operator(phi, F, eps, scaled=True).values


def test_zero_forcing_has_zero_residual():
    for k in (1, 2):
        grid = TorusGrid(ModelGeometry(n=k, k=k), 16)
        res = reduce_ma_operator(SolutionField.zeros(grid), zero_forcing(k), 0.5, scaled=True)
        assert res.sup < 1e-13
        assert not res.flagged


def test_manufactured_forcing_on_grid():
    # a grid-built forcing makes phi* an exact discrete solution
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 16)
    phi = Sine4Solution(g, 1e-2).on_grid(grid, eps=0.25)
    F = manufactured_forcing(phi, 0.25)
    assert np.abs(_scaled_residual(phi, F, 0.25)).max() < 1e-12


def test_manufactured_closed_form_consistency():
    g = ModelGeometry(n=1, k=1)
    grid = TorusGrid(g, 256)
    star = Sine4Solution(g, 1e-2)
    F = manufactured_forcing(star, 0.5, grid)
    res = reduce_ma_operator(star.on_grid(grid, 0.5), F, 0.5, scaled=True)
    # only the second-order truncation error of the discrete Hessian remains
    assert res.sup < 1e-3
    coarse = TorusGrid(g, 128)
    res_coarse = reduce_ma_operator(star.on_grid(coarse, 0.5), F, 0.5, scaled=True)
    assert 3. < res_coarse.sup / res.sup < 5.


def test_jacobian_matches_finite_differences():
    for k in (1, 2):
        g = ModelGeometry(n=k, k=k)
        grid = TorusGrid(g, 8)
        phi = Sine4Solution(g, 1e-2).on_grid(grid)
        F = make_forcing('sine4', g)
        eps = 0.7
        J = jacobian(phi, F, eps).toarray()
        inner = (slice(1, -1),) * k
        base = _scaled_residual(phi, F, eps)[inner].ravel()
        fd = np.zeros_like(J)
        h = 1e-6
        idx = np.argwhere(grid.interior)
        for col, node in enumerate(idx):
            up = phi.copy()
            dn = phi.copy()
            up.values[tuple(node)] += h
            dn.values[tuple(node)] -= h
            fd[:, col] = (_scaled_residual(up, F, eps)[inner].ravel()
                          - _scaled_residual(dn, F, eps)[inner].ravel()) / (2. * h)
        assert base.shape[0] == J.shape[0]
        assert np.max(np.abs(J - fd)) < 1e-6 * np.max(np.abs(J))
    print('Passed!')


def test_positivity_check():
    g = ModelGeometry(n=1, k=1)
    grid = TorusGrid(g, 32)
    assert positivity_check(SolutionField.zeros(grid)).positive
    # a bump of height 5 is concave enough at its centre to overwhelm s^{-2}
    phi = BumpSolution((g.s_min + 6.,), 2., 5.).on_grid(grid)
    verdict = positivity_check(phi)
    assert not verdict.positive
    assert verdict.min_eigenvalue < 0.
    assert g.s_min < verdict.location[0] < g.s_max
    assert reduce_ma_operator(phi, zero_forcing(1), 1.).flagged
    with pytest.raises(PositivityError):
        manufactured_forcing(BumpSolution((g.s_min + 6.,), 2., 5.), 1., grid)


def test_solution_field_derivatives():
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 32)
    phi = SolutionField.from_function(grid, lambda s1, s2: 1e-3 * s1 * s2)
    # D^2 of s1 s2 is exactly the off-diagonal identity, so Delta phi = 0
    assert np.max(np.abs(phi.laplacian)) < 1e-12
    assert np.max(np.abs(phi.trace - 2.)) < 1e-12
    assert np.max(np.abs(phi.hessian[..., 0, 1] - 1e-3)) < 1e-12
    assert np.max(np.abs(laplacian(grid.mesh[0] ** 2, grid) - 2. * grid.mesh[0] ** 2)) < 1e-7


def test_interpolant():
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 32)
    phi = SolutionField.from_function(grid, lambda s1, s2: s1 ** 2 + s1 * s2)
    interp = phi.interpolant()
    assert np.abs(interp(10., 11.) - 210.) < 1e-9
    H = interp.hessian(np.array([10.]), np.array([11.]))
    assert np.max(np.abs(H[0] - np.array([[2., 1.], [1., 0.]]))) < 1e-8
    with pytest.raises(InterpolationError):
        interp(1., 11.)


def test_unsupported_dimension():
    grid = TorusGrid(ModelGeometry(n=3, k=3), 8)
    with pytest.raises(UnsupportedError):
        reduce_ma_operator(SolutionField.zeros(grid), None, 1.)
