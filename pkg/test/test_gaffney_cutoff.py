import math

import numpy as np
import pytest

from cuspma.errors import PreconditionError
from cuspma.estimates import (GaffneyResult, chi, chi_prime, control_flux, cutoff_approximation,
                              cutoff_convergence, gaffney_control, gaffney_growth, gaffney_probe, grad_d_sup)
from cuspma.estimates.cutoff import grad_d_norm
from cuspma.estimates.gaffney import default_truncations
from cuspma.forcing import bump_forcing, make_forcing, zero_forcing
from cuspma.geometry import ModelGeometry
from cuspma.grid import TorusGrid
from cuspma.solver import SolutionField, SolverConfig

'''
Truncated divergence integrals, their model controls and the cutoff approximation.
'''


def test_probe_on_zero_field():
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 32)
    res = gaffney_probe(SolutionField.zeros(grid), 1., F=zero_forcing(2))
    assert res.S == default_truncations(grid)
    assert np.allclose(np.array(res.S) - g.s_min, [1.5, 3., 6.])
    assert all(f == 0. for f in res.flux)
    assert res.vanishing and res.verdict == 'pass'


def test_vanishing_rule():
    assert GaffneyResult(S=[1., 2., 3.], flux=[4., 1.9, -0.9]).vanishing
    assert not GaffneyResult(S=[1., 2.], flux=[4., 3.]).vanishing
    assert not GaffneyResult(S=[1., 2.], flux=[4., 3.]).verdict == 'pass'


def test_controls_match_closed_forms():
    for k, N in ((1, 64), (2, 128)):
        g = ModelGeometry(n=k, k=k)
        grid = TorusGrid(g, N)
        for which in ('grad_rho', 'grad_log_rho'):
            res = gaffney_control(grid, which)
            exact = [control_flux(which, S, g.s_min, k) for S in res.S]
            for a, b in zip(res.flux, exact):
                assert np.abs(a - b) < 1e-3 * np.abs(b)
        rho = gaffney_control(grid, 'grad_rho')
        if k == 2:
            assert all(b > a for a, b in zip(rho.flux[:-1], rho.flux[1:]))
    # a single cusp factor carries exactly 2 pi through every face
    one = gaffney_control(TorusGrid(ModelGeometry(n=1, k=1), 16), 'grad_rho')
    assert np.max(np.abs(np.array(one.flux) - 2. * math.pi)) < 1e-12
    with pytest.raises(NotImplementedError):
        gaffney_control(grid, 'grad_phi')
    with pytest.raises(NotImplementedError):
        control_flux('grad_phi', 10., 7., 2)


def test_integrable_control_decays_under_growth():
    g = ModelGeometry(n=2, k=2)
    S = [g.s_min + 12. * 2 ** i for i in range(3)]
    flux = [control_flux('grad_log_rho', s, g.s_min, 2) for s in S]
    assert flux[0] > flux[1] > flux[2]
    grows = [control_flux('grad_rho', s, g.s_min, 2) for s in S]
    assert grows[0] < grows[1] < grows[2]


def test_truncation_outside_box():
    g = ModelGeometry(n=1, k=1)
    grid = TorusGrid(g, 16)
    phi = SolutionField.zeros(grid)
    with pytest.raises(PreconditionError):
        gaffney_probe(phi, 1., F=zero_forcing(1), S=[g.s_max + 5.])
    with pytest.raises(PreconditionError):
        gaffney_probe(phi, 1., F=zero_forcing(1), S=[g.s_min])


def test_growth_flux_vanishes():
    g = ModelGeometry(n=1, k=1)
    F = make_forcing('balanced_bump', g)
    res = gaffney_growth(F, SolverConfig(epsilon=1., grid=64), g, p=1., levels=3)
    assert np.allclose(res.s_max, [g.s_min + 12., g.s_min + 24., g.s_min + 48.])
    assert all(f != 0. for f in res.flux)
    assert res.vanishing and res.verdict == 'pass'
    zero = gaffney_growth(zero_forcing(1), SolverConfig(grid=16), g, levels=2)
    assert zero.flux == [0., 0.] and zero.vanishing
    with pytest.raises(PreconditionError):
        gaffney_growth(make_forcing('rho_power', g), SolverConfig(grid=16), g)


def test_chi():
    t = np.linspace(0., 1., 11)
    assert np.all(chi(t) == 1.)
    assert np.all(chi(np.array([2., 2.5, 10.])) == 0.)
    mid = np.linspace(1., 2., 1001)
    assert np.all(np.diff(chi(mid)) <= 1e-15)
    assert np.max(np.abs(chi_prime(mid))) < 2.
    assert np.abs(chi(np.array([1.5]))[0] - 0.5) < 1e-15


def test_cutoff_approximation():
    g = ModelGeometry(n=2, k=2)
    F = bump_forcing(g)
    s1, s2 = np.meshgrid(np.linspace(g.s_min, g.s_max, 9), np.linspace(g.s_min, g.s_max, 9))
    # log rho <= 2 log s_max < 6 on the whole box
    F6 = cutoff_approximation(F, 6.)
    assert np.all(F6(s1, s2) == F(s1, s2))
    assert F6.support == F.support
    # log rho >= 2 log s_min > 2 on the whole box
    F1 = cutoff_approximation(F, 1.)
    assert np.all(F1(s1, s2) == 0.)
    with pytest.raises(PreconditionError):
        cutoff_approximation(F, 0.5)


def test_cutoff_convergence():
    g = ModelGeometry(n=2, k=2)
    F = make_forcing('rho_power', g)
    conv = cutoff_convergence(F, 6., g)
    assert conv.scales == [2. ** i for i in range(7)]
    assert conv.monotone
    assert np.abs(conv.remainders[0] - conv.total) < 1e-12 * conv.total
    assert conv.converged_at is not None and conv.converged_at <= 8.
    assert conv.verdict == 'pass'


def test_grad_d():
    for k in (1, 2):
        grid = TorusGrid(ModelGeometry(n=k, k=k), 64)
        assert np.abs(grad_d_sup(grid) - math.sqrt(2. * k)) < 1e-2 * math.sqrt(2. * k)
        assert np.max(np.abs(grad_d_norm(*grid.mesh) - math.sqrt(2. * k))) < 1e-15
