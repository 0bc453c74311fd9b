import numpy as np
import pytest

from cuspma.errors import PreconditionError, UnsupportedError
from cuspma.estimates import (MeasureSpec, I_functional, auxiliary_fields, differential_inequality_check,
                              moser_trace, norm_report, truncation_audit, w3_surrogate)
from cuspma.estimates.report import COLUMNS
from cuspma.forcing import bump_forcing, make_forcing, rho_power_forcing, zero_forcing
from cuspma.geometry import ModelGeometry
from cuspma.grid import TorusGrid
from cuspma.solver import SolutionField, SolverConfig, epsilon_continuation, newton_solve


def test_measure_spec():
    with pytest.raises(PreconditionError):
        MeasureSpec('dlambda')
    with pytest.raises(PreconditionError):
        MeasureSpec('weighted')
    with pytest.raises(UnsupportedError):
        MeasureSpec('dnu').exponent(1)
    assert np.abs(MeasureSpec('dmu').exponent(2) + 1. / 3.) < 1e-15
    assert MeasureSpec('dnu').exponent(2) == -1.
    assert not MeasureSpec('weighted', 1.).finite(2)
    assert str(MeasureSpec('weighted', 0.5)) == 'weighted(0.5)'


def test_moser_trace():
    g = ModelGeometry(n=1, k=1)
    grid = TorusGrid(g, 64)
    ones = SolutionField.from_function(grid, lambda s: np.ones_like(s))
    ladder = moser_trace(ones, MeasureSpec('dmu'))
    assert ladder.nondecreasing
    assert np.abs(ladder.gap) < 1e-12
    ramp = SolutionField.from_function(grid, lambda s: s / g.s_max)
    ladder = moser_trace(ramp, MeasureSpec('dmu'))
    assert ladder.nondecreasing
    assert ladder.norms[0] < ladder.norms[-1] <= ladder.sup
    assert 0. < ladder.gap < 0.05
    empty = moser_trace(SolutionField.zeros(grid), MeasureSpec('dV'))
    assert empty.sup == 0. and empty.gap == 0.
    with pytest.raises(PreconditionError):
        moser_trace(ones, MeasureSpec('weighted', 1.))
    with pytest.raises(UnsupportedError):
        moser_trace(ones, MeasureSpec('dnu'))


def test_I_functional_compact_forcing():
    g = ModelGeometry(n=2, k=2)
    F = bump_forcing(g)
    res = I_functional(F, 6., g)
    assert np.isfinite(res.value) and res.value > 0.
    assert not res.diverged
    assert res.tail_bound == 0.
    # homogeneous of degree p0 in F
    doubled = I_functional(F.scaled(2.), 6., g)
    assert np.abs(doubled.value / res.value - 64.) < 1e-9
    assert I_functional(zero_forcing(2), 6., g).value == 0.


def test_I_functional_doubling_flag():
    g = ModelGeometry(n=2, k=2)
    F = rho_power_forcing(g, exponent=-0.25)
    with pytest.warns(UserWarning):
        res = I_functional(F, 6., g)
    assert res.diverged
    assert len(res.values) == 3
    assert res.values[0] < res.values[1] < res.values[2]
    quiet = I_functional(F, 6., g, warn=False)
    assert quiet.diverged


def test_I_functional_preconditions():
    with pytest.raises(UnsupportedError):
        I_functional(zero_forcing(1), 6., ModelGeometry(n=1, k=1))
    with pytest.raises(PreconditionError):
        I_functional(zero_forcing(2), 4., ModelGeometry(n=2, k=2))


def test_auxiliary_constants_at_zero():
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 16)
    aux = auxiliary_fields(SolutionField.zeros(grid, 1.), zero_forcing(2))
    assert np.max(np.abs(aux.u)) == 0.
    assert np.max(np.abs(aux.trace - 2.)) < 1e-12
    assert aux.C0 == 1. and aux.A5 == 1.
    assert np.abs(aux.theta - 0.5) < 1e-15
    assert np.abs(aux.C0_lap - 8.) < 1e-12
    # max_w (3 w - w^2 / 2) at w = 3
    assert np.abs(aux.C_theta - 4.5) < 1e-12
    assert np.abs(aux.C1 - 2.) < 1e-12


def test_inequalities_at_zero():
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 16)
    phi = SolutionField.zeros(grid, 1.)
    F = zero_forcing(2)
    trace = differential_inequality_check(phi, F, 'trace')
    assert trace.count == 0
    assert np.abs(trace.min_slack) < 1e-12
    lap = differential_inequality_check(phi, F, 'lap')
    assert lap.count == 0
    assert np.abs(lap.min_slack - 10.5) < 1e-9
    grad = differential_inequality_check(phi, F, 'grad')
    assert grad.count == 0 and grad.verdict == 'pass'
    assert np.abs(grad.min_slack - 2.) < 1e-9
    with pytest.raises(NotImplementedError):
        differential_inequality_check(phi, F, 'bogus')


def test_inequalities_need_two_dimensions():
    grid = TorusGrid(ModelGeometry(n=1, k=1), 16)
    phi = SolutionField.zeros(grid)
    for which in ('lap', 'trace'):
        with pytest.raises(UnsupportedError):
            differential_inequality_check(phi, zero_forcing(1), which)
    assert differential_inequality_check(phi, zero_forcing(1), 'grad').count == 0


def test_trace_inequality_on_a_solution():
    # for n = 2 the trace inequality is an identity up to the Newton residual
    g = ModelGeometry(n=2, k=2)
    F = make_forcing('balanced_bump', g)
    phi = newton_solve(F, SolverConfig(epsilon=0.5, grid=16), g)
    chk = differential_inequality_check(phi, F, 'trace')
    assert chk.count == 0
    inner = (slice(2, -2),) * 2
    assert np.max(np.abs(chk.lhs[inner] - chk.rhs[inner])) < 1e-7


def test_norm_report_on_zero_family():
    g = ModelGeometry(n=2, k=2)
    family = epsilon_continuation(zero_forcing(2), [1., 0.5, 0.25], SolverConfig(grid=16), g)
    report = norm_report(family, g)
    assert len(report.rows) == 3
    assert set(report.rows[0]) == set(COLUMNS)
    assert report.column('eps') == [1., 0.5, 0.25]
    for name, verdict in report.verdicts.items():
        if name != 'truncation_audit':
            assert verdict == 'pass', name
    assert report.uniformity['sup_phi'] == 1.
    assert report.rows[0]['I_F'] == 0.
    assert report.rows[0]['w3_surrogate'] == 0.


def test_w3_surrogate_and_truncation_audit():
    g1 = ModelGeometry(n=1, k=1)
    assert np.isnan(w3_surrogate(SolutionField.zeros(TorusGrid(g1, 16)), 6.))
    g = ModelGeometry(n=2, k=2)
    grid = TorusGrid(g, 16)
    phi = SolutionField.from_function(grid, lambda s1, s2: 1e-3 * s1 ** 3)
    # T_111 = s^3 * 6e-3 with the cubic differentiated exactly in the interior
    assert w3_surrogate(phi, 6.) > 0.
    flagged, details = truncation_audit(SolutionField.zeros(grid), bump_forcing(g, radius=0.2))
    assert flagged and details['support_cells'] < 4
    flagged, details = truncation_audit(SolutionField.zeros(grid), bump_forcing(g))
    assert not flagged
    assert details['truncation_ratio'] == 0.
