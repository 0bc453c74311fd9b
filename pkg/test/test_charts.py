import math

import numpy as np
import pytest

from cuspma.atlas import charts as qc
from cuspma.atlas import bracket_constant, chart_sum_integral, qc_holder_family, qc_holder_norm
from cuspma.errors import ConfigError, DomainError, InterpolationError
from cuspma.forcing import make_forcing, zero_forcing
from cuspma.geometry import DEFAULT_KAPPA, ModelGeometry
from cuspma.grid import TorusGrid
from cuspma.solver import (SolutionField, SolverConfig, Sine4Solution, chart_residual_family, charts_in_box,
                           complex_residual_oracle, manufactured_forcing, newton_solve, quasi_chart_residual,
                           reduced_residual_at, residual_budget)


def _samples(m=64, radius=0.75, seed=0):
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(size=m))
    return r * np.exp(2j * np.pi * rng.uniform(size=m))


def test_chart_identities():
    w = _samples()
    for sigma in (15. / 7., 30. / 7., 60. / 7.):
        delta = qc.delta_of(sigma)
        exact = (1. - np.abs(w) ** 2) ** -2.
        assert np.max(np.abs(qc.pullback_metric(delta, w) - exact) / exact) < 1e-12
        s = qc.pullback_weight(delta, w)
        logz = -np.log(np.abs(qc.quasi_map(delta, w)) ** 2)
        assert np.max(np.abs(s - logz) / logz) < 1e-12
        fd = np.array([qc.pullback_metric_fd(delta, x) for x in w[:8]])
        assert np.max(np.abs(fd - exact[:8]) / exact[:8]) < 1e-6
        scaled = (1. - delta) * s
        assert np.all(scaled >= 2. / 7. - 1e-12) and np.all(scaled <= 28.)
    print('Passed!')


def test_chart_domain_errors():
    with pytest.raises(DomainError):
        qc.quasi_map(0.5, 1.0 + 0j)
    with pytest.raises(DomainError):
        qc.pullback_weight(1.0, 0.1)
    with pytest.raises(ConfigError):
        qc.QuasiChart((0.5,), radius=0.6)


def test_covering_sequence():
    seq = qc.covering_sequence(DEFAULT_KAPPA, 50. / 7. + 12.)
    assert np.abs(seq.sigma_list[0] - 15. / 7.) < 1e-12
    assert seq.levels == 3
    for a, b in zip(seq.sigma_list[:-1], seq.sigma_list[1:]):
        assert np.abs(b - 2. * a) < 1e-12
    assert seq.multiplicity <= qc.MULTIPLICITY_BOUND
    assert all(1. <= x < 2. for x in seq.A_sigma)
    assert seq.covers_domain()
    assert all(seq.covers_strip(level) for level in range(seq.levels))
    # the first chart reaches past the cusp edge
    assert seq.edge_flags[0]
    charts = qc.covering_sequence(DEFAULT_KAPPA, 50. / 7. + 12., k=2).charts()
    assert len(charts) == 9
    assert np.abs(charts[4].A - seq.A_list[1] ** 2) < 1e-15


def test_covering_sequence_rejects_bad_input():
    with pytest.raises(ConfigError):
        qc.covering_sequence(1.2, 30.)
    with pytest.raises(ConfigError):
        qc.covering_sequence(DEFAULT_KAPPA, 5.)


def test_chart_sum_bracket():
    g = ModelGeometry(n=1, k=1)
    seq = qc.covering_sequence(g.kappa, g.s_max, 1)
    res = chart_sum_integral(lambda s: np.ones_like(s), seq, g)
    assert np.abs(res.direct - 2. * np.pi * (1. / g.s_min - 1. / g.s_max)) < 1e-12
    assert res.sum34 > 0. and res.sum12 > 0.
    assert res.sum12 < res.sum34
    assert np.isfinite(res.c) and res.c >= 1.
    c, results = bracket_constant(g, seq)
    assert c >= 1. and np.isfinite(c)
    assert 'rho^-1' in results


def test_holder_norm_of_constant():
    seq = qc.covering_sequence(DEFAULT_KAPPA, 50. / 7. + 12.)
    chart = seq.charts(0.5)[1]
    norm = qc_holder_norm(lambda s: np.full(np.shape(s), 2.), chart)
    assert np.abs(norm.value - 2.) < 1e-12
    assert norm.seminorm == 0.
    fam = qc_holder_family(lambda s: 1. / s, seq)
    assert len(fam.norms) == seq.levels
    # 1/s pulls back to a field of size 1/sigma, so deeper charts see smaller norms
    assert fam.norms[-1].value < fam.norms[0].value


def test_chart_residual_matches_reduced_residual():
    g = ModelGeometry(n=1, k=1, s_max=80.)
    grid = TorusGrid(g, 64)
    phi = Sine4Solution(g, 1e-2).on_grid(grid, eps=0.5)
    F = zero_forcing(1)
    chart = qc.QuasiChart((qc.delta_of(12.),), 0.5)
    res = quasi_chart_residual(phi, chart, F)
    s = chart.weight(res.w)
    ref = reduced_residual_at(phi.interpolant(), F, 0.5, s)
    assert np.max(np.abs(res.normalized - ref)) < 1e-10
    assert residual_budget(SolutionField.zeros(grid, 0.5), F) < 1e-12
    with pytest.raises(InterpolationError):
        quasi_chart_residual(phi, qc.QuasiChart((qc.delta_of(2.),), 0.5), F)


def test_complex_oracle_agrees_with_reduction():
    g = ModelGeometry(n=1, k=1)
    phi_star = Sine4Solution(g, 1e-3)
    F = manufactured_forcing(phi_star, 0.5)
    s = np.array([[9.], [12.5], [16.]])
    assert np.max(np.abs(reduced_residual_at(phi_star, F, 0.5, s))) < 1e-12
    for point in s:
        assert np.abs(complex_residual_oracle(phi_star, F, 0.5, point, theta=np.array([0.7]))) < 1e-6
    assert math.isfinite(F(np.array(10.)))


def test_chart_residual_over_covering_sequence():
    g = ModelGeometry(n=1, k=1, s_max=400.)
    F = make_forcing('balanced_bump', g)
    phi = newton_solve(F, SolverConfig(epsilon=1.), grid=TorusGrid(g, 128))
    charts = charts_in_box(qc.covering_sequence(g.kappa, g.s_max, 1), g)
    # 1/2-disc images [2 sigma/3, 6 sigma] inside [50/7, 400]: levels 3 and 4
    assert [c.index for c in charts] == [(3,), (4,)]
    for c in charts:
        lo, hi = qc.image_s_range(c.sigma[0], 0.5)
        assert g.s_min <= lo and hi <= g.s_max
    budget = residual_budget(phi, F)
    sups = chart_residual_family(phi, charts, F)
    assert budget > 0.
    assert max(sups.values()) <= 10. * budget
    assert sups[(4,)] <= sups[(3,)]
