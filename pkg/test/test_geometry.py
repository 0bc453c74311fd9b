import math

import numpy as np
import pytest

from cuspma.errors import ConfigError, DomainError, PositivityError
from cuspma.geometry import (CuspPoint, ModelGeometry, QuadraticProfile, cusp_integral, cusp_volume,
                             gauss_curvature_cusp, gauss_curvature_fd, grad_rho_ratio,
                             holomorphic_sectional_curvature, measure_bounds, model_metric,
                             positivity_threshold, quasi_isometry_constant, reference_metric_at,
                             reference_metric_local, volume_element, weight_rho, weighted_volume)


def test_default_model():
    g = ModelGeometry()
    assert np.abs(g.s_min - 50. / 7.) < 1e-12
    assert np.abs(g.s_max - g.s_min - 12.) < 1e-12
    assert g.n_disc == 0


def test_invalid_geometry():
    with pytest.raises(ConfigError):
        ModelGeometry(n=2, k=3)
    with pytest.raises(ConfigError):
        ModelGeometry(kappa=1.5)
    with pytest.raises(ConfigError) as err:
        ModelGeometry(kappa=0.9)
    assert err.value.field == 'geometry.kappa'


def test_point_round_trip():
    p = CuspPoint((9., 11.), (0.4, 2.0))
    q = CuspPoint.from_z(p.z, 2)
    assert np.max(np.abs(np.array(q.s) - np.array(p.s))) < 1e-12
    assert np.max(np.abs(np.array(q.theta) - np.array(p.theta))) < 1e-12


def test_weight_and_model_metric():
    g = ModelGeometry(n=3, k=2)
    p = CuspPoint((8., 10.), (0., 0.), (0.2j,))
    rho = weight_rho(p, g)
    assert np.abs(rho.value - 80.) < 1e-12
    assert np.abs(rho.gradient[0] - 10.) < 1e-12
    m = model_metric(p, g)
    assert np.max(np.abs(m.diag - np.array([np.exp(8.) / 64., np.exp(10.) / 100., 1.])) /
                  m.diag) < 1e-12
    assert m.is_positive
    assert np.max(np.abs(m.offdiag)) == 0.
    assert np.abs(volume_element(p) - 1. / 6400.) < 1e-15
    with pytest.raises(DomainError):
        weight_rho(CuspPoint((1., 10.), (0., 0.), (0.2j,)), g)


def test_curvature():
    for s in np.geomspace(7.2, 19., 5):
        assert np.abs(gauss_curvature_cusp(s) + 4.) < 1e-12
        assert np.abs(gauss_curvature_fd(s) + 4.) < 1e-4
        assert np.abs(holomorphic_sectional_curvature(s) + 2.) < 1e-12
    assert gauss_curvature_cusp(10., 'disc') == 0.
    print('Passed!')


def test_reference_metric_is_model_for_flat_profile():
    # with f = 0 and no background the cusp term reduces to the model
    p = CuspPoint((8., 9.))
    ref = reference_metric_at(p, lam=0.)
    assert ref.deviation < 1e-12
    assert np.abs(ref.ratio_range[0] - 1.) < 1e-12


def test_reference_positivity_failure():
    g = ModelGeometry(n=2, k=1)
    f = QuadraticProfile(-0.1)
    report = reference_metric_local(0., f, g, m=4)
    assert not report.positive
    assert report.failure_point is not None
    assert report.quasi_isometry == np.inf
    with pytest.raises(PositivityError):
        reference_metric_local(0., f, g, m=4, raise_on_failure=True)
    assert reference_metric_local(1., f, g, m=4).positive
    lam = positivity_threshold(g, f, m=4)
    assert 0. < lam < 1.
    with pytest.warns(UserWarning):
        assert reference_metric_local(lam, f, g, m=4).positive


def test_quasi_isometry_decays_like_inverse_rho():
    g = ModelGeometry(n=2, k=2)
    report = reference_metric_local(1., None, g, m=4)
    assert report.positive
    assert report.quasi_isometry < 2.
    assert report.decay_constant < 1.
    assert quasi_isometry_constant(g, 1., None, m=4) == report.quasi_isometry


def test_grad_rho_ratio():
    g = ModelGeometry(n=2, k=2)
    bounds = measure_bounds(g, m=4)
    assert bounds.grad_ratio <= math.sqrt(2.) + 1e-12
    assert np.abs(bounds.real_grad_ratio - math.sqrt(2.) * bounds.grad_ratio) < 1e-12
    assert np.abs(bounds.curvature - 4.) < 1e-12
    assert np.abs(bounds.scalar_curvature - 4.) < 1e-12
    r = grad_rho_ratio(CuspPoint((1e4,)), lam=1.)
    assert np.abs(r.ratio - 1.) < 1e-3
    # the pure cusp term gives exactly one per factor
    r0 = grad_rho_ratio(CuspPoint((10., 20.)), lam=0.)
    assert np.max(np.abs(np.array(r0.per_factor) - 1.)) < 1e-12
    assert np.abs(r0.ratio - math.sqrt(2.)) < 1e-12


def test_volumes():
    s0 = 50. / 7.
    for s1 in (s0 + 1., s0 + 12., np.inf):
        assert np.abs(cusp_integral(None, s0, s1) - cusp_volume(s0, s1)) < 1e-12
    a = 0.5
    exact = 2. * np.pi * ((s0 + 12.) ** (a - 1.) - s0 ** (a - 1.)) / (a - 1.)
    assert np.abs(weighted_volume(s0, s0 + 12., a) - exact) < 1e-10
    with pytest.raises(DomainError):
        cusp_volume(10., 5.)
