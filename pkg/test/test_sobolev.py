import numpy as np
import pytest

from cuspma.atlas import BumpTestField, bump_family, sobolev_family_probe, sobolev_ratio, sup_bound_probe
from cuspma.errors import PreconditionError, UndefinedRatioError
from cuspma.forcing import bump_forcing, zero_forcing
from cuspma.geometry import ModelGeometry


def test_sobolev_ratio_is_scale_invariant():
    g = ModelGeometry(n=2, k=2)
    v = bump_family(g, 5)[2]
    r1 = sobolev_ratio(v, 2., 4., 2)
    r2 = sobolev_ratio(v.scaled(3.7), 2., 4., 2)
    assert r1 > 0.
    assert np.abs(r2 - r1) < 1e-12 * r1


def test_sobolev_ratio_preconditions():
    v = BumpTestField((12., 12.), 1.)
    with pytest.raises(UndefinedRatioError):
        sobolev_ratio(v.scaled(0.), 2., 4., 2)
    with pytest.raises(PreconditionError):
        sobolev_ratio(v, 4., 2., 2)
    # 1/p <= 1/(2n) + 1/q fails for p = 1, q = 4, n = 2
    with pytest.raises(PreconditionError):
        sobolev_ratio(v, 1., 4., 2)


def test_sobolev_family_probe():
    g = ModelGeometry(n=2, k=2)
    res = sobolev_family_probe(g, 2, 2., 4., bump_family(g, 6))
    assert len(res.ratios) == 6
    assert np.isfinite(res.max_ratio)
    assert res.stable


def test_sup_bound_ladder():
    g = ModelGeometry(n=2, k=2)
    F = bump_forcing(g, amplitude=0.3)
    res = sup_bound_probe(F, 6., g, panels=16)
    assert np.abs(res.sup - 0.3) < 1e-3
    assert all(b >= a * (1. - 1e-12) for a, b in zip(res.ladder[:-1], res.ladder[1:]))
    assert res.ladder[-1] <= res.sup * (1. + 1e-12)
    assert res.gap < 0.05
    assert not res.diverged
    with pytest.raises(PreconditionError):
        sup_bound_probe(F, 4., g)
    empty = sup_bound_probe(zero_forcing(2), 6., g)
    assert empty.sup == 0. and empty.ratio == 0.
