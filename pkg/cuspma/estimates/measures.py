"""
Weighted measures rho^a dV, the functional I(F, p0) and normalised L^q ladders.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from cuspma import quadrature
from cuspma.errors import PreconditionError, UnsupportedError

logger = logging.getLogger('cuspma')

TAGS = ('dV', 'dmu', 'dnu', 'weighted')


@dataclass(frozen=True)
class MeasureSpec:
    '''
    Measure rho^a dV on the model.

    Attributes:
        tag (str): dV, dmu (a = -1/(2n-1)), dnu (a = -1/(n-1)) or weighted
        a (float): exponent for the weighted tag
    '''
    tag: str = 'dV'
    a: Optional[float] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise PreconditionError("unknown measure tag %r" % (self.tag,))
        if self.tag == 'weighted' and self.a is None:
            raise PreconditionError("weighted measure needs an exponent")

    def exponent(self, n):
        if self.tag == 'dV':
            return 0.
        if self.tag == 'dmu':
            return -1. / (2. * n - 1.)
        if self.tag == 'dnu':
            if n < 2:
                raise UnsupportedError("dnu = rho^{-1/(n-1)} dV is undefined for n = 1")
            return -1. / (n - 1.)
        return float(self.a)

    def finite(self, n):
        '''rho^a dV has finite mass on the model iff a < 1.'''
        return self.exponent(n) < 1.

    def density(self, grid, n):
        '''Density against ds dtheta on a TorusGrid.'''
        return grid.rho ** self.exponent(n) * grid.density

    def __str__(self):
        return self.tag if self.tag != 'weighted' else 'weighted(%g)' % self.a


@dataclass
class NormLadder:
    '''
    Attributes:
        q (list): exponents
        norms (list): normalised L^q norms
        sup (float): grid sup of |h|
        nondecreasing (bool): norms nondecreasing in q (up to rounding)
    '''
    q: List[float]
    norms: List[float]
    sup: float
    nondecreasing: bool

    @property
    def gap(self):
        return 0. if self.sup == 0. else 1. - self.norms[-1] / self.sup


def moser_trace(h, measure, q_schedule=None, grid=None, n=None):
    '''
    Normalised norms (int |h|^q dm / int dm)^{1/q} along a q schedule.

    Args:
        h (ndarray or SolutionField): field on a TorusGrid
        measure (MeasureSpec): finite measure
        q_schedule (list): default 8, 16, ..., 512
        grid (TorusGrid): required when h is a bare array
        n (int): complex dimension, default the grid's geometry

    Returns:
        NormLadder
    '''
    if grid is None:
        grid = h.grid
    values = np.asarray(getattr(h, 'values', h), dtype=float)
    n = grid.geometry.n if n is None else n
    if not measure.finite(n):
        raise PreconditionError("measure %s has infinite mass on the model" % measure)
    q_schedule = list(q_schedule or [8. * 2 ** i for i in range(7)])
    w = grid.trapezoid_weights() * measure.density(grid, n)
    w = w / np.sum(w)
    sup = float(np.max(np.abs(values)))
    if sup == 0.:
        return NormLadder(q_schedule, [0.] * len(q_schedule), 0., True)
    x = np.abs(values) / sup
    norms = [float(sup * np.sum(w * x ** q) ** (1. / q)) for q in q_schedule]
    mono = all(b >= a * (1. - 1e-12) for a, b in zip(norms[:-1], norms[1:]))
    logger.debug("moser ladder (%s): %s", measure, norms)
    return NormLadder(q_schedule, norms, sup, bool(mono))


def I_weight_exponent(p0, n):
    if n < 2:
        raise UnsupportedError("I(F, p0) needs n >= 2: the weight exponent (p0-2)/(2n-2) is undefined")
    return (p0 - 2.) / (2. * n - 2.)


def _integrand(F, p0, beta):
    def fn(pts):
        cols = [pts[:, j] for j in range(pts.shape[1])]
        val = np.abs(F(*cols)) ** p0 + F.grad_norm_sq(*cols) ** (0.5 * p0)
        return val * np.prod(pts, axis=-1) ** beta
    return fn


def weighted_integral(fn, box, panels=8, order=8):
    '''int fn dV over a box in s, in t = 1/s per factor (s^{-2} ds = dt).'''
    k = len(box)
    tbox = [(1. / b, 1. / a) for a, b in box]
    t, w = quadrature.tensor_gauss(tbox, panels, order)
    return float((2. * np.pi) ** k * np.sum(w * fn(1. / t)))


@dataclass
class IResult:
    '''
    Attributes:
        value (float): I(F, p0) over the truncated domain
        boxes (list): s_max of the nested boxes
        values (list): value per nested box
        diverged (bool): growth under doubling beyond tolerance
        extrapolated (float): geometric tail extrapolation from the nested boxes
        tail_bound (float): extrapolated - value (inf when the tail is not geometric)
    '''
    value: float
    boxes: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    diverged: bool = False
    extrapolated: float = 0.
    tail_bound: float = 0.


def I_functional(F, p0, geometry, n=None, rtol=1e-6, panels=8, order=8, warn=True):
    '''
    I(F, p0) = int (|F|^p0 + |grad F|^p0) rho^{(p0-2)/(2n-2)} dV.

    Compactly supported forcings are integrated over their support box; other
    forcings over [s_min, S]^k for S = s_max and two doublings of the box width,
    with the divergence flag raised when the first doubling grows the value by
    more than rtol.

    Args:
        F (ForcingField)
        p0 (float): > 2n
        geometry (ModelGeometry)
        n (int): complex dimension, default geometry.n

    Returns:
        IResult
    '''
    n = geometry.n if n is None else n
    beta = I_weight_exponent(p0, n)
    if p0 <= 2 * n:
        raise PreconditionError("I(F, p0) needs p0 > 2n, got p0 = %g, n = %d" % (p0, n))
    disc = math.pi ** (n - geometry.k)
    fn = _integrand(F, p0, beta)
    if F.compact:
        val = disc * weighted_integral(fn, F.support, panels, order) if F.support else 0.
        F.I_value = val
        return IResult(val, [geometry.s_max], [val], False, val, 0.)
    width = geometry.s_max - geometry.s_min
    boxes = [geometry.s_min + width * 2 ** i for i in range(3)]
    # panels scale with the box so the node density in s stays comparable
    vals = [disc * weighted_integral(fn, [(geometry.s_min, S)] * geometry.k, panels * 2 ** i, order)
            for i, S in enumerate(boxes)]
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    diverged = bool(abs(d1) > rtol * max(abs(vals[1]), 1e-300))
    if d1 != 0. and 0. <= d2 / d1 < 1.:
        r = d2 / d1
        extrap = vals[2] + d2 * r / (1. - r)
        tail = extrap - vals[0]
    elif d1 == 0.:
        extrap, tail = vals[0], 0.
    else:
        extrap, tail = np.inf, np.inf
    if diverged and warn:
        warnings.warn("I(F, p0) grows by %.3e under doubling of the box: flagged divergent" % (d1 / vals[1]))
    F.I_value = vals[0]
    logger.debug("I_functional %s: %s (diverged=%s)", F.name, vals, diverged)
    return IResult(vals[0], boxes, vals, diverged, float(extrap), float(tail))
