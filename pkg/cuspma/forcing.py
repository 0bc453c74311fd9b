"""
Torus-invariant forcings F(s_1, ..., s_k) and the named-forcing registry used
by the configuration layer.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import interpolate

from cuspma.errors import ConfigError
from cuspma import quadrature

logger = logging.getLogger('cuspma')


def bump(t):
    '''Smooth bump exp(1 - 1/(1 - t^2)) on |t| < 1, zero elsewhere; bump(0) = 1.'''
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.
    out[m] = np.exp(1. - 1. / (1. - t[m] ** 2))
    return out


def bump_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.
    q = 1. / (1. - t[m] ** 2)
    out[m] = -2. * t[m] * q ** 2 * np.exp(1. - q)
    return out


def bump_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.
    tm = t[m]
    q = 1. / (1. - tm ** 2)
    out[m] = np.exp(1. - q) * (-2. * q ** 2 - 8. * tm ** 2 * q ** 3 + 4. * tm ** 2 * q ** 4)
    return out


@dataclass
class ForcingField:
    '''
    Closed-form torus-invariant forcing.

    Attributes:
        name (str): registry name
        rule (callable): F(*s) on coordinate arrays
        grad_rule (callable): returns the list of dF/ds_j arrays
        k (int): number of cusp coordinates
        support (list): [(a_j, b_j)] box outside which F vanishes, or None
        p0 (float): integrability exponent of the weighted functional
        params (dict): constructor parameters, recorded in manifests
        I_value (float): cached weighted functional, filled by I_functional
    '''
    name: str
    rule: Callable
    grad_rule: Callable
    k: int
    support: Optional[list] = None
    p0: float = 6.
    params: dict = field(default_factory=dict)
    I_value: Optional[float] = None

    @property
    def compact(self):
        return self.support is not None

    def __call__(self, *s):
        return self.rule(*s)

    def gradient(self, *s):
        return self.grad_rule(*s)

    def grad_norm_sq(self, *s):
        '''|grad F|^2_g = 2 sum_j s_j^2 (dF/ds_j)^2.'''
        g = self.grad_rule(*s)
        return 2. * sum((np.asarray(sj) * gj) ** 2 for sj, gj in zip(s, g))

    def sample(self, grid):
        return np.broadcast_to(self.rule(*grid.mesh), grid.shape).astype(float)

    def sup(self, grid):
        return float(np.max(np.abs(self.sample(grid))))

    def support_cells(self, grid):
        '''Smallest number of grid cells spanned by the support along any axis.'''
        if not self.support:
            return grid.N
        return int(min(np.floor((b - a) / grid.h) for a, b in self.support))

    def scaled(self, factor, name=None):
        rule, grad = self.rule, self.grad_rule
        return ForcingField(name or self.name, lambda *s: factor * rule(*s),
                            lambda *s: [factor * g for g in grad(*s)], self.k,
                            self.support, self.p0, dict(self.params, scale=factor))


class GridForcing(ForcingField):
    '''
    Forcing given by values on a TorusGrid. Sampling on the same grid returns
    the stored values; other points use a cubic spline of the grid data.
    '''

    def __init__(self, name, grid, values, p0=6., params=None, support=None):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        axes = (grid.axis,) * grid.k
        self._interp = interpolate.RegularGridInterpolator(axes, self.values, method='cubic',
                                                           bounds_error=False, fill_value=0.)
        self._grads = [interpolate.RegularGridInterpolator(
            axes, np.gradient(self.values, grid.h, axis=j, edge_order=2), method='cubic',
            bounds_error=False, fill_value=0.) for j in range(grid.k)]

        def rule(*s):
            pts = np.stack(np.broadcast_arrays(*s), axis=-1)
            return self._interp(pts)

        def grad_rule(*s):
            pts = np.stack(np.broadcast_arrays(*s), axis=-1)
            return [g(pts) for g in self._grads]

        super().__init__(name, rule, grad_rule, grid.k, support, p0, params or {})

    def sample(self, grid):
        if grid.N == self.grid.N and np.allclose(grid.axis, self.grid.axis):
            return self.values.copy()
        return super().sample(grid)


def zero_forcing(k, p0=6.):
    return ForcingField('zero', lambda *s: np.zeros(np.broadcast(*s).shape),
                        lambda *s: [np.zeros(np.broadcast(*s).shape) for _ in s], k,
                        [], p0, {})


def _bump_product(center, radius):
    def value(*s):
        out = 1.
        for sj, cj in zip(s, center):
            out = out * bump((np.asarray(sj) - cj) / radius)
        return out

    def grad(*s):
        vals = [bump((np.asarray(sj) - cj) / radius) for sj, cj in zip(s, center)]
        ders = [bump_d1((np.asarray(sj) - cj) / radius) / radius for sj, cj in zip(s, center)]
        out = []
        for j in range(len(s)):
            g = ders[j]
            for i in range(len(s)):
                if i != j:
                    g = g * vals[i]
            out.append(g)
        return out

    return value, grad


def _support(center, radius, geometry):
    return [(max(c - radius, geometry.s_min), min(c + radius, geometry.s_max)) for c in center]


def _center(center, geometry, default_offset):
    if center is None:
        center = geometry.s_min + default_offset
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size == 1:
        center = np.repeat(center, geometry.k)
    if center.size != geometry.k:
        raise ConfigError("center needs %d entries" % geometry.k, field='forcing.params.center')
    return tuple(center)


def bump_forcing(geometry, amplitude=0.2, center=None, radius=3., p0=6.):
    '''F = amplitude * prod_j bump((s_j - c_j)/radius), compactly supported.'''
    if radius <= 0:
        raise ConfigError("radius must be positive", field='forcing.params.radius')
    c = _center(center, geometry, 0.5 * (geometry.s_max - geometry.s_min))
    value, grad = _bump_product(c, radius)
    return ForcingField('bump', lambda *s: amplitude * value(*s),
                        lambda *s: [amplitude * g for g in grad(*s)], geometry.k,
                        _support(c, radius, geometry), p0,
                        {'amplitude': amplitude, 'center': list(c), 'radius': radius})


def balanced_bump_forcing(geometry, amplitude=0.25, centers=None, radius=2.5, p0=6., panels=8, order=8):
    '''
    F = log(1 + amplitude (b_1 - lam b_2)) with lam chosen so that the
    integral of e^F - 1 against dV vanishes under the box rule used by
    compatibility_defect.
    '''
    if centers is None:
        centers = (geometry.s_min + 4., geometry.s_min + 8.)
    c1 = _center(centers[0], geometry, 4.)
    c2 = _center(centers[1], geometry, 8.)
    v1, g1 = _bump_product(c1, radius)
    v2, g2 = _bump_product(c2, radius)
    box1 = _support(c1, radius, geometry)
    box2 = _support(c2, radius, geometry)
    support = [(min(a[0], b[0]), max(a[1], b[1])) for a, b in zip(box1, box2)]
    # same rule and box as compatibility_defect, so the balance is exact there
    m1 = _dv_integral(lambda pts: v1(*pts.T), support, panels, order)
    m2 = _dv_integral(lambda pts: v2(*pts.T), support, panels, order)
    lam = m1 / m2
    if amplitude * lam >= 1.:
        raise ConfigError("amplitude %g too large: 1 + a (b1 - lam b2) must stay positive (lam = %g)"
                          % (amplitude, lam), field='forcing.params.amplitude')

    def inner(*s):
        return amplitude * (v1(*s) - lam * v2(*s))

    def rule(*s):
        return np.log1p(inner(*s))

    def grad_rule(*s):
        den = 1. + inner(*s)
        return [amplitude * (a - lam * b) / den for a, b in zip(g1(*s), g2(*s))]

    logger.debug("balanced_bump: lam = %.16e", lam)
    return ForcingField('balanced_bump', rule, grad_rule, geometry.k, support, p0,
                        {'amplitude': amplitude, 'centers': [list(c1), list(c2)], 'radius': radius,
                         'balance': lam})


def rho_power_forcing(geometry, coefficient=1., exponent=-2., p0=6.):
    '''F = coefficient * rho^exponent; not compactly supported.'''
    def rule(*s):
        return coefficient * np.prod(np.stack(np.broadcast_arrays(*s)), axis=0) ** exponent

    def grad_rule(*s):
        val = rule(*s)
        return [exponent * val / np.asarray(sj) for sj in s]

    return ForcingField('rho_power', rule, grad_rule, geometry.k, None, p0,
                        {'coefficient': coefficient, 'exponent': exponent})


def sine4_forcing(geometry, amplitude=0.2, p0=6.):
    '''F = amplitude * prod_j sin^4(pi (s_j - s_min)/L), vanishing on the box boundary.'''
    L = geometry.s_max - geometry.s_min
    s0 = geometry.s_min
    w = np.pi / L

    def rule(*s):
        out = amplitude
        for sj in s:
            out = out * np.sin(w * (np.asarray(sj) - s0)) ** 4
        return out

    def grad_rule(*s):
        sins = [np.sin(w * (np.asarray(sj) - s0)) for sj in s]
        coss = [np.cos(w * (np.asarray(sj) - s0)) for sj in s]
        out = []
        for j in range(len(s)):
            g = amplitude * 4. * w * sins[j] ** 3 * coss[j]
            for i in range(len(s)):
                if i != j:
                    g = g * sins[i] ** 4
            out.append(g)
        return out

    return ForcingField('sine4', rule, grad_rule, geometry.k,
                        [(geometry.s_min, geometry.s_max)] * geometry.k, p0, {'amplitude': amplitude})


FORCINGS = {
    'zero': lambda geometry, p0=6.: zero_forcing(geometry.k, p0),
    'bump': bump_forcing,
    'balanced_bump': balanced_bump_forcing,
    'rho_power': rho_power_forcing,
    'sine4': sine4_forcing,
}


def make_forcing(name, geometry, params=None, p0=6.):
    '''
    Build a registered forcing.

    Args:
        name (str): registry key
        geometry (ModelGeometry): model the forcing lives on
        params (dict): keyword parameters of the constructor

    Returns:
        ForcingField
    '''
    if name not in FORCINGS:
        raise ConfigError("unknown forcing %r (known: %s)" % (name, ', '.join(sorted(FORCINGS))),
                          field='forcing.name')
    params = dict(params or {})
    try:
        return FORCINGS[name](geometry, p0=p0, **params)
    except TypeError as err:
        raise ConfigError(str(err), field='forcing.params')


def _dv_integral(fn, box, panels, order):
    k = len(box)
    pts, wts = quadrature.tensor_gauss(box, panels, order)
    dens = np.prod(pts ** -2., axis=-1) * (2. * np.pi) ** k
    return float(np.sum(wts * dens * fn(pts)))


def compatibility_defect(F, geometry, panels=8, order=8):
    '''
    Integral of e^F - 1 against dV over the forcing's support box (the whole
    truncated domain when F is not compactly supported).
    '''
    box = F.support if F.compact else [(geometry.s_min, geometry.s_max)] * geometry.k
    if F.compact and len(box) == 0:
        return 0.
    return _dv_integral(lambda pts: np.expm1(F(*pts.T)), box, panels, order)
