"""
Integral probes on the atlas: the two-sided chart-sum decomposition of the
dV integral, the weighted Sobolev ratio and the sup-norm probe.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from cuspma import quadrature
from cuspma.atlas.charts import covering_sequence
from cuspma.errors import PreconditionError, UndefinedRatioError
from cuspma.estimates.measures import I_functional
from cuspma.forcing import bump, bump_d1

logger = logging.getLogger('cuspma')

INTEGRAND_REGISTRY_VERSION = 1


def _rho(*s):
    return np.prod(np.stack(np.broadcast_arrays(*s)), axis=0)


def _gauss_s(center, width):
    def fn(*s):
        return np.prod(np.stack([np.exp(-(np.asarray(sj) - center) ** 2 / (2. * width ** 2))
                                 for sj in s]), axis=0)
    return fn


def integrand_registry(geometry):
    '''
    Fixed family of test integrands for the chart-sum bracket: powers of rho,
    Gaussian bumps in s and their products.

    Returns:
        dict: name -> vectorised callable f(*s)
    '''
    mid = 0.5 * (geometry.s_min + geometry.s_max)
    width = 0.125 * (geometry.s_max - geometry.s_min)
    g = _gauss_s(mid, width)
    return {
        'one': lambda *s: np.ones(np.broadcast(*s).shape),
        'rho^-1': lambda *s: _rho(*s) ** -1.,
        'rho^-2': lambda *s: _rho(*s) ** -2.,
        'rho^1': lambda *s: _rho(*s),
        'gauss_s': g,
        'gauss_s*rho^-1': lambda *s: g(*s) / _rho(*s),
    }


def _domain_mask(geometry, s):
    return np.all((s >= geometry.s_min) & (s <= geometry.s_max), axis=-1)


def direct_integral(f, geometry, weight_power=0., panels=8, order=16):
    '''
    Integral of |f| rho^weight_power dV over the truncated domain, in t = 1/s
    per factor so the cusp density becomes dt.
    '''
    box = [(1. / geometry.s_max, 1. / geometry.s_min)] * geometry.k
    t, w = quadrature.tensor_gauss(box, panels, order)
    s = 1. / t
    vals = np.abs(f(*s.T)) * np.prod(s, axis=-1) ** weight_power
    return float((2. * np.pi) ** geometry.k * np.sum(w * vals))


def tail_integral(f, geometry, weight_power=0., panels=8, order=16):
    '''Integral of |f| rho^weight_power dV over {s_j >= s_min} outside the truncation box.'''
    box = [(0., 1. / geometry.s_min)] * geometry.k
    t, w = quadrature.tensor_gauss(box, panels, order)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        s = 1. / t
        vals = np.abs(f(*s.T)) * np.prod(s, axis=-1) ** weight_power
    vals = np.where(np.isfinite(vals), vals, 0.)
    full = float((2. * np.pi) ** geometry.k * np.sum(w * vals))
    return max(full - direct_integral(f, geometry, weight_power, panels, order), 0.)


def _chart_sum(f, geometry, seq, radius, weighted, n_radial, n_angle):
    wq, aq = quadrature.polydisc_rule(radius, geometry.k, n_radial, n_angle)
    total = 0.
    for chart in seq.charts(radius):
        s = chart.weight(wq)
        vals = np.where(_domain_mask(geometry, s), np.abs(f(*s.T)), 0.)
        part = float(np.sum(aq * vals))
        total += (chart.A if weighted else 1.) * part
        logger.debug("chart %s radius %.2f: %.6e", chart.index, radius, part)
    return total


@dataclass
class ChartSumResult:
    '''
    Attributes:
        sum34, sum12 (float): A-weighted chart sums over the 3/4- and 1/2-polydiscs
        direct (float): integral of |f| dV over the truncated domain
        c (float): smallest c with sum34 <= c direct and direct <= c sum12
        c_swapped (float): the same with the radii exchanged
        unweighted34, unweighted12 (float): chart sums with the A factors dropped
        direct_rho (float): integral of |f| rho dV, the comparison for the unweighted sums
        c_rho (float): bracket constant of the unweighted sums against direct_rho
        tail_bound (float): dV mass of |f| beyond the truncation
        converged (bool): both sums stable under quadrature refinement
    '''
    sum34: float
    sum12: float
    direct: float
    c: float
    c_swapped: float
    unweighted34: float
    unweighted12: float
    direct_rho: float
    c_rho: float
    tail_bound: float
    converged: bool
    rel_change: float = 0.


def _bracket(upper_side, direct, lower_side):
    if direct == 0. and upper_side == 0. and lower_side == 0.:
        return 1.
    if direct == 0. or lower_side == 0.:
        return np.inf
    return max(upper_side / direct, direct / lower_side, 1.)


def chart_sum_integral(f, seq, geometry, radius=None, n_radial=16, n_angle=32, rtol=1e-2):
    '''
    Chart sums sum_l A_l int_{r P_k} |Phi_l^* f| dA(w) and their bracket of the
    direct integral.

    Args:
        f (callable): vectorised integrand f(*s), torus invariant
        seq (CoveringSequence): covering charts
        geometry (ModelGeometry): truncated domain; f is extended by zero outside
        radius (float): when given, return only that weighted chart sum
        n_radial, n_angle (int): polydisc rule; doubled once for the refinement check
        rtol (float): refinement tolerance for the `converged` flag

    Returns:
        float when radius is given, else ChartSumResult
    '''
    if radius is not None:
        return _chart_sum(f, geometry, seq, radius, True, n_radial, n_angle)

    def sums(level):
        m = 2 ** level
        return (_chart_sum(f, geometry, seq, 0.75, True, n_radial * m, n_angle * m),
                _chart_sum(f, geometry, seq, 0.5, True, n_radial * m, n_angle * m))

    coarse = sums(0)
    fine = sums(1)
    change = max(abs(a - b) / max(abs(b), 1e-300) for a, b in zip(coarse, fine))
    converged = bool(change <= rtol or max(abs(x) for x in fine) == 0.)
    if not converged:
        warnings.warn("chart sum unreliable: relative change %.3e under refinement" % change)
    s34, s12 = fine
    direct = direct_integral(f, geometry)
    u34 = _chart_sum(f, geometry, seq, 0.75, False, 2 * n_radial, 2 * n_angle)
    u12 = _chart_sum(f, geometry, seq, 0.5, False, 2 * n_radial, 2 * n_angle)
    direct_rho = direct_integral(f, geometry, weight_power=1.)
    return ChartSumResult(s34, s12, direct, _bracket(s34, direct, s12), _bracket(s12, direct, s34),
                          u34, u12, direct_rho, _bracket(u34, direct_rho, u12),
                          tail_integral(f, geometry), converged, float(change))


def bracket_constant(geometry, seq=None, integrands=None, n_radial=16, n_angle=32):
    '''
    One bracket constant across a family of integrands.

    Returns:
        c (float): max of the per-integrand constants
        results (dict): name -> ChartSumResult
    '''
    seq = seq or covering_sequence(geometry.kappa, geometry.s_max, geometry.k)
    integrands = integrands or integrand_registry(geometry)
    results = {name: chart_sum_integral(fn, seq, geometry, n_radial=n_radial, n_angle=n_angle)
               for name, fn in integrands.items()}
    return max(r.c for r in results.values()), results


@dataclass(frozen=True)
class BumpTestField:
    '''
    Compactly supported torus-invariant test function v(s) = amp * prod b((s_j - c_j)/r).
    '''
    center: tuple
    radius: float
    amplitude: float = 1.

    @property
    def box(self):
        return [(c - self.radius, c + self.radius) for c in self.center]

    def value(self, s):
        out = self.amplitude * np.ones(s.shape[:-1])
        for j, c in enumerate(self.center):
            out = out * bump((s[..., j] - c) / self.radius)
        return out

    def grad_norm(self, s):
        '''|grad v|_g in the real convention: sqrt(2 sum_j s_j^2 (dv/ds_j)^2).'''
        vals = [bump((s[..., j] - c) / self.radius) for j, c in enumerate(self.center)]
        ders = [bump_d1((s[..., j] - c) / self.radius) / self.radius for j, c in enumerate(self.center)]
        acc = 0.
        for j in range(len(self.center)):
            g = self.amplitude * ders[j]
            for i in range(len(self.center)):
                if i != j:
                    g = g * vals[i]
            acc = acc + (s[..., j] * g) ** 2
        return np.sqrt(2. * acc)

    def scaled(self, factor):
        return BumpTestField(self.center, self.radius, self.amplitude * factor)


def check_sobolev_pair(p, q, n):
    if not (q >= p >= 1.):
        raise PreconditionError("Sobolev pair needs q >= p >= 1, got p = %g, q = %g" % (p, q))
    if 1. / p > 1. / (2. * n) + 1. / q + 1e-15:
        raise PreconditionError("Sobolev pair needs 1/p <= 1/(2n) + 1/q, got p = %g, q = %g, n = %d"
                                % (p, q, n))


def _weighted_box_integral(vals_fn, box, panels, order):
    k = len(box)
    pts, wts = quadrature.tensor_gauss(box, panels, order)
    dens = (2. * np.pi) ** k * np.prod(pts, axis=-1) ** -1.
    return float(np.sum(wts * dens * vals_fn(pts)))


def sobolev_ratio(v, p, q, n, panels=8, order=8):
    '''
    (int |v|^q rho dV)^{1/q} / (int (|v|^p + |grad v|^p) rho dV)^{1/p}.

    Args:
        v (BumpTestField): compactly supported test function
        p, q (float): exponents with q >= p >= 1 and 1/p <= 1/(2n) + 1/q
        n (int): complex dimension
        panels, order (int): tensor Gauss rule on the support box

    Returns:
        float
    '''
    check_sobolev_pair(p, q, n)
    if v.amplitude == 0.:
        raise UndefinedRatioError("sobolev_ratio of the zero function")
    # rho dV has density prod s_j^{-1}
    num = _weighted_box_integral(lambda s: np.abs(v.value(s)) ** q, v.box, panels, order)
    den = _weighted_box_integral(lambda s: np.abs(v.value(s)) ** p + v.grad_norm(s) ** p,
                                 v.box, panels, order)
    if num == 0.:
        raise UndefinedRatioError("test field vanishes on its support")
    return num ** (1. / q) / den ** (1. / p)


def bump_family(geometry, m=20, center=None, radii=None):
    '''m bumps sharing a centre with widths spread over [0.5, 4] (clipped to the domain).'''
    if center is None:
        center = (geometry.s_min + 0.5 * (geometry.s_max - geometry.s_min),) * geometry.k
    c = center[0]
    rmax = min(4., c - geometry.s_min, geometry.s_max - c)
    radii = np.linspace(0.5, rmax, m) if radii is None else radii
    return [BumpTestField(tuple(center), float(r)) for r in radii]


@dataclass
class SobolevFamilyResult:
    ratios: List[float]
    max_ratio: float
    refined_max: float
    stable: bool


def sobolev_family_probe(geometry, n, p=2., q=4., family=None, panels=8, order=8, tol=0.2):
    '''Max Sobolev ratio over a test family and its stability under one quadrature refinement.'''
    family = family or bump_family(geometry)
    ratios = [sobolev_ratio(v, p, q, n, panels, order) for v in family]
    refined = [sobolev_ratio(v, p, q, n, 2 * panels, order) for v in family]
    mx, rmx = max(ratios), max(refined)
    stable = abs(rmx - mx) <= tol * mx
    logger.info("Sobolev family (p=%g, q=%g): max ratio %.6e, refined %.6e", p, q, mx, rmx)
    return SobolevFamilyResult(ratios, mx, rmx, bool(stable))


@dataclass
class SupBoundResult:
    '''
    Attributes:
        sup (float): sup |F| on the quadrature nodes
        I (float): weighted functional I(F, p0)
        ratio (float): sup / I^{1/p0}
        q_schedule (list), ladder (list): normalised L^q(rho dV) norms on the support box
        diverged (bool): I(F, p0) flagged divergent
    '''
    sup: float
    I: float
    ratio: float
    q_schedule: List[float] = field(default_factory=list)
    ladder: List[float] = field(default_factory=list)
    diverged: bool = False

    @property
    def gap(self):
        return 0. if self.sup == 0. else 1. - self.ladder[-1] / self.sup


def sup_bound_probe(F, p0, geometry, n=None, q_schedule=None, panels=32, order=8):
    '''
    Ratio sup|F| / I(F, p0)^{1/p0} and the normalised L^q(rho dV) ladder whose
    q -> infinity limit recovers sup|F|.

    Args:
        F (ForcingField): field with finite I(F, p0)
        p0 (float): exponent, > 2n
        geometry (ModelGeometry)
        q_schedule (list): defaults to 8, 16, ..., 512

    Returns:
        SupBoundResult
    '''
    n = geometry.n if n is None else n
    if p0 <= 2 * n:
        raise PreconditionError("sup-bound probe needs p0 > 2n, got p0 = %g, n = %d" % (p0, n))
    q_schedule = list(q_schedule or [8. * 2 ** i for i in range(7)])
    ires = I_functional(F, p0, geometry, n=n)
    box = F.support if F.compact and F.support else [(geometry.s_min, geometry.s_max)] * geometry.k
    pts, wts = quadrature.tensor_gauss(box, panels, order)
    w = wts * np.prod(pts, axis=-1) ** -1.
    vals = np.abs(F(*pts.T))
    sup = float(np.max(vals)) if vals.size else 0.
    if sup == 0.:
        return SupBoundResult(0., ires.value, 0., q_schedule, [0.] * len(q_schedule), ires.diverged)
    mass = np.sum(w)
    x = vals / sup
    ladder = [float(sup * (np.sum(w * x ** q) / mass) ** (1. / q)) for q in q_schedule]
    ratio = sup / ires.value ** (1. / p0) if ires.value > 0 else np.inf
    if ires.diverged:
        warnings.warn("I(F, p0) flagged divergent; sup-bound ratio is not meaningful")
    return SupBoundResult(sup, ires.value, float(ratio), q_schedule, ladder, ires.diverged)
