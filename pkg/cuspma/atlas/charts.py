"""
Quasi-coordinate charts of the punctured disc and the doubling covering
sequence.

A chart with parameter delta maps the unit disc onto kappa Delta^* through
w -> exp(sigma (w+1)/(w-1)), sigma = (1+delta)/(1-delta). In the cusp
coordinate this reads s(w) = 2 sigma (1-|w|^2)/|1-w|^2, which is harmonic in w.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from cuspma.errors import ConfigError, DomainError

logger = logging.getLogger('cuspma')

RADII = (0.5, 0.75)
MULTIPLICITY_BOUND = 16


def sigma_of(delta):
    return (1. + delta) / (1. - delta)


def delta_of(sigma):
    return (sigma - 1.) / (sigma + 1.)


def _check_w(w, bound=1.):
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(w) >= bound):
        raise DomainError("chart coordinate outside the unit disc: max |w| = %g" % np.max(np.abs(w)))
    return w


def _check_delta(delta):
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0.) or np.any(delta >= 1.):
        raise DomainError("delta must lie in [0, 1)")
    return delta


def quasi_map(delta, w):
    '''
    Chart map exp(sigma (w+1)/(w-1)) into the punctured unit disc.

    Args:
        delta (float): chart parameter in [0, 1)
        w (complex or ndarray): chart coordinate, |w| < 1

    Returns:
        complex or ndarray: z with 0 < |z| < 1
    '''
    w = _check_w(w)
    sigma = sigma_of(_check_delta(delta))
    return np.exp(sigma * (w + 1.) / (w - 1.))


def pullback_weight(delta, w):
    '''Cusp coordinate of the chart point: 2 sigma (1 - |w|^2) / |1 - w|^2 = -log|quasi_map|^2.'''
    w = _check_w(w)
    sigma = sigma_of(_check_delta(delta))
    return 2. * sigma * (1. - np.abs(w) ** 2) / np.abs(1. - w) ** 2


def weight_dw(delta, w):
    '''Holomorphic derivative ds/dw = 2 sigma / (w - 1)^2; s is harmonic so ds/dw dbar = 0.'''
    w = _check_w(w)
    return 2. * sigma_of(_check_delta(delta)) / (w - 1.) ** 2


def pullback_metric(delta, w):
    '''
    Pullback of the cusp coefficient 1/(|z|^2 s^2) through quasi_map,
    g(Phi(w)) |Phi'(w)|^2 = |ds/dw|^2 / s^2, which equals (1 - |w|^2)^{-2}.
    '''
    s = pullback_weight(delta, w)
    return np.abs(weight_dw(delta, w)) ** 2 / s ** 2


def pullback_metric_fd(delta, w, h=1e-6):
    '''Chain-rule oracle: model coefficient at quasi_map(w) times a centred-difference |Phi'(w)|^2.'''
    w = complex(w)
    z = quasi_map(delta, w)
    dz = (quasi_map(delta, w + h) - quasi_map(delta, w - h)) / (2. * h)
    r2 = abs(z) ** 2
    return abs(dz) ** 2 / (r2 * math.log(r2) ** 2)


def image_disc(radius):
    '''Centre and radius of the image of |w| < radius under (w+1)/(w-1).'''
    a = (radius + 1.) / (radius - 1.)
    b = (1. - radius) / (-radius - 1.)
    return 0.5 * (a + b), 0.5 * abs(a - b)


def image_s_range(sigma, radius):
    '''Range of s over the image of |w| <= radius: [2 sigma (1-r)/(1+r), 2 sigma (1+r)/(1-r)].'''
    return 2. * sigma * (1. - radius) / (1. + radius), 2. * sigma * (1. + radius) / (1. - radius)


@dataclass(frozen=True)
class QuasiChart:
    '''
    Quasi-coordinate chart on (kappa Delta^*)^k.

    Attributes:
        delta (tuple): chart parameter per cusp factor
        radius (float): 1/2 or 3/4, selecting the polydisc
        index (tuple): position in the covering sequence, if any
        edge (bool): image not contained in kappa Delta^* along some factor
    '''
    delta: Tuple[float, ...]
    radius: float = 0.75
    index: Tuple[int, ...] = ()
    edge: bool = False

    def __post_init__(self):
        delta = tuple(float(d) for d in np.atleast_1d(self.delta))
        _check_delta(delta)
        object.__setattr__(self, 'delta', delta)
        if self.radius not in RADII:
            raise ConfigError("chart radius must be 1/2 or 3/4, got %r" % (self.radius,))

    @property
    def k(self):
        return len(self.delta)

    @property
    def sigma(self):
        return tuple(sigma_of(d) for d in self.delta)

    @property
    def A(self):
        return float(np.prod([1. - d for d in self.delta]))

    def weight(self, w):
        '''s_j(w_j) for w of shape (..., k).'''
        w = np.asarray(w, dtype=complex)
        return np.stack([pullback_weight(d, w[..., j]) for j, d in enumerate(self.delta)], axis=-1)

    def weight_dw(self, w):
        w = np.asarray(w, dtype=complex)
        return np.stack([weight_dw(d, w[..., j]) for j, d in enumerate(self.delta)], axis=-1)

    def map(self, w):
        w = np.asarray(w, dtype=complex)
        return np.stack([quasi_map(d, w[..., j]) for j, d in enumerate(self.delta)], axis=-1)


@dataclass
class CoveringSequence:
    '''
    Doubling sequence of chart parameters for one cusp factor, with the strip
    bookkeeping of the covering.

    Attributes:
        kappa (float), s_max (float), k (int)
        sigma_list, delta_list, A_list (list): per-level chart data
        inner_strips (list): intervals [20 sigma/9, 40 sigma/9) in s
        outer_strips (list): intervals [2 sigma/7, 14 sigma) in s
        edge_flags (list): image of the 3/4-disc leaves kappa Delta^*
        multiplicity (int): max number of outer strips through a point
    '''
    kappa: float
    s_max: float
    k: int
    sigma_list: List[float] = field(default_factory=list)
    delta_list: List[float] = field(default_factory=list)
    A_list: List[float] = field(default_factory=list)
    inner_strips: List[Tuple[float, float]] = field(default_factory=list)
    outer_strips: List[Tuple[float, float]] = field(default_factory=list)
    edge_flags: List[bool] = field(default_factory=list)
    multiplicity: int = 0

    @property
    def s_min(self):
        return -2. * math.log(self.kappa)

    @property
    def levels(self):
        return len(self.sigma_list)

    @property
    def A_sigma(self):
        return [a * s for a, s in zip(self.A_list, self.sigma_list)]

    def charts(self, radius=0.75):
        '''All product charts, multi-indexed over the k factors.'''
        out = []
        for idx in itertools.product(range(self.levels), repeat=self.k):
            out.append(QuasiChart(tuple(self.delta_list[i] for i in idx), radius, idx,
                                  any(self.edge_flags[i] for i in idx)))
        return out

    def covers_strip(self, level, radius=0.75):
        '''Whether the image disc of chart `level` in log z contains I_sigma x [-pi, pi].'''
        sigma = self.sigma_list[level]
        c, r = image_disc(radius)
        lo, hi = -20. * sigma / 9., -10. * sigma / 9.
        return all((x - sigma * c) ** 2 + math.pi ** 2 <= (sigma * r) ** 2 for x in (lo, hi))

    def covers_domain(self):
        '''Inner strips cover [s_min, s_max] without gaps.'''
        if not self.inner_strips:
            return False
        if self.inner_strips[0][0] > self.s_min:
            return False
        for (a0, b0), (a1, b1) in zip(self.inner_strips[:-1], self.inner_strips[1:]):
            if a1 > b0:
                return False
        return self.inner_strips[-1][1] >= self.s_max

    def summary(self):
        return {
            'sigma': list(self.sigma_list),
            'delta': list(self.delta_list),
            'A': list(self.A_list),
            'A_sigma': self.A_sigma,
            'edge': list(self.edge_flags),
            'multiplicity': self.multiplicity,
        }


def strip_multiplicity(strips, samples=4096):
    '''Largest number of half-open intervals through one point, scanned on a log grid.'''
    lo = min(a for a, _ in strips)
    hi = max(b for _, b in strips)
    pts = np.geomspace(lo, hi, samples, endpoint=False)
    # interval endpoints themselves, where counts change
    pts = np.concatenate([pts, [a for a, _ in strips]])
    counts = [sum(1 for a, b in strips if a <= x < b) for x in pts]
    return int(max(counts))


def covering_sequence(kappa, s_max, k=1):
    '''
    Doubling sequence sigma_1 = -(3/5) log kappa, sigma_{l+1} = 2 sigma_l,
    stopped at the first level whose inner strip starts beyond s_max.

    Args:
        kappa (float): cusp-edge radius in (0, 1)
        s_max (float): truncation, > -2 log kappa
        k (int): number of cusp factors (charts are products over factors)

    Returns:
        CoveringSequence
    '''
    if not 0. < kappa < 1.:
        raise ConfigError("kappa must lie in (0, 1), got %r" % (kappa,), field='geometry.kappa')
    s_min = -2. * math.log(kappa)
    if not s_max > s_min:
        raise ConfigError("s_max must exceed s_min = %g" % s_min, field='geometry.s_max')
    seq = CoveringSequence(kappa, s_max, k)
    sigma = -0.6 * math.log(kappa)
    while 20. * sigma / 9. < s_max:
        delta = delta_of(sigma)
        seq.sigma_list.append(sigma)
        seq.delta_list.append(delta)
        seq.A_list.append(1. - delta)
        seq.inner_strips.append((20. * sigma / 9., 40. * sigma / 9.))
        seq.outer_strips.append((2. * sigma / 7., 14. * sigma))
        seq.edge_flags.append(image_s_range(sigma, 0.75)[0] < s_min)
        sigma *= 2.
    seq.multiplicity = strip_multiplicity(seq.outer_strips) if seq.outer_strips else 0
    logger.debug("covering sequence: %d levels, multiplicity %d", seq.levels, seq.multiplicity)
    return seq
