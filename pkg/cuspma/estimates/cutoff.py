"""
Cutoff approximation F_k = chi(d/k) F with d = log rho.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from cuspma import grid as fd
from cuspma import quadrature
from cuspma.errors import PreconditionError
from cuspma.estimates.measures import I_weight_exponent, _integrand
from cuspma.forcing import ForcingField

logger = logging.getLogger('cuspma')

STEP_SHARPNESS = 0.5


def _step(x, a=STEP_SHARPNESS):
    '''Smooth step: 0 for x <= 0, 1 for x >= 1, 1/(1 + e^{a/x - a/(1-x)}) between.'''
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1., 1., 0.)
    m = (x > 0.) & (x < 1.)
    xm = x[m]
    with np.errstate(over='ignore'):
        out[m] = 1. / (1. + np.exp(a / xm - a / (1. - xm)))
    return out


def _step_d1(x, a=STEP_SHARPNESS):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = (x > 0.) & (x < 1.)
    xm = x[m]
    S = _step(xm, a)
    out[m] = S * (1. - S) * a * (1. / xm ** 2 + 1. / (1. - xm) ** 2)
    return out


def chi(t):
    '''C-infinity cutoff: 1 on [0, 1], 0 on [2, inf), |chi'| < 2.'''
    return 1. - _step(np.asarray(t, dtype=float) - 1.)


def chi_prime(t):
    return -_step_d1(np.asarray(t, dtype=float) - 1.)


def distance_like(*s):
    '''d = log rho = sum_j log s_j.'''
    return sum(np.log(np.asarray(sj, dtype=float)) for sj in s)


def grad_d_norm(*s):
    '''|grad d|_g = sqrt(2 sum_j s_j^2 s_j^{-2}) = sqrt(2k) on the model.'''
    return np.sqrt(2. * len(s)) * np.ones(np.broadcast(*s).shape)


def cutoff_approximation(F, k):
    '''
    F_k = chi(d/k) F, equal to F on {d <= k} and zero on {d >= 2k}.

    Args:
        F (ForcingField): forcing with finite I(F, p0)
        k (float): cutoff scale, >= 1

    Returns:
        ForcingField
    '''
    if k < 1:
        raise PreconditionError("cutoff scale must be >= 1, got %g" % k)
    rule, grad_rule = F.rule, F.grad_rule

    def cut_rule(*s):
        return chi(distance_like(*s) / k) * rule(*s)

    def cut_grad(*s):
        t = distance_like(*s) / k
        c, dc = chi(t), chi_prime(t)
        val = rule(*s)
        return [c * g + val * dc / (k * np.asarray(sj, dtype=float)) for g, sj in zip(grad_rule(*s), s)]

    support = F.support
    if support:
        # chi(d/k) vanishes once every factor passes e^{2k}
        support = [(a, min(b, math.exp(min(2. * k, 700.)))) for a, b in support]
    return ForcingField('%s_cut%g' % (F.name, k), cut_rule, cut_grad, F.k, support, F.p0,
                        dict(F.params, cutoff=k))


def cutoff_remainder(F, k):
    '''F - F_k = (1 - chi(d/k)) F.'''
    Fk = cutoff_approximation(F, k)

    def rule(*s):
        return F.rule(*s) - Fk.rule(*s)

    def grad_rule(*s):
        return [a - b for a, b in zip(F.grad_rule(*s), Fk.grad_rule(*s))]

    return ForcingField('%s_rem%g' % (F.name, k), rule, grad_rule, F.k, None, F.p0, dict(F.params, cutoff=k))


def log_box_integral(fn, box, panels=16, order=8):
    '''int fn dV over a box, with nodes in log s per factor (dV = s^{-1} d(log s) dtheta).'''
    k = len(box)
    lbox = [(math.log(a), math.log(b)) for a, b in box]
    u, w = quadrature.tensor_gauss(lbox, panels, order)
    s = np.exp(u)
    return float((2. * np.pi) ** k * np.sum(w * np.prod(s, axis=-1) ** -1. * fn(s)))


@dataclass
class CutoffConvergence:
    '''
    Attributes:
        scales (list): cutoff scales k
        remainders (list): I(F - F_k, p0) on the truncated box
        total (float): I(F, p0) on the same box
        rtol (float): target ratio remainder/total
    '''
    scales: List[float] = field(default_factory=list)
    remainders: List[float] = field(default_factory=list)
    total: float = 0.
    rtol: float = 1e-3

    @property
    def monotone(self):
        r = self.remainders
        return all(b <= a * (1. + 1e-10) + 1e-300 for a, b in zip(r[:-1], r[1:]))

    @property
    def converged_at(self):
        '''First scale with remainder <= rtol * total, or None.'''
        for k, r in zip(self.scales, self.remainders):
            if r <= self.rtol * self.total:
                return k
        return None

    @property
    def verdict(self):
        return 'pass' if self.monotone and self.converged_at is not None else 'fail'


def cutoff_convergence(F, p0, geometry, doublings=6, k0=1., rtol=1e-3, panels=16, order=8):
    '''
    I(F - F_k, p0) for k = k0, 2 k0, ..., 2^doublings k0 on [s_min, s_max]^k.

    Returns:
        CutoffConvergence
    '''
    n = geometry.n
    beta = I_weight_exponent(p0, n)
    disc = math.pi ** (n - geometry.k)
    box = [(geometry.s_min, geometry.s_max)] * geometry.k
    result = CutoffConvergence(rtol=rtol)
    result.total = disc * log_box_integral(_integrand(F, p0, beta), box, panels, order)
    for i in range(doublings + 1):
        k = k0 * 2 ** i
        rem = disc * log_box_integral(_integrand(cutoff_remainder(F, k), p0, beta), box, panels, order)
        result.scales.append(k)
        result.remainders.append(rem)
        logger.debug("cutoff k = %g: I(F - F_k) = %.6e", k, rem)
    logger.info("cutoff convergence of %s: total %.6e, converged at k = %s", F.name, result.total,
                result.converged_at)
    return result


def grad_d_sup(grid):
    '''Grid sup of |grad d|_g computed from finite differences of d = log rho.'''
    d = distance_like(*grid.mesh)
    return float(np.sqrt(np.max(fd.grad_norm_sq(d, grid))))
