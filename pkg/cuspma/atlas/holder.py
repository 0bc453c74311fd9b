"""
C^{k,alpha} norms in quasi-coordinates: a torus-invariant field is pulled back
through a chart and its derivatives are taken in the real coordinates of the
polydisc.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

logger = logging.getLogger('cuspma')


@dataclass(frozen=True)
class HolderNorm:
    '''
    Attributes:
        value (float): sum of derivative sups plus the top-order Hoelder seminorm
        sups (dict): multi-index -> sup |D^beta f|
        seminorm (float): [D^order f]_alpha over neighbouring sample pairs
    '''
    value: float
    sups: dict
    seminorm: float


def _pullback_samples(field, chart, m):
    r = chart.radius
    x = np.linspace(-r, r, m)
    h = x[1] - x[0]
    k = chart.k
    axes = np.meshgrid(*([x] * (2 * k)), indexing='ij')
    w = np.stack([axes[2 * j] + 1j * axes[2 * j + 1] for j in range(k)], axis=-1)
    inside = np.all(np.abs(w) < r, axis=-1)
    s = chart.weight(w[inside])
    vals = np.zeros(inside.shape)
    vals[inside] = field(*s.T)
    return vals, inside, h


def qc_holder_norm(field, chart, order=2, alpha=0.5, m=None):
    '''
    Hoelder norm of the pullback field o Phi on the chart polydisc.

    Args:
        field (callable): vectorised f(*s) on the model domain
        chart (QuasiChart): chart to pull back through
        order (int): number of derivatives
        alpha (float): Hoelder exponent in (0, 1]
        m (int): samples per real axis (default 41 for one factor, 13 for two)

    Returns:
        HolderNorm
    '''
    k = chart.k
    if m is None:
        m = 41 if k == 1 else 13
    vals, inside, h = _pullback_samples(field, chart, m)
    dim = 2 * k
    valid = ndimage.binary_erosion(inside, iterations=order + 1)
    sups = {}
    derivs = {(): vals}
    for level in range(1, order + 1):
        for beta in itertools.combinations_with_replacement(range(dim), level):
            parent = derivs[beta[:-1]]
            derivs[beta] = np.gradient(parent, h, axis=beta[-1])
    for beta, d in derivs.items():
        sups[beta] = float(np.max(np.abs(d[valid]))) if np.any(valid) else 0.
    semi = 0.
    pair_ok = valid
    for beta in itertools.combinations_with_replacement(range(dim), order):
        d = derivs[beta]
        for ax in range(dim):
            a = np.moveaxis(d, ax, 0)
            v = np.moveaxis(pair_ok, ax, 0)
            both = v[1:] & v[:-1]
            if np.any(both):
                semi = max(semi, float(np.max(np.abs(a[1:] - a[:-1])[both])) / h ** alpha)
    total = sum(sups.values()) + semi
    logger.debug("qc Hoelder norm on chart %s: %.6e", chart.index, total)
    return HolderNorm(float(total), sups, float(semi))


@dataclass
class HolderFamily:
    norms: List[HolderNorm]
    indices: list
    max_norm: float


def qc_holder_family(field, sequence, order=2, alpha=0.5, radius=0.5, charts=None, m=None):
    '''Per-chart Hoelder norms over a covering sequence and their maximum.'''
    charts = charts if charts is not None else sequence.charts(radius)
    norms = [qc_holder_norm(field, c, order, alpha, m) for c in charts]
    return HolderFamily(norms, [c.index for c in charts], max(n.value for n in norms))
