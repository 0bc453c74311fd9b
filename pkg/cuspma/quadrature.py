"""
Gauss-Legendre rules for the cusp model: 1d and composite rules, tensor
rules on boxes in s, polydisc rules for chart integrals and a refinement
helper that flags unconverged estimates.
"""
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

logger = logging.getLogger('cuspma')


def gauss_legendre(npt, a=-1., b=1.):
    '''
    Gauss-Legendre nodes and weights of order npt mapped to [a, b].

    Returns:
        x (ndarray): nodes
        w (ndarray): weights
    '''
    x, w = special.roots_legendre(npt)
    half = 0.5 * (b - a)
    return a + half * (x + 1.), half * w


def composite_gauss(a, b, panels, order):
    '''Composite rule: `panels` equal panels of [a, b], `order` nodes each.'''
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(order, lo, hi)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def tensor_gauss(box, panels=4, order=8):
    '''
    Tensor composite rule on a box.

    Args:
        box (sequence): [(a_1, b_1), ..., (a_k, b_k)]
        panels (int): panels per axis
        order (int): nodes per panel

    Returns:
        pts (ndarray): (N, k) nodes
        wts (ndarray): (N,) weights
    '''
    rules = [composite_gauss(a, b, panels, order) for a, b in box]
    grids = np.meshgrid(*[r[0] for r in rules], indexing='ij')
    wgrid = np.meshgrid(*[r[1] for r in rules], indexing='ij')
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in wgrid], axis=-1), axis=-1)
    return pts, wts


def disc_rule(radius, n_radial=16, n_angle=32):
    '''
    Area rule on the disc |w| < radius: Gauss-Legendre in r (with the r dr
    Jacobian folded into the weights) times the trapezoid rule in angle.

    Returns:
        w (ndarray): complex nodes
        wts (ndarray): area weights, summing to pi radius^2 up to rounding
    '''
    r, wr = gauss_legendre(n_radial, 0., radius)
    t = 2. * np.pi * np.arange(n_angle) / n_angle
    wt = np.full(n_angle, 2. * np.pi / n_angle)
    rr, tt = np.meshgrid(r, t, indexing='ij')
    ww = np.outer(wr * r, wt)
    return (rr * np.exp(1j * tt)).ravel(), ww.ravel()


def polydisc_rule(radius, k, n_radial=16, n_angle=32):
    '''Tensor product of disc_rule over k factors; nodes have shape (N, k).'''
    w1, a1 = disc_rule(radius, n_radial, n_angle)
    if k == 1:
        return w1[:, None], a1
    grids = np.meshgrid(*([np.arange(w1.size)] * k), indexing='ij')
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    return w1[idx], np.prod(a1[idx], axis=-1)


@dataclass(frozen=True)
class QuadratureResult:
    '''
    Attributes:
        value (float): estimate at the finest level
        coarse (float): estimate one level below
        rel_change (float): |value - coarse| / max(|value|, tiny)
        converged (bool): rel_change within tolerance
        level (int): refinement level of `value`
    '''
    value: float
    coarse: float
    rel_change: float
    converged: bool
    level: int


def refine(estimate, rtol=1e-8, atol=1e-14, level=1, warn=True):
    '''
    Compare an estimate at `level` and `level - 1`.

    Args:
        estimate (callable): level -> float
        rtol, atol (float): acceptance of the level-to-level change

    Returns:
        QuadratureResult
    '''
    coarse = float(estimate(level - 1))
    fine = float(estimate(level))
    change = abs(fine - coarse)
    rel = change / max(abs(fine), 1e-300)
    ok = change <= atol + rtol * abs(fine)
    if not ok and warn:
        warnings.warn("quadrature estimate changed by %.3e (relative) under refinement" % rel)
    logger.debug("refine level %d: %.16e -> %.16e", level, coarse, fine)
    return QuadratureResult(fine, coarse, rel, bool(ok), level)
