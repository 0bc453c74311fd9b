"""
The perturbed equation pulled back to quasi-coordinate charts.
"""
import logging
from dataclasses import dataclass

import numpy as np

from cuspma import quadrature
from cuspma.atlas.charts import image_s_range
from cuspma.solver.operator import _det

logger = logging.getLogger('cuspma')


@dataclass
class ChartResidual:
    '''
    Attributes:
        w (ndarray): chart sample points, shape (m, k)
        values (ndarray): det(g~ + phi~_{j kbar}) - e^{F~ + eps phi~} det g~
        normalized (ndarray): values / (det g~ e^{F~ + eps phi~})
        sup (float), normalized_sup (float): sup norms of the two
    '''
    w: np.ndarray
    values: np.ndarray
    normalized: np.ndarray
    sup: float
    normalized_sup: float


def quasi_chart_residual(phi, chart, F, eps=None, n_radial=8, n_angle=16):
    '''
    Residual of the pulled-back equation on a chart polydisc.

    The pullback of phi_{j kbar} through s_j(w_j) is phi_{jk} s_w_j conj(s_w_k)
    (s is harmonic in w), and g~ = diag(|s_w|^2 / s^2).

    Args:
        phi (SolutionField): solved field; evaluated through its bicubic interpolant
        chart (QuasiChart): chart whose image must lie in the solved box
        F (ForcingField): forcing
        eps (float): defaults to phi.eps

    Returns:
        ChartResidual
    '''
    eps = phi.eps if eps is None else eps
    interp = phi.interpolant()
    w, _ = quadrature.polydisc_rule(chart.radius, chart.k, n_radial, n_angle)
    s = chart.weight(w)
    sw = chart.weight_dw(w)
    cols = [s[:, j] for j in range(chart.k)]
    # raises InterpolationError when the image leaves the grid
    val = interp(*cols)
    D2 = interp.hessian(*cols)
    pull = D2 * sw[:, :, None] * np.conj(sw)[:, None, :]
    gt = np.abs(sw) ** 2 / s ** 2
    M = pull.copy()
    for j in range(chart.k):
        M[:, j, j] += gt[:, j]
    det_g = np.prod(gt, axis=-1)
    E = np.exp(F(*cols) + eps * val)
    lhs = np.real(_det(M))
    res = lhs - E * det_g
    norm = res / (E * det_g)
    logger.debug("chart %s: residual sup %.3e (normalized %.3e)", chart.index,
                 np.max(np.abs(res)), np.max(np.abs(norm)))
    return ChartResidual(w, res, norm, float(np.max(np.abs(res))), float(np.max(np.abs(norm))))


def residual_budget(phi, F, eps=None):
    '''
    Sup over cell midpoints of the interpolant's normalised reduced residual
    det(H) prod s^2 e^{-F - eps phi} - 1; the scale chart residuals are judged against.
    '''
    eps = phi.eps if eps is None else eps
    g = phi.grid
    interp = phi.interpolant()
    mids = 0.5 * (g.axis[1:] + g.axis[:-1])
    mesh = np.meshgrid(*([mids] * g.k), indexing='ij')
    cols = [m.ravel() for m in mesh]
    H = interp.hessian(*cols)
    for j in range(g.k):
        H[..., j, j] += cols[j] ** -2.
    rho2 = np.prod(np.stack(cols) ** 2, axis=0)
    r = _det(H) * rho2 * np.exp(-F(*cols) - eps * interp(*cols)) - 1.
    return float(np.max(np.abs(r)))


def chart_residual_family(phi, charts, F, eps=None):
    '''Normalised chart residual sups over a list of charts lying inside the solved box.'''
    return {c.index: quasi_chart_residual(phi, c, F, eps).normalized_sup for c in charts}


def charts_in_box(seq, geometry, radius=0.5):
    '''Charts of the sequence whose polydisc image lies inside [s_min, s_max]^k, shallowest first.'''
    out = []
    for chart in seq.charts(radius):
        ranges = [image_s_range(sigma, radius) for sigma in chart.sigma]
        if all(geometry.s_min <= lo and hi <= geometry.s_max for lo, hi in ranges):
            out.append(chart)
    return out
