"""
Per-eps norm table of a solved family and its uniformity verdicts.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from cuspma import grid as fd
from cuspma.estimates.measures import I_functional, I_weight_exponent

logger = logging.getLogger('cuspma')

COLUMNS = ('eps', 'sup_phi', 'sup_grad', 'sup_lap', 'sup_trace', 'w3_surrogate', 'I_F',
           'max_principle_gap', 'iterations', 'residual_sup', 'under_resolved')
UNIFORM_COLUMNS = ('sup_phi', 'sup_grad', 'sup_lap')


def w3_surrogate(phi, p0, n=None):
    '''
    int |T|^p0 rho^{(p0-2)/(2n-2)} dV with T_ijk = s_i s_j s_k d^3 phi / ds_i ds_j ds_k,
    the third derivatives measured in the model metric.
    '''
    grid = phi.grid
    n = grid.geometry.n if n is None else n
    if n < 2:
        return float('nan')
    beta = I_weight_exponent(p0, n)
    D3 = fd.third_derivatives(phi.values, grid.h, grid.k)
    s = np.stack(grid.mesh, axis=-1)
    T = D3 * s[..., :, None, None] * s[..., None, :, None] * s[..., None, None, :]
    norm = np.sqrt(np.sum(T ** 2, axis=(-3, -2, -1)))
    return grid.integrate(norm ** p0 * grid.rho ** beta)


def truncation_audit(phi, F=None, min_cells=4, max_ratio=0.05):
    '''
    Under-resolution flags: forcing support narrower than min_cells cells, or
    (1/12) max|delta^4 phi| / max|delta^2 phi| above max_ratio along some axis.

    Returns:
        flagged (bool), details (dict)
    '''
    grid = phi.grid
    cells = F.support_cells(grid) if F is not None and hasattr(F, 'support_cells') else grid.N
    ratios = []
    for j in range(grid.k):
        d4 = np.max(np.abs(fd.fourth_difference(phi.values, grid.h, j)))
        d2 = np.max(np.abs(fd.d2(phi.values, grid.h, j))) * grid.h ** 2
        ratios.append(0. if d2 == 0. else d4 / (12. * d2))
    ratio = max(ratios)
    flagged = bool(cells < min_cells or ratio > max_ratio)
    return flagged, {'support_cells': cells, 'truncation_ratio': ratio}


@dataclass
class EstimateReport:
    '''
    Attributes:
        rows (list): one dict per eps with the COLUMNS keys
        uniformity (dict): column -> max/median over eps
        verdicts (dict): check-id -> pass | fail | flagged
        factor (float): declared uniformity factor
    '''
    rows: List[dict] = field(default_factory=list)
    uniformity: Dict[str, float] = field(default_factory=dict)
    verdicts: Dict[str, str] = field(default_factory=dict)
    factor: float = 2.

    def column(self, name):
        return [r[name] for r in self.rows]


def _uniformity(values):
    vals = np.abs(np.asarray(values, dtype=float))
    med = float(np.median(vals))
    mx = float(np.max(vals))
    if mx == 0.:
        return 1.
    if med == 0.:
        return np.inf
    return mx / med


def norm_report(family, geometry=None, p0=6., factor=2., tol=1e-10):
    '''
    Norm table over a SolutionFamily with uniformity, Cauchy, maximum-principle
    and truncation verdicts.

    Args:
        family (SolutionFamily): converged family
        geometry (ModelGeometry): defaults to the grid's geometry
        p0 (float): exponent of the weighted functional and W^{3,p0} surrogate
        factor (float): allowed max/median ratio of each norm column

    Returns:
        EstimateReport
    '''
    report = EstimateReport(factor=factor)
    if not family.fields:
        return report
    grid = family.fields[0].grid
    geometry = geometry or grid.geometry
    F = family.forcing
    I_val = float('nan')
    if F is not None and geometry.n >= 2:
        I_val = I_functional(F, p0, geometry, warn=False).value
    flagged_any = False
    mp_ok = True
    for eps, phi in zip(family.schedule, family.fields):
        lap = phi.laplacian[grid.interior]
        flagged, _ = truncation_audit(phi, F)
        flagged_any = flagged_any or flagged
        gap = phi.info.get('max_principle_gap', eps * phi.sup)
        mp_ok = mp_ok and gap <= tol + 1e-12
        row = {
            'eps': eps,
            'sup_phi': phi.sup,
            'sup_grad': float(np.sqrt(np.max(phi.grad_norm_sq))),
            'sup_lap': float(np.max(np.abs(lap))) if lap.size else 0.,
            'sup_trace': float(np.max(phi.trace[grid.interior])),
            'w3_surrogate': w3_surrogate(phi, p0, geometry.n),
            'I_F': I_val,
            'max_principle_gap': gap,
            'iterations': phi.iterations,
            'residual_sup': phi.history[-1] if phi.history else 0.,
            'under_resolved': flagged,
        }
        report.rows.append(row)
        logger.info("eps = %g: |phi| = %.6e, |grad| = %.6e, |lap| = %.6e", eps, row['sup_phi'],
                    row['sup_grad'], row['sup_lap'])
    for col in UNIFORM_COLUMNS:
        report.uniformity[col] = _uniformity(report.column(col))
        report.verdicts['uniform_' + col] = 'pass' if report.uniformity[col] <= factor else 'fail'
    if len(family.cauchy) > 1:
        # an exact fixed point has identically vanishing differences
        ok = family.cauchy_decreasing or max(family.cauchy) <= tol
        report.verdicts['cauchy_decreasing'] = 'pass' if ok else 'fail'
    report.verdicts['max_principle'] = 'pass' if mp_ok else 'fail'
    if flagged_any:
        report.verdicts['truncation_audit'] = 'flagged'
    return report
