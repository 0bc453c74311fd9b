"""
Auxiliary quantities of the gradient and Laplacian estimates and pointwise
checks of their differential inequalities on solved fields.

All gradient norms here are the (1,0) norms |d h|^2_g = sum_j s_j^2 (dh/ds_j)^2,
Laplacians are complex (Delta phi = tr_g g' - n) and Delta' h = tr(H^{-1} D^2 h).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from cuspma import grid as fd
from cuspma.errors import UnsupportedError
from cuspma.solver.operator import _forcing_values, perturbed_hessian

logger = logging.getLogger('cuspma')

# |Gauss curvature| of a cusp factor and -inf_{i != l} R_{i i l l} of the product model
DEFAULT_B = 4.
DEFAULT_BISECTIONAL_FLOOR = 0.


def _dz_norm_sq(values, grid):
    g = fd.gradient(values, grid.h, grid.k)
    s = np.stack(grid.mesh, axis=-1)
    return np.sum((s * g) ** 2, axis=-1)


def _laplacian_prime(values, H, grid):
    D2 = fd.hessian(values, grid.h, grid.k)
    return np.einsum('...ij,...ji->...', np.linalg.inv(H), D2)


@dataclass
class AuxiliaryFields:
    '''
    Attributes:
        u (ndarray): e^{-A(phi)} |d phi|^2_g with A(t) = (B+2) t - t^2/(2 C0)
        A_prime (ndarray): A'(phi) = B + 2 - phi/C0
        w (ndarray): e^{-A5 phi} tr_g g'
        trace (ndarray): tr_g g'
        B (float): curvature bound feeding A(t)
        C0 (float): 1 + ||phi||_inf
        A5 (float): -inf_{i != l} R_{i i l l} + 1
        theta (float): (1/2) exp(-(A5 ||phi|| + ||F + eps phi||)/(n-1))
        C0_lap (float): (|R| + 2n) e^{A5 ||phi||}
        C_theta (float): max_w ((n A5 + eps) w - theta w^{n/(n-1)})
        C1 (float): coefficient of the u^{1+1/n} term in the gradient inequality
    '''
    u: np.ndarray
    A_prime: np.ndarray
    A_of_phi: np.ndarray
    w: np.ndarray
    trace: np.ndarray
    B: float
    C0: float
    A5: float
    theta: float = np.nan
    C0_lap: float = np.nan
    C_theta: float = np.nan
    C1: float = np.nan
    constants: dict = field(default_factory=dict)


def auxiliary_fields(phi, F, B=DEFAULT_B, bisectional_floor=DEFAULT_BISECTIONAL_FLOOR, scalar_curvature=None):
    '''
    Assemble u, w and the constants of the gradient and Laplacian estimates.

    Args:
        phi (SolutionField): converged solution
        F (ForcingField or ndarray): forcing
        B (float): measured curvature bound (see geometry.measure_bounds)
        bisectional_floor (float): measured -inf_{i != l} R_{i i l l}
        scalar_curvature (float): |R| of the background, default 2n

    Returns:
        AuxiliaryFields
    '''
    grid = phi.grid
    n = grid.geometry.n
    eps = phi.eps
    v = phi.values
    Fv = _forcing_values(F, grid)
    R = 2. * n if scalar_curvature is None else scalar_curvature
    sup_phi = float(np.max(np.abs(v)))
    sup_Fp = float(np.max(np.abs(Fv + eps * v)))
    C0 = 1. + sup_phi
    A_of_phi = (B + 2.) * v - v ** 2 / (2. * C0)
    A_prime = B + 2. - v / C0
    u = np.exp(-A_of_phi) * _dz_norm_sq(v, grid)
    trace = n + fd.laplacian(v, grid)
    A5 = bisectional_floor + 1.
    w = np.exp(-A5 * v) * trace
    aux = AuxiliaryFields(u, A_prime, A_of_phi, w, trace, B, C0, A5)
    aux.C1 = n * (np.exp(-sup_Fp) / (C0 * (n - 1.) ** (n - 1.))) ** (1. / n)
    if n >= 2:
        q = n / (n - 1.)
        aux.theta = 0.5 * np.exp(-(A5 * sup_phi + sup_Fp) / (n - 1.))
        aux.C0_lap = (R + 2. * n) * np.exp(A5 * sup_phi)
        lin = n * A5 + eps
        wstar = (lin / (q * aux.theta)) ** (1. / (q - 1.))
        aux.C_theta = lin * wstar - aux.theta * wstar ** q
    aux.constants = {'B': B, 'C0': C0, 'A5': A5, 'theta': aux.theta, 'C0_lap': aux.C0_lap,
                     'C_theta': aux.C_theta, 'C1': aux.C1, 'R': R}
    logger.debug("auxiliary constants: %s", aux.constants)
    return aux


@dataclass
class InequalityCheck:
    '''
    Pointwise comparison lhs >= rhs on the nodes at distance >= 2 from the boundary.

    Attributes:
        which (str): grad, lap or trace
        lhs, rhs, band (ndarray): the two sides and the tolerance band
        violations (ndarray): bool mask of lhs < rhs - band
        count (int): number of violating nodes
        measure (float): dV measure of the violation set
        min_slack (float): min of lhs - rhs over the checked nodes
        constants (dict): constants used
    '''
    which: str
    lhs: np.ndarray
    rhs: np.ndarray
    band: np.ndarray
    violations: np.ndarray
    count: int
    measure: float
    min_slack: float
    constants: dict

    @property
    def verdict(self):
        return 'pass' if self.count == 0 else 'fail'


def _deep_interior(grid):
    mask = np.zeros(grid.shape, dtype=bool)
    mask[(slice(2, -2),) * grid.k] = True
    return mask


def _fd_band(field_values, H, grid, extra=None):
    '''(h^2/12) times the local fourth-difference size, scaled by tr H^{-1}, plus 1e-9.'''
    h = grid.h
    d4 = sum(np.abs(fd.fourth_difference(field_values, h, j)) for j in range(grid.k)) / h ** 4
    band = (h ** 2 / 12.) * np.abs(np.trace(np.linalg.inv(H), axis1=-2, axis2=-1)) * d4
    if extra is not None:
        band = band + extra
    return band + 1e-9


def differential_inequality_check(phi, F, which, aux=None, B=DEFAULT_B):
    '''
    Evaluate one of the estimate inequalities pointwise on a solved field.

    which = 'trace': tr_{g'} g >= e^{-(F + eps phi)/(n-1)} (tr_g g')^{1/(n-1)}
    which = 'lap':   Delta' w >= theta w^{n/(n-1)} - (C0_lap + C_theta) + e^{-A5 phi} Delta F
    which = 'grad':  Delta' u >= C1 e^{-A} |d phi|^{2+2/n} - ((n+2) A' + 2) e^{-A} |d phi|^2
                                + e^{-A} (tr_g g' - 2n) - 2 e^{-A} |d(F + eps phi)| |d phi|

    Args:
        phi (SolutionField): converged solution
        F (ForcingField or ndarray): forcing
        which (str): 'grad', 'lap' or 'trace'
        aux (AuxiliaryFields): precomputed auxiliary fields

    Returns:
        InequalityCheck
    '''
    grid = phi.grid
    n = grid.geometry.n
    eps = phi.eps
    v = phi.values
    Fv = _forcing_values(F, grid)
    key = which.lower()
    if key in ('lap', 'trace') and n < 2:
        raise UnsupportedError("the %s inequality needs n >= 2" % key)
    aux = aux or auxiliary_fields(phi, Fv, B)
    H = perturbed_hessian(v, grid)
    mask = _deep_interior(grid)

    if key == 'trace':
        G = np.zeros_like(H)
        for j in range(grid.k):
            G[..., j, j] = grid.mesh[j] ** -2.
        lhs = np.einsum('...ij,...ji->...', np.linalg.inv(H), G)
        rhs = np.exp(-(Fv + eps * v) / (n - 1.)) * np.abs(aux.trace) ** (1. / (n - 1.))
        band = 1e-8 * (1. + np.abs(rhs))
    elif key == 'lap':
        lhs = _laplacian_prime(aux.w, H, grid)
        dF = fd.laplacian(Fv, grid)
        C = aux.C0_lap + aux.C_theta
        rhs = aux.theta * np.abs(aux.w) ** (n / (n - 1.)) - C + np.exp(-aux.A5 * v) * dF
        fband = (grid.h ** 2 / 12.) * sum(grid.mesh[j] ** 2 * np.abs(fd.fourth_difference(Fv, grid.h, j))
                                          for j in range(grid.k)) / grid.h ** 4
        band = _fd_band(aux.w, H, grid, fband)
    elif key == 'grad':
        lhs = _laplacian_prime(aux.u, H, grid)
        g2 = _dz_norm_sq(v, grid)
        eA = np.exp(-aux.A_of_phi)
        dFp = np.sqrt(_dz_norm_sq(Fv + eps * v, grid))
        rhs = (aux.C1 * eA * g2 ** (1. + 1. / n) - ((n + 2.) * aux.A_prime + 2.) * eA * g2
               + eA * (aux.trace - 2. * n) - 2. * eA * dFp * np.sqrt(g2))
        band = _fd_band(aux.u, H, grid)
    else:
        raise NotImplementedError("unknown inequality %r: use grad, lap or trace" % (which,))

    slack = lhs - rhs
    viol = mask & (slack < -band)
    count = int(np.sum(viol))
    measure = float(np.sum(grid.volume_weights()[viol]))
    min_slack = float(np.min(slack[mask]))
    if count:
        logger.info("%s inequality: %d violating nodes (dV measure %.3e)", key, count, measure)
    return InequalityCheck(key, lhs, rhs, band, viol, count, measure, min_slack, dict(aux.constants))
