"""
Truncated divergence integrals of u^p grad' u toward the cusp.

With torus invariance dV' = det(H) ds dtheta and, cof(H) being divergence
free, det(H) Delta' h = div_s(cof(H) grad_s h). For h = u^{p+1}/(p+1) the
probe measures the flux of cof(H) grad h through the cusp-side faces
{max_j s_j = S} of the sub-box [s_min, S]^k and the divergence integral
over the shells between successive S. gaffney_growth repeats the face flux
on nested solved boxes, which is the limit the identity is about.
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from cuspma import grid as fd
from cuspma.errors import PreconditionError
from cuspma.estimates.auxiliary import DEFAULT_B, auxiliary_fields
from cuspma.solver.newton import newton_solve
from cuspma.solver.operator import perturbed_hessian

logger = logging.getLogger('cuspma')

CONTROLS = ('grad_rho', 'grad_log_rho')


def cofactor(H):
    '''Cofactor (adjugate transpose) of a stack of symmetric 1x1 or 2x2 matrices.'''
    k = H.shape[-1]
    if k == 1:
        return np.ones_like(H)
    out = np.empty_like(H)
    out[..., 0, 0] = H[..., 1, 1]
    out[..., 1, 1] = H[..., 0, 0]
    out[..., 0, 1] = -H[..., 1, 0]
    out[..., 1, 0] = -H[..., 0, 1]
    return out


def _trapezoid_1d(m, h):
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _node_index(grid, S):
    i = int(round((S - grid.axis[0]) / grid.h))
    if i < 1 or i > grid.N:
        raise PreconditionError("truncation S = %g lies outside the solved box" % S)
    return i


def _face_flux(grid, V, i):
    '''(2 pi)^k times the outward flux of V through the faces s_j = axis[i] of [s_min, axis[i]]^k.'''
    k = grid.k
    sub = V[(slice(0, i + 1),) * k]
    total = 0.
    for j in range(k):
        face = np.take(sub, i, axis=j)[..., j]
        if k > 1:
            face = np.sum(face * _trapezoid_1d(i + 1, grid.h))
        total += float(face)
    return (2. * np.pi) ** k * total


def _box_integral(grid, f, i):
    k = grid.k
    sub = f[(slice(0, i + 1),) * k]
    w1 = _trapezoid_1d(i + 1, grid.h)
    w = w1
    for _ in range(k - 1):
        w = np.multiply.outer(w, w1)
    return (2. * np.pi) ** k * float(np.sum(w * sub))


def _divergence(grid, V):
    return sum(fd.d1(V[..., j], grid.h, j) for j in range(grid.k))


@dataclass
class GaffneyResult:
    '''
    Attributes:
        S (list): truncation levels (grid nodes)
        flux (list): flux of cof(H) grad h through {max s = S}
        box_integrals (list): int_{[s_min, S]^k} div(cof(H) grad h) ds dtheta
        shell_integrals (list): differences of box_integrals between successive S
        p (float): exponent of u
        label (str): field the probe was run on
    '''
    S: List[float] = field(default_factory=list)
    flux: List[float] = field(default_factory=list)
    box_integrals: List[float] = field(default_factory=list)
    shell_integrals: List[float] = field(default_factory=list)
    p: float = 1.
    label: str = 'u'

    @property
    def vanishing(self):
        '''|flux| at least halves from each truncation to the next.'''
        f = np.abs(self.flux)
        if f.size < 2 or np.all(f == 0.):
            return True
        return bool(np.all(f[1:] <= 0.5 * f[:-1]))

    @property
    def verdict(self):
        return 'pass' if self.vanishing else 'fail'


def default_truncations(grid, levels=3):
    '''S with S - s_min halving down from (s_max - s_min)/2, snapped to grid nodes.'''
    width = grid.axis[-1] - grid.axis[0]
    S = [grid.axis[0] + width * 2. ** -(levels - i) for i in range(levels)]
    idx = sorted({max(1, _node_index(grid, s)) for s in S})
    return [float(grid.axis[i]) for i in idx]


def _probe(grid, H, grad_h, S, p, label):
    V = np.einsum('...ij,...j->...i', cofactor(H), grad_h)
    div = _divergence(grid, V)
    result = GaffneyResult(p=p, label=label)
    for s in S:
        i = _node_index(grid, s)
        result.S.append(float(grid.axis[i]))
        result.flux.append(_face_flux(grid, V, i))
        result.box_integrals.append(_box_integral(grid, div, i))
    result.shell_integrals = list(np.diff(result.box_integrals))
    logger.debug("gaffney %s (p = %g): flux %s", label, p, result.flux)
    return result


def gaffney_probe(phi, p=1., aux=None, S=None, F=None):
    '''
    Flux and shell divergence integrals of u^p grad' u on nested truncations.

    Args:
        phi (SolutionField): converged solution
        p (float): exponent
        aux (AuxiliaryFields): supplies u; built from phi and F when omitted
        S (list): increasing truncation levels, default default_truncations
        F (ForcingField): forcing, needed only when aux is omitted

    Returns:
        GaffneyResult
    '''
    grid = phi.grid
    aux = aux or auxiliary_fields(phi, F)
    S = sorted(S) if S is not None else default_truncations(grid)
    h = np.abs(aux.u) ** (p + 1.) / (p + 1.)
    H = perturbed_hessian(phi.values, grid)
    return _probe(grid, H, fd.gradient(h, grid.h, grid.k), S, p, 'u')


def gaffney_control(grid, which='grad_rho', S=None):
    '''
    The probe on the model metric with X = grad rho (not in L^1, flux grows like
    log S for two cusp factors) or X = grad log rho (integrable, flux ~ 1/S).
    '''
    if which not in CONTROLS:
        raise NotImplementedError("unknown control %r: use %s" % (which, ', '.join(CONTROLS)))
    S = sorted(S) if S is not None else default_truncations(grid)
    H = perturbed_hessian(grid.zeros(), grid)
    s = np.stack(grid.mesh, axis=-1)
    rho = grid.rho[..., None]
    X = rho / s if which == 'grad_rho' else 1. / s
    return _probe(grid, H, X, S, 0., which)


def control_flux(which, S, s_min, k):
    '''Closed-form model flux of the two controls through {max s = S}.'''
    if which == 'grad_rho':
        per_face = np.log(S / s_min) ** (k - 1)
    elif which == 'grad_log_rho':
        per_face = (1. / s_min - 1. / S) ** (k - 1) / S
    else:
        raise NotImplementedError("unknown control %r" % (which,))
    return (2. * np.pi) ** k * k * per_face


@dataclass
class GaffneyGrowth:
    '''
    Attributes:
        s_max (list): truncations of the nested solved boxes
        flux (list): flux of cof(H) grad h through the outer faces {max s = s_max}
        box_integrals (list): divergence integral over each whole box
        iterations (list): Newton iterations per box
        p (float): exponent of u
    '''
    s_max: List[float] = field(default_factory=list)
    flux: List[float] = field(default_factory=list)
    box_integrals: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    p: float = 1.

    @property
    def vanishing(self):
        '''|flux| strictly decreases with the box and ends below half its first value.'''
        f = np.abs(self.flux)
        if f.size < 2 or np.all(f == 0.):
            return True
        return bool(np.all(f[1:] < f[:-1]) and f[-1] <= 0.5 * f[0])

    @property
    def verdict(self):
        return 'pass' if self.vanishing else 'fail'


def gaffney_growth(F, config, geometry, p=1., levels=3, B=DEFAULT_B):
    '''
    Gaffney probe under domain growth: solve on boxes of width W, 2W, 4W, ...
    at the spacing of config.grid and record the flux through the outer faces.

    Args:
        F (ForcingField): compactly supported forcing
        config (SolverConfig): solver controls; config.epsilon is used
        geometry (ModelGeometry): the first (smallest) box
        p (float): exponent of u
        levels (int): number of nested boxes
        B (float): bound on the holomorphic bisectional curvature, passed to auxiliary_fields

    Returns:
        GaffneyGrowth
    '''
    if not getattr(F, 'compact', False):
        raise PreconditionError("domain growth needs a compactly supported forcing, got %r"
                                % getattr(F, 'name', F))
    if levels < 2:
        raise PreconditionError("domain growth needs at least two boxes")
    width = geometry.s_max - geometry.s_min
    result = GaffneyGrowth(p=p)
    for level in range(levels):
        g = geometry.with_s_max(geometry.s_min + width * 2 ** level)
        grid = fd.TorusGrid(g, config.grid * 2 ** level)
        phi = newton_solve(F, config, grid=grid)
        aux = auxiliary_fields(phi, F, B)
        res = gaffney_probe(phi, p, aux, S=[g.s_max])
        result.s_max.append(g.s_max)
        result.flux.append(res.flux[0])
        result.box_integrals.append(res.box_integrals[0])
        result.iterations.append(phi.iterations)
        logger.info("gaffney growth: s_max = %g, N = %d, flux %.3e", g.s_max, grid.N, res.flux[0])
    return result
