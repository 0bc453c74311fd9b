"""
Torus-invariant reduction of the perturbed complex Monge-Ampere equation.

With g the model metric and phi = phi(s), the equation
(omega + i ddbar phi)^n = e^{F + eps phi} omega^n becomes, with
H = diag(s_j^{-2}) + D^2 phi,

    det H - e^{F + eps phi} prod_j s_j^{-2} = 0.

The unknowns are the interior nodes; phi = 0 on the boundary of the box.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy import interpolate

from cuspma import grid as fd
from cuspma.errors import InterpolationError, PositivityError, UnsupportedError
from cuspma.forcing import ForcingField, GridForcing, bump, bump_d1, bump_d2

logger = logging.getLogger('cuspma')


def check_dimension(geometry):
    if geometry.k not in (1, 2) or geometry.n != geometry.k:
        raise UnsupportedError("the solver handles n = k in {1, 2}, got n = %d, k = %d"
                               % (geometry.n, geometry.k))


class SolutionInterpolant:
    '''
    Cubic spline of a grid field with derivatives up to second order
    (bicubic for two cusp factors).
    '''

    def __init__(self, grid, values):
        self.grid = grid
        self.lo, self.hi = grid.axis[0], grid.axis[-1]
        if grid.k == 1:
            self._spl = interpolate.CubicSpline(grid.axis, values)
        else:
            self._spl = interpolate.RectBivariateSpline(grid.axis, grid.axis, values, kx=3, ky=3, s=0)

    def _check(self, s):
        for sj in s:
            sj = np.asarray(sj)
            if np.any(sj < self.lo - 1e-12) or np.any(sj > self.hi + 1e-12):
                raise InterpolationError("point outside the solved box [%g, %g]" % (self.lo, self.hi))

    def __call__(self, *s, d=None):
        '''Value (d=None) or the derivative with orders d = (d_1, ..., d_k).'''
        self._check(s)
        d = d or (0,) * self.grid.k
        if self.grid.k == 1:
            return self._spl(np.asarray(s[0]), d[0])
        s1, s2 = np.broadcast_arrays(np.asarray(s[0], dtype=float), np.asarray(s[1], dtype=float))
        return self._spl.ev(s1, s2, dx=d[0], dy=d[1])

    def gradient(self, *s):
        k = self.grid.k
        return [self(*s, d=tuple(int(i == j) for i in range(k))) for j in range(k)]

    def hessian(self, *s):
        k = self.grid.k
        shape = np.broadcast(*[np.asarray(x) for x in s]).shape
        out = np.empty(shape + (k, k))
        for a in range(k):
            for b in range(a, k):
                order = [0] * k
                order[a] += 1
                order[b] += 1
                out[..., a, b] = out[..., b, a] = self(*s, d=tuple(order))
        return out


@dataclass
class SolutionField(fd.ScalarField):
    '''
    Grid values of phi (boundary included) with derived fields.

    Attributes:
        grid (TorusGrid)
        values (ndarray): phi at every node
        eps (float): perturbation parameter the field solves for
        iterations (int): Newton iterations used
        history (list): scaled residual sup-norm per iteration
        residual (ndarray): unscaled residual at the nodes (zero on the boundary)
        info (dict): solver diagnostics (step lengths, min eigenvalues, ...)
    '''
    eps: float = 1.
    iterations: int = 0
    history: List[float] = field(default_factory=list)
    residual: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, grid, eps=1.):
        return cls(grid, grid.zeros(), eps)

    @classmethod
    def from_function(cls, grid, fn, eps=1.):
        return cls(grid, np.broadcast_to(fn(*grid.mesh), grid.shape).astype(float), eps)

    def copy(self):
        return SolutionField(self.grid, self.values.copy(), self.eps, self.iterations,
                             list(self.history), None if self.residual is None else self.residual.copy(),
                             dict(self.info))

    @property
    def gradient(self):
        return fd.gradient(self.values, self.grid.h, self.grid.k)

    @property
    def hessian(self):
        return fd.hessian(self.values, self.grid.h, self.grid.k)

    @property
    def H(self):
        return perturbed_hessian(self.values, self.grid)

    @property
    def laplacian(self):
        return fd.laplacian(self.values, self.grid)

    @property
    def trace(self):
        '''tr_g g' = n + Delta phi.'''
        return self.grid.k + self.laplacian

    @property
    def grad_norm_sq(self):
        return fd.grad_norm_sq(self.values, self.grid)

    def interpolant(self):
        return SolutionInterpolant(self.grid, self.values)


def perturbed_hessian(values, grid):
    '''H = diag(s_j^{-2}) + D^2 phi at every node, shape grid.shape + (k, k).'''
    H = fd.hessian(values, grid.h, grid.k)
    for j in range(grid.k):
        H[..., j, j] += grid.mesh[j] ** -2.
    return H


def _forcing_values(F, grid):
    if F is None:
        return grid.zeros()
    if isinstance(F, ForcingField):
        return F.sample(grid)
    return np.asarray(F, dtype=float)


@dataclass(frozen=True)
class ResidualField:
    '''
    Attributes:
        values (ndarray): residual at every node, zero on the boundary
        flagged (bool): H failed positivity at some interior node
        scaled (bool): rows multiplied by prod_j s_j^2
    '''
    values: np.ndarray
    flagged: bool
    scaled: bool

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))


def _det(H):
    if H.shape[-1] == 1:
        return H[..., 0, 0]
    return H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]


def reduce_ma_operator(phi, F, eps, scaled=False):
    '''
    Residual det H - e^{F + eps phi} prod_j s_j^{-2} at the interior nodes.

    Args:
        phi (SolutionField): candidate solution
        F (ForcingField or ndarray): forcing, or its grid samples
        eps (float): perturbation parameter
        scaled (bool): multiply by prod_j s_j^2, the form Newton works with

    Returns:
        ResidualField
    '''
    grid = phi.grid
    check_dimension(grid.geometry)
    Fv = _forcing_values(F, grid)
    H = perturbed_hessian(phi.values, grid)
    dens = grid.density
    res = _det(H) - np.exp(Fv + eps * phi.values) * dens
    if scaled:
        res = res / dens
    res = np.where(grid.interior, res, 0.)
    eig = np.linalg.eigvalsh(H[grid.interior])
    flagged = bool(np.any(eig[..., 0] <= 0.))
    if flagged:
        logger.debug("reduce_ma_operator: H not positive definite at some interior node")
    return ResidualField(res, flagged, scaled)


def _d1_matrix(m, h):
    off = np.ones(m - 1) / (2. * h)
    return sp.diags([-off, off], [-1, 1], format='csr')


def _d2_matrix(m, h):
    return sp.diags([np.ones(m - 1), -2. * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format='csr') / h ** 2


def jacobian(phi, F, eps):
    '''
    Exact Jacobian of the scaled residual with respect to the interior values.

    Returns:
        scipy.sparse.csr_matrix of size (N-1)^k
    '''
    grid = phi.grid
    Fv = _forcing_values(F, grid)
    inner = (slice(1, -1),) * grid.k
    m = grid.N - 1
    D2 = _d2_matrix(m, grid.h)
    E = np.exp(Fv + eps * phi.values)[inner].ravel()
    s = [x[inner].ravel() for x in grid.mesh]
    if grid.k == 1:
        J = D2 - sp.diags(eps * E * s[0] ** -2.)
        return sp.csr_matrix(sp.diags(s[0] ** 2) @ J)
    I = sp.identity(m, format='csr')
    D1 = _d1_matrix(m, grid.h)
    H = perturbed_hessian(phi.values, grid)[inner]
    a = H[..., 0, 0].ravel()
    b = H[..., 1, 1].ravel()
    c = H[..., 0, 1].ravel()
    ab = s[0] ** -2. * s[1] ** -2.
    J = (sp.diags(b) @ sp.kron(D2, I) + sp.diags(a) @ sp.kron(I, D2)
         - sp.diags(2. * c) @ sp.kron(D1, D1) - sp.diags(eps * E * ab))
    return sp.csr_matrix(sp.diags(1. / ab) @ J)


@dataclass(frozen=True)
class PositivityVerdict:
    '''
    Attributes:
        positive (bool): H positive definite at every checked node
        min_eigenvalue (float): smallest eigenvalue of H
        location (tuple): s-coordinates of the minimiser
        index (tuple): grid index of the minimiser
    '''
    positive: bool
    min_eigenvalue: float
    location: tuple
    index: tuple


def positivity_check(phi, interior_only=False):
    '''
    Scan the smallest eigenvalue of H = diag(s^{-2}) + D^2 phi.

    Args:
        phi (SolutionField or ndarray with a grid)
        interior_only (bool): skip the boundary nodes (the Newton line search)

    Returns:
        PositivityVerdict
    '''
    grid = phi.grid
    H = perturbed_hessian(phi.values, grid)
    eig = np.linalg.eigvalsh(H)[..., 0]
    if interior_only:
        eig = np.where(grid.interior, eig, np.inf)
    idx = np.unravel_index(int(np.argmin(eig)), eig.shape)
    lam = float(eig[idx])
    loc = tuple(float(grid.mesh[j][idx]) for j in range(grid.k))
    return PositivityVerdict(bool(lam > 0.), lam, loc, tuple(int(i) for i in idx))


class ManufacturedSolution:
    '''Closed-form phi* with exact s-derivatives; subclasses define value, gradient and hessian.'''

    def value(self, *s):
        raise NotImplementedError

    def gradient(self, *s):
        raise NotImplementedError

    def hessian(self, *s):
        raise NotImplementedError

    def on_grid(self, grid, eps=1.):
        return SolutionField.from_function(grid, self.value, eps)


class Sine4Solution(ManufacturedSolution):
    '''phi* = a prod_j sin^4(pi (s_j - s_min)/L); vanishes with three derivatives on the box boundary.'''

    def __init__(self, geometry, amplitude=1e-3):
        self.a = amplitude
        self.s0 = geometry.s_min
        self.w = np.pi / (geometry.s_max - geometry.s_min)
        self.k = geometry.k

    def _parts(self, s):
        x = [self.w * (np.asarray(sj, dtype=float) - self.s0) for sj in s]
        f = [np.sin(t) ** 4 for t in x]
        f1 = [4. * self.w * np.sin(t) ** 3 * np.cos(t) for t in x]
        f2 = [self.w ** 2 * (12. * np.sin(t) ** 2 * np.cos(t) ** 2 - 4. * np.sin(t) ** 4) for t in x]
        return f, f1, f2

    def value(self, *s):
        f, _, _ = self._parts(s)
        return self.a * np.prod(np.stack(np.broadcast_arrays(*f)), axis=0)

    def gradient(self, *s):
        return _product_gradient(self.a, *self._parts(s)[:2])

    def hessian(self, *s):
        return _product_hessian(self.a, *self._parts(s))


class BumpSolution(ManufacturedSolution):
    '''phi* = a prod_j bump((s_j - c_j)/r), compactly supported.'''

    def __init__(self, center, radius, amplitude=1e-3):
        self.c = tuple(center)
        self.r = radius
        self.a = amplitude
        self.k = len(self.c)

    def _parts(self, s):
        t = [(np.asarray(sj, dtype=float) - cj) / self.r for sj, cj in zip(s, self.c)]
        return ([bump(x) for x in t], [bump_d1(x) / self.r for x in t],
                [bump_d2(x) / self.r ** 2 for x in t])

    def value(self, *s):
        f, _, _ = self._parts(s)
        return self.a * np.prod(np.stack(np.broadcast_arrays(*f)), axis=0)

    def gradient(self, *s):
        return _product_gradient(self.a, *self._parts(s)[:2])

    def hessian(self, *s):
        return _product_hessian(self.a, *self._parts(s))


def _product_gradient(a, f, f1):
    k = len(f)
    out = []
    for j in range(k):
        g = a * f1[j]
        for i in range(k):
            if i != j:
                g = g * f[i]
        out.append(g)
    return out


def _product_hessian(a, f, f1, f2):
    k = len(f)
    shape = np.broadcast(*f).shape
    out = np.empty(shape + (k, k))
    for p in range(k):
        for q in range(k):
            g = a * np.ones(shape)
            for i in range(k):
                if p == q == i:
                    g = g * f2[i]
                elif i in (p, q):
                    g = g * f1[i]
                else:
                    g = g * f[i]
            out[..., p, q] = g
    return out


def manufactured_forcing(phi_star, eps, grid=None, name='manufactured'):
    '''
    Forcing F = log(det(diag(s^{-2}) + D^2 phi*) prod s^2) - eps phi* for which
    phi* solves the perturbed equation.

    Args:
        phi_star (ManufacturedSolution or SolutionField): closed form (exact
            derivatives, closed-form F) or grid field (discrete Hessian, grid F
            that makes phi* an exact discrete solution)
        eps (float): perturbation parameter
        grid (TorusGrid): grid to check positivity on for closed forms

    Returns:
        ForcingField
    '''
    if isinstance(phi_star, SolutionField):
        g = phi_star.grid
        H = phi_star.H
        det = _det(H)
        if np.any(np.linalg.eigvalsh(H)[..., 0] <= 0.):
            raise PositivityError("phi* leaves the positive branch", min_eigenvalue=float(
                np.min(np.linalg.eigvalsh(H)[..., 0])))
        vals = np.log(det / g.density) - eps * phi_star.values
        return GridForcing(name, g, vals, params={'eps': eps})

    def H_exact(*s):
        H = phi_star.hessian(*s)
        for j, sj in enumerate(s):
            H[..., j, j] += np.asarray(sj, dtype=float) ** -2.
        return H

    if grid is not None:
        H = H_exact(*grid.mesh)
        lam = np.linalg.eigvalsh(H)[..., 0]
        if np.any(lam <= 0.):
            idx = np.unravel_index(int(np.argmin(lam)), lam.shape)
            raise PositivityError("phi* leaves the positive branch at s = %s" % (
                tuple(float(m[idx]) for m in grid.mesh),), min_eigenvalue=float(lam[idx]))

    def rule(*s):
        s = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in s])
        rho2 = np.prod(np.stack(s) ** 2, axis=0)
        return np.log(_det(H_exact(*s)) * rho2) - eps * phi_star.value(*s)

    def grad_rule(*s, h=1e-5):
        # d/ds_j by centred differences of the closed form
        out = []
        for j in range(len(s)):
            up = list(s)
            dn = list(s)
            up[j] = np.asarray(s[j]) + h
            dn[j] = np.asarray(s[j]) - h
            out.append((rule(*up) - rule(*dn)) / (2. * h))
        return out

    return ForcingField(name, rule, grad_rule, phi_star.k, None, 6., {'eps': eps})


def reduced_residual_at(phi_fn, F, eps, s):
    '''
    Normalised reduced residual det(H) prod s^2 e^{-F - eps phi} - 1 at points s
    (shape (m, k)), with exact derivatives of a closed-form or spline phi.
    '''
    s = np.atleast_2d(np.asarray(s, dtype=float))
    cols = [s[:, j] for j in range(s.shape[1])]
    H = np.asarray(phi_fn.hessian(*cols), dtype=float).copy()
    for j in range(s.shape[1]):
        H[..., j, j] += cols[j] ** -2.
    val = phi_fn.value(*cols) if hasattr(phi_fn, 'value') else phi_fn(*cols)
    return _det(H) * np.prod(s ** 2, axis=1) * np.exp(-F(*cols) - eps * val) - 1.


def complex_residual_oracle(phi_fn, F, eps, s, theta=None, h_rel=1e-3):
    '''
    det(g + phi_{j kbar}) e^{-F - eps phi} / det g - 1 with phi_{j kbar} from
    fourth-order differences in the real coordinates of z = exp(-(s + i theta)/2).

    Args:
        phi_fn: closed-form or spline phi with value/__call__ in s
        F (ForcingField)
        eps (float)
        s (ndarray): one point, k cusp coordinates
        theta (ndarray): angles, default 0

    Returns:
        float
    '''
    s = np.asarray(s, dtype=float)
    k = s.size
    theta = np.zeros(k) if theta is None else np.asarray(theta, dtype=float)
    z0 = np.exp(-(s + 1j * theta) / 2.)
    x0 = np.concatenate([[z.real, z.imag] for z in z0])
    h = h_rel * np.repeat(np.abs(z0), 2)
    value = phi_fn.value if hasattr(phi_fn, 'value') else phi_fn

    def phi_x(x):
        z = x[0::2] + 1j * x[1::2]
        sz = -np.log(np.abs(z) ** 2)
        return float(value(*[np.asarray(v) for v in sz]))

    c1 = np.array([1., -8., 0., 8., -1.]) / 12.
    c2 = np.array([-1., 16., -30., 16., -1.]) / 12.
    steps = np.arange(-2, 3)

    def second(a, b):
        ea = np.zeros(2 * k)
        eb = np.zeros(2 * k)
        ea[a] = h[a]
        eb[b] = h[b]
        if a == b:
            return sum(c * phi_x(x0 + t * ea) for c, t in zip(c2, steps)) / h[a] ** 2
        return sum(ca * cb * phi_x(x0 + ta * ea + tb * eb)
                   for ca, ta in zip(c1, steps) for cb, tb in zip(c1, steps)) / (h[a] * h[b])

    ddbar = np.zeros((k, k), dtype=complex)
    for j in range(k):
        for l in range(k):
            xx = second(2 * j, 2 * l)
            yy = second(2 * j + 1, 2 * l + 1)
            xy = second(2 * j, 2 * l + 1)
            yx = second(2 * j + 1, 2 * l)
            ddbar[j, l] = 0.25 * ((xx + yy) + 1j * (xy - yx))
    g = np.diag(1. / (np.abs(z0) ** 2 * s ** 2))
    ratio = np.real(np.linalg.det(g + ddbar) / np.linalg.det(g))
    phi0 = float(value(*[np.asarray(v) for v in s]))
    return ratio * np.exp(-float(F(*[np.asarray(v) for v in s])) - eps * phi0) - 1.
