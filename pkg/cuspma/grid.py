"""
Tensor grids in the cusp coordinates s = (s_1, ..., s_k) and the
finite-difference calculus used by the solver and the diagnostics.

Fields are stored as arrays of shape (N+1,)*k including the boundary nodes.
"""
import logging
from dataclasses import dataclass

import numpy as np

from cuspma.errors import ConfigError

logger = logging.getLogger('cuspma')


class TorusGrid:
    '''
    Uniform tensor grid on [s_min, s_max]^k.

    Attributes:
        geometry (ModelGeometry): model the grid discretises
        N (int): cells per axis; N+1 nodes per axis
        h (float): spacing
        axis (ndarray): the N+1 node coordinates shared by every axis
        mesh (list): k arrays of shape (N+1,)*k with the coordinates s_j
    '''

    def __init__(self, geometry, N):
        if int(N) != N or N < 4:
            raise ConfigError("grid must be an integer >= 4, got %r" % (N,), field='geometry.grid')
        self.geometry = geometry
        self.N = int(N)
        self.k = geometry.k
        self.axis = np.linspace(geometry.s_min, geometry.s_max, self.N + 1)
        self.h = (geometry.s_max - geometry.s_min) / self.N
        self.mesh = np.meshgrid(*([self.axis] * self.k), indexing='ij')

    @property
    def shape(self):
        return (self.N + 1,) * self.k

    @property
    def points(self):
        '''Node coordinates, shape (N+1,)*k + (k,).'''
        return np.stack(self.mesh, axis=-1)

    @property
    def rho(self):
        return np.prod(np.stack(self.mesh), axis=0)

    @property
    def density(self):
        '''Density of dV in (s, theta): prod_j s_j^{-2}.'''
        return np.prod(np.stack(self.mesh) ** -2., axis=0)

    @property
    def interior(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[(slice(1, -1),) * self.k] = True
        return mask

    def zeros(self):
        return np.zeros(self.shape)

    def trapezoid_weights(self):
        '''Trapezoid weights for ds_1..ds_k dtheta_1..dtheta_k (the angles contribute 2 pi each).'''
        w1 = np.full(self.N + 1, self.h)
        w1[0] = w1[-1] = 0.5 * self.h
        w = w1
        for _ in range(self.k - 1):
            w = np.multiply.outer(w, w1)
        return w * (2. * np.pi) ** self.k

    def volume_weights(self):
        '''Quadrature weights for dV over the truncated box.'''
        return self.trapezoid_weights() * self.density

    def integrate(self, values, density=None):
        '''Trapezoid integral of values * density against ds dtheta (density defaults to dV).'''
        dens = self.density if density is None else density
        return float(np.sum(self.trapezoid_weights() * dens * values))

    def refine(self, factor=2):
        return TorusGrid(self.geometry, self.N * factor)

    def __repr__(self):
        return "TorusGrid(k=%d, N=%d, s=[%g, %g])" % (self.k, self.N, self.axis[0], self.axis[-1])


@dataclass
class ScalarField:
    '''A sampled torus-invariant field on a TorusGrid.'''
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("field shape %s does not match grid %s" % (self.values.shape, self.grid.shape))

    @classmethod
    def from_function(cls, grid, fn):
        '''fn takes the k coordinate arrays and returns an array of the grid shape.'''
        return cls(grid, np.broadcast_to(fn(*grid.mesh), grid.shape).copy())

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))


def d1(f, h, axis):
    '''Centred first difference, second-order one-sided at the edges.'''
    return np.gradient(f, h, axis=axis, edge_order=2)


def d2(f, h, axis):
    '''Centred second difference; one-sided (2f0 - 5f1 + 4f2 - f3)/h^2 at the edges.'''
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2. * f[1:-1] + f[:-2]) / h ** 2
    out[0] = (2. * f[0] - 5. * f[1] + 4. * f[2] - f[3]) / h ** 2
    out[-1] = (2. * f[-1] - 5. * f[-2] + 4. * f[-3] - f[-4]) / h ** 2
    return np.moveaxis(out, 0, axis)


def mixed(f, h, a, b):
    '''Mixed derivative by nested centred differences; the 4-point stencil in the interior.'''
    return d1(d1(f, h, a), h, b)


def gradient(f, h, k):
    '''s-gradient, shape f.shape + (k,).'''
    return np.stack([d1(f, h, j) for j in range(k)], axis=-1)


def hessian(f, h, k):
    '''Real s-Hessian D^2 f, shape f.shape + (k, k).'''
    out = np.empty(np.shape(f) + (k, k))
    for a in range(k):
        out[..., a, a] = d2(f, h, a)
        for b in range(a + 1, k):
            m = mixed(f, h, a, b)
            out[..., a, b] = m
            out[..., b, a] = m
    return out


def third_derivatives(f, h, k):
    '''All third s-derivatives D^3 f, shape f.shape + (k, k, k).'''
    hess = hessian(f, h, k)
    out = np.empty(np.shape(f) + (k, k, k))
    for c in range(k):
        out[..., c] = d1(hess, h, c)
    return out


def fourth_difference(f, h, axis):
    '''Undivided fourth difference along an axis, zero on the two outer rows.'''
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = np.zeros_like(f)
    out[2:-2] = f[4:] - 4. * f[3:-1] + 6. * f[2:-2] - 4. * f[1:-3] + f[:-4]
    return np.moveaxis(out, 0, axis)


def grad_norm_sq(f, grid):
    '''|grad f|^2_g = 2 sum_j s_j^2 (df/ds_j)^2 for torus-invariant f.'''
    g = gradient(f, grid.h, grid.k)
    s = np.stack(grid.mesh, axis=-1)
    return 2. * np.sum((s * g) ** 2, axis=-1)


def laplacian(f, grid):
    '''Delta f = sum_j s_j^2 d^2 f / ds_j^2 in the complex convention.'''
    return sum(grid.mesh[j] ** 2 * d2(f, grid.h, j) for j in range(grid.k))
