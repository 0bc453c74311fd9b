"""
Local cusp geometry: the weight rho, the model and reference Kaehler metrics
on (kappa Delta^*)^k x Delta^{n-k}, their volume densities, curvature and the
|grad rho|/rho bound.

Conventions used everywhere in the package:

* a cusp factor point is (s, theta) with z = exp(-(s + i theta)/2), so
  s = -log|z|^2 and rho_j = s_j;
* omega = i g_{jk} dz_j ^ dz_k, and dV has density s^{-2} ds dtheta per cusp
  factor and the Euclidean area element per disc factor;
* |grad h|^2 = 2 g^{jk} d_j h d_k h, which for torus-invariant h equals
  2 sum_j s_j^2 (dh/ds_j)^2; the Laplacian is g^{jk} h_{jk}, so that
  n + Delta phi = tr_g g'.

Hermitian matrices at a point are carried in the cusp frame E M E^H with
E = diag(z_1..z_k, 1..1). The congruence keeps every entry bounded as s grows
and leaves positivity and generalized eigenvalues unchanged.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from cuspma.errors import ConfigError, DomainError, PositivityError
from cuspma import quadrature

logger = logging.getLogger('cuspma')

DEFAULT_KAPPA = math.exp(-25. / 7.)
DEFAULT_BOX_WIDTH = 12.
# min eigenvalue of the model-normalised reference metric below which it is reported as nearly degenerate
NEAR_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ModelGeometry:
    '''
    Local cusp model (kappa Delta^*)^k x Delta^{n-k} truncated at s_max.

    Attributes:
        n (int): complex dimension
        k (int): number of cusp factors, 1 <= k <= n
        kappa (float): cusp-edge radius in (0, 1)
        s_max (float): truncation of the cusp coordinate; defaults to s_min + 12
    '''
    n: int = 2
    k: int = 2
    kappa: float = DEFAULT_KAPPA
    s_max: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be an integer >= 1, got %r" % (self.n,), field='geometry.n')
        if int(self.k) != self.k or not 1 <= self.k <= self.n:
            raise ConfigError("k must satisfy 1 <= k <= n, got %r" % (self.k,), field='geometry.k')
        if not (0. < self.kappa < 1.):
            raise ConfigError("kappa must lie in (0, 1), got %r" % (self.kappa,), field='geometry.kappa')
        if self.s_min < 1.:
            raise ConfigError("kappa too large: s_min = -2 log kappa = %g < 1" % self.s_min,
                              field='geometry.kappa')
        if self.s_max is None:
            object.__setattr__(self, 's_max', self.s_min + DEFAULT_BOX_WIDTH)
        if not self.s_max > self.s_min:
            raise ConfigError("s_max must exceed s_min = %g, got %r" % (self.s_min, self.s_max),
                              field='geometry.s_max')

    @property
    def s_min(self):
        return -2. * math.log(self.kappa)

    @property
    def n_disc(self):
        return self.n - self.k

    def contains(self, s):
        s = np.asarray(s, dtype=float)
        return bool(np.all(s >= self.s_min) and np.all(s <= self.s_max))

    def check(self, p):
        '''Raise DomainError unless p is a valid point of this model.'''
        s = np.atleast_1d(np.asarray(p.s, dtype=float))
        if s.shape != (self.k,):
            raise DomainError("expected %d cusp coordinates, got %d" % (self.k, s.size))
        if np.any(s < self.s_min) or np.any(s > self.s_max):
            raise DomainError("cusp coordinates %s outside [%g, %g]" % (s, self.s_min, self.s_max))
        disc = np.asarray(p.disc, dtype=complex)
        if disc.size != self.n_disc:
            raise DomainError("expected %d disc coordinates, got %d" % (self.n_disc, disc.size))
        if np.any(np.abs(disc) >= 1.):
            raise DomainError("disc coordinates must satisfy |w| < 1")

    def with_s_max(self, s_max):
        return ModelGeometry(self.n, self.k, self.kappa, s_max)

    def to_dict(self):
        return {'n': self.n, 'k': self.k, 'kappa': self.kappa, 's_max': self.s_max}


@dataclass(frozen=True)
class CuspPoint:
    '''
    A point of the model in cusp coordinates.

    Attributes:
        s (tuple): k cusp coordinates s_j = -log|z_j|^2
        theta (tuple): k angles in [0, 2 pi)
        disc (tuple): n-k complex disc coordinates
    '''
    s: Tuple[float, ...]
    theta: Tuple[float, ...] = None
    disc: Tuple[complex, ...] = ()

    def __post_init__(self):
        s = tuple(float(x) for x in np.atleast_1d(self.s))
        object.__setattr__(self, 's', s)
        if self.theta is None:
            object.__setattr__(self, 'theta', (0.,) * len(s))
        else:
            object.__setattr__(self, 'theta', tuple(float(x) for x in np.atleast_1d(self.theta)))
        object.__setattr__(self, 'disc', tuple(complex(x) for x in np.atleast_1d(self.disc)))

    @property
    def z(self):
        '''Complex coordinates (z_1, ..., z_n).'''
        s = np.asarray(self.s)
        th = np.asarray(self.theta)
        return np.concatenate([np.exp(-(s + 1j * th) / 2.), np.asarray(self.disc, dtype=complex)])

    @classmethod
    def from_z(cls, z, k):
        z = np.asarray(z, dtype=complex)
        cusp = z[:k]
        if np.any(cusp == 0):
            raise DomainError("cusp coordinates must be non-zero")
        s = -np.log(np.abs(cusp) ** 2)
        theta = np.mod(-2. * np.angle(cusp), 2. * np.pi)
        return cls(tuple(s), tuple(theta), tuple(z[k:]))


@dataclass(frozen=True)
class MetricSample:
    '''
    Metric coefficients g_{jk} at a point, stored in the cusp frame.

    Attributes:
        scaled (ndarray): n x n Hermitian matrix E g E^H
        s (tuple): cusp coordinates of the point, used to undo the frame
    '''
    scaled: np.ndarray
    s: Tuple[float, ...]

    @property
    def k(self):
        return len(self.s)

    def _frame(self):
        n = self.scaled.shape[0]
        e2 = np.ones(n)
        e2[:self.k] = np.exp(np.asarray(self.s))
        return e2

    @property
    def diag(self):
        '''Diagonal coefficients g_{jj} in the coordinate frame.'''
        return np.real(np.diag(self.scaled)) * self._frame()

    @property
    def offdiag(self):
        '''Off-diagonal part of the scaled matrix; zero for the pure model.'''
        m = self.scaled.copy()
        np.fill_diagonal(m, 0.)
        return m

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.scaled)

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    @property
    def is_positive(self):
        return bool(np.allclose(self.scaled, self.scaled.conj().T, atol=1e-13, rtol=1e-12)
                    and self.min_eigenvalue > 0.)


@dataclass(frozen=True)
class RhoSample:
    '''rho at a point with its factors and analytic s-derivatives.'''
    value: float
    factors: Tuple[float, ...]
    gradient: Tuple[float, ...]


class WeightField:
    '''
    The weight rho(s) = prod_j s_j and its per-factor values rho_j = s_j.
    Vectorised over leading axes of s (shape (..., k)).
    '''

    def value(self, s):
        return np.prod(np.asarray(s, dtype=float), axis=-1)

    def factors(self, s):
        return np.asarray(s, dtype=float)

    def gradient(self, s):
        s = np.asarray(s, dtype=float)
        return self.value(s)[..., None] / s


RHO = WeightField()


# Hermitian-metric profiles f for |sigma_j|^2 = e^f |z_j|^2.

class HermitianProfile:
    '''
    Smooth real profile f(z) on all n coordinates. Subclasses provide the
    value, the (1,0) derivatives df/dz_a and the Levi matrix f_{a b-bar}.
    '''

    def value(self, z):
        raise NotImplementedError

    def dz(self, z):
        raise NotImplementedError

    def levi(self, z):
        raise NotImplementedError


class ZeroProfile(HermitianProfile):

    def value(self, z):
        return 0.

    def dz(self, z):
        return np.zeros(len(z), dtype=complex)

    def levi(self, z):
        return np.zeros((len(z), len(z)), dtype=complex)


class QuadraticProfile(HermitianProfile):
    '''f(z) = a |z|^2 summed over all coordinates.'''

    def __init__(self, a):
        self.a = float(a)

    def value(self, z):
        return self.a * float(np.sum(np.abs(z) ** 2))

    def dz(self, z):
        return self.a * np.conj(np.asarray(z, dtype=complex))

    def levi(self, z):
        return self.a * np.eye(len(z), dtype=complex)


def _as_point(p, k=None):
    if isinstance(p, CuspPoint):
        return p
    return CuspPoint(tuple(np.atleast_1d(p)))


def weight_rho(p, geometry=None):
    '''
    Weight rho = prod_j s_j at a point.

    Args:
        p (CuspPoint): point, or a bare sequence of cusp coordinates
        geometry (ModelGeometry): optional; when given the point is range-checked

    Returns:
        RhoSample: value, per-factor values and d rho / d s_j
    '''
    p = _as_point(p)
    if geometry is not None:
        geometry.check(p)
    s = np.asarray(p.s)
    return RhoSample(float(RHO.value(s)), tuple(RHO.factors(s)), tuple(RHO.gradient(s)))


def model_metric(p, geometry=None):
    '''
    Model metric: 1/(|z_j|^2 s_j^2) on cusp factors, 1 on disc factors.

    Returns:
        MetricSample
    '''
    p = _as_point(p)
    if geometry is not None:
        geometry.check(p)
    k = len(p.s)
    n = k + len(p.disc)
    diag = np.ones(n)
    diag[:k] = 1. / np.asarray(p.s) ** 2
    return MetricSample(np.diag(diag).astype(complex), p.s)


@dataclass(frozen=True)
class ReferenceSample:
    '''
    Reference metric lam*I - i ddbar log rho at one point.

    Attributes:
        point (CuspPoint)
        metric (MetricSample): full reference metric
        cusp_term (MetricSample): -i ddbar log rho alone
        deviation (float): spectral size of model^{-1/2}(ref - model)model^{-1/2}
        ratio_range (tuple): extreme generalized eigenvalues of (ref, model)
    '''
    point: CuspPoint
    metric: MetricSample
    cusp_term: MetricSample
    deviation: float
    ratio_range: Tuple[float, float]


def reference_metric_at(p, lam=1., f=None):
    '''
    Exact Levi form of lam*|dz|^2 - log rho with rho_j = -log|z_j|^2 - f(z).

    Args:
        p (CuspPoint): point
        lam (float): weight of the flat background
        f (HermitianProfile): hermitian-metric profile, default f = 0

    Returns:
        ReferenceSample
    '''
    p = _as_point(p)
    f = f if f is not None else ZeroProfile()
    z = p.z
    k = len(p.s)
    n = len(z)
    e = np.ones(n, dtype=complex)
    e[:k] = z[:k]
    fz = f.value(z)
    df = np.asarray(f.dz(z), dtype=complex)
    levi = np.asarray(f.levi(z), dtype=complex)
    scaled_levi = e[:, None] * levi * np.conj(e)[None, :]

    cusp = np.zeros((n, n), dtype=complex)
    for j in range(k):
        rho_j = p.s[j] - fz
        if rho_j <= 0:
            raise DomainError("rho_%d = %g is not positive at s = %s" % (j, rho_j, p.s))
        c = e * df
        c[j] += 1.
        cusp += scaled_levi / rho_j + np.outer(c, np.conj(c)) / rho_j ** 2
    background = lam * np.diag(np.abs(e) ** 2).astype(complex)
    total = cusp + background
    total = 0.5 * (total + total.conj().T)

    model = model_metric(p).scaled
    dm = 1. / np.sqrt(np.real(np.diag(model)))
    rel = dm[:, None] * total * dm[None, :]
    gen = np.linalg.eigvalsh(rel)
    dev = np.linalg.eigvalsh(rel - np.eye(n))
    return ReferenceSample(p, MetricSample(total, p.s), MetricSample(cusp, p.s),
                           float(np.max(np.abs(dev))), (float(gen[0]), float(gen[-1])))


def sample_points(geometry, m=8, theta=0.3, disc_radius=0.5):
    '''
    Tensor sample of the domain: m log-spaced s values per cusp factor, a
    fixed angle and disc coordinates at the given radius.
    '''
    svals = np.geomspace(geometry.s_min, geometry.s_max, m)
    disc = tuple([disc_radius + 0j] * geometry.n_disc)
    pts = []
    for idx in np.ndindex(*([m] * geometry.k)):
        s = tuple(svals[i] for i in idx)
        pts.append(CuspPoint(s, (theta,) * geometry.k, disc))
    return pts


@dataclass
class ReferenceReport:
    '''
    Outcome of reference_metric_local over a sample of the domain.

    Attributes:
        samples (list): ReferenceSample per point
        positive (bool): every sample positive definite
        failure_point (CuspPoint): first sample failing positivity, if any
        min_eigenvalue (float): smallest eigenvalue over the sample (cusp frame)
        quasi_isometry (float): smallest C with C^{-1} model <= ref <= C model
        decay_constant (float): max of deviation / sum_j 1/rho_j
    '''
    samples: list
    positive: bool
    failure_point: Optional[CuspPoint]
    min_eigenvalue: float
    quasi_isometry: float
    decay_constant: float


def reference_metric_local(lam, f=None, geometry=None, points=None, m=8, raise_on_failure=False):
    '''
    Assemble the reference metric over the domain and compare it to the model.

    Args:
        lam (float): weight of the flat background
        f (HermitianProfile): hermitian-metric profile (default zero)
        geometry (ModelGeometry): used to build the default sample
        points (list): explicit CuspPoints; overrides the default sample
        m (int): samples per cusp axis for the default sample
        raise_on_failure (bool): raise PositivityError instead of reporting

    Returns:
        ReferenceReport
    '''
    if points is None:
        if geometry is None:
            geometry = ModelGeometry()
        points = sample_points(geometry, m)
    samples = [reference_metric_at(p, lam, f) for p in points]
    failure = None
    min_eig = np.inf
    for smp in samples:
        ev = smp.metric.min_eigenvalue
        min_eig = min(min_eig, ev)
        if failure is None and not ev > 0.:
            failure = smp.point
    positive = failure is None
    if positive and min_eig < NEAR_THRESHOLD:
        warnings.warn("reference metric nearly degenerate: min eigenvalue %.3e at lambda = %g" % (min_eig, lam))
    if not positive:
        msg = "reference metric not positive definite at s = %s (lambda = %g too small)" % (
            failure.s, lam)
        logger.info(msg)
        if raise_on_failure:
            raise PositivityError(msg, point=failure, min_eigenvalue=min_eig)
        qi = np.inf
    else:
        qi = max(max(smp.ratio_range[1], 1. / smp.ratio_range[0]) for smp in samples)
    decay = max(smp.deviation / float(np.sum(1. / np.asarray(smp.point.s))) for smp in samples)
    return ReferenceReport(samples, positive, failure, float(min_eig), float(qi), float(decay))


def quasi_isometry_constant(geometry, lam=1., f=None, m=8):
    '''Smallest C with C^{-1} model <= reference <= C model over an m^k sample.'''
    return reference_metric_local(lam, f, geometry, m=m).quasi_isometry


def positivity_threshold(geometry, f, lo=0., hi=1., m=8, tol=1e-10):
    '''Bisect the smallest lambda in [lo, hi] for which the reference metric is positive.'''
    pts = sample_points(geometry, m)

    def ok(lam):
        return all(reference_metric_at(p, lam, f).metric.min_eigenvalue > 0. for p in pts)

    if not ok(hi):
        raise PositivityError("reference metric not positive even at lambda = %g" % hi)
    if ok(lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def gauss_curvature_cusp(s, factor='cusp'):
    '''
    Gauss curvature of the single-factor metric lambda |dz|^2 with
    lambda = 1/(|z|^2 s^2), from K = -Delta_E log(lambda) / (2 lambda).

    For a function of s alone Delta_E = 4 |z|^{-2} d^2/ds^2, and
    log lambda = s - 2 log s, so K = -2 s^2 (2/s^2) = -4 for every s.
    The flat disc factor has K = 0.
    '''
    if factor == 'disc':
        return 0.
    if factor != 'cusp':
        raise ValueError("factor must be 'cusp' or 'disc', got %r" % (factor,))
    s = float(s)
    d2_log_lambda = 2. / s ** 2
    return -2. * s ** 2 * d2_log_lambda


def holomorphic_sectional_curvature(s):
    '''Holomorphic sectional curvature of i dz^dzbar/(|z|^2 s^2); -2 in this normalisation.'''
    return 0.5 * gauss_curvature_cusp(s)


def gauss_curvature_fd(s, theta=0., h_rel=1e-3):
    '''
    Finite-difference oracle: fourth-order Laplacian of log lambda in the real
    coordinates (x, y) of z, divided by -2 lambda.
    '''
    z0 = np.exp(-(s + 1j * theta) / 2.)
    h = h_rel * abs(z0)

    def log_lam(zz):
        r2 = abs(zz) ** 2
        return -math.log(r2) - 2. * math.log(-math.log(r2))

    def d2(direction):
        c = [-1. / 12, 4. / 3, -5. / 2, 4. / 3, -1. / 12]
        return sum(ci * log_lam(z0 + (i - 2) * h * direction) for i, ci in enumerate(c)) / h ** 2

    lap = d2(1.) + d2(1j)
    lam = 1. / (abs(z0) ** 2 * s ** 2)
    return -lap / (2. * lam)


@dataclass(frozen=True)
class GradRhoRatio:
    '''
    Attributes:
        ratio (float): (g^{jk} d_j rho d_k rho)^{1/2} / rho
        real_ratio (float): |grad rho|_g / rho in the declared real convention (sqrt 2 * ratio)
        per_factor (tuple): |d rho_j| / rho_j for each cusp factor
        split_sum (float): sum of per_factor, an upper bound for ratio
    '''
    ratio: float
    real_ratio: float
    per_factor: Tuple[float, ...]
    split_sum: float


def grad_rho_ratio(p, lam=1., f=None, geometry=None):
    '''
    |grad rho| / rho on the reference metric lam*I - i ddbar log rho.

    Args:
        p (CuspPoint): point
        lam (float): background weight; lam = 0 gives the pure cusp term
        f (HermitianProfile): hermitian-metric profile, default zero
        geometry (ModelGeometry): optional range check

    Returns:
        GradRhoRatio
    '''
    p = _as_point(p)
    if geometry is not None:
        geometry.check(p)
    f = f if f is not None else ZeroProfile()
    ref = reference_metric_at(p, lam, f)
    z = p.z
    k = len(p.s)
    n = len(z)
    e = np.ones(n, dtype=complex)
    e[:k] = z[:k]
    fz = f.value(z)
    df = np.asarray(f.dz(z), dtype=complex)
    m = ref.metric.scaled
    rhos = np.asarray(p.s) - fz
    # d log rho_j in the cusp frame: -(delta_aj + e_a f_a) / rho_j
    logs = []
    for j in range(k):
        c = e * df
        c[j] += 1.
        logs.append(-c / rhos[j])
    per = tuple(float(math.sqrt(max(np.real(np.conj(v) @ np.linalg.solve(m, v)), 0.))) for v in logs)
    tot = np.sum(logs, axis=0)
    ratio = float(math.sqrt(max(np.real(np.conj(tot) @ np.linalg.solve(m, tot)), 0.)))
    return GradRhoRatio(ratio, math.sqrt(2.) * ratio, per, float(sum(per)))


def volume_element(p, geometry=None):
    '''Density of dV in (s, theta, disc) coordinates: prod_j s_j^{-2}.'''
    p = _as_point(p)
    if geometry is not None:
        geometry.check(p)
    return float(np.prod(1. / np.asarray(p.s) ** 2))


def cusp_volume(s0, s1=np.inf):
    '''Closed form of the single-factor volume of {s0 <= s <= s1}: 2 pi (1/s0 - 1/s1).'''
    if s1 < s0:
        raise DomainError("empty interval [%g, %g]" % (s0, s1))
    return 2. * np.pi * (1. / s0 - (0. if np.isinf(s1) else 1. / s1))


def cusp_integral(g, s0, s1=np.inf, order=32, panels=4):
    '''
    Single-factor integral 2 pi int_{s0}^{s1} g(s) s^{-2} ds, computed in
    t = 1/s where the density becomes dt.

    Args:
        g (callable): vectorised integrand in s (None for g = 1)
        s0, s1 (float): truncation; s1 may be inf
        order, panels (int): composite Gauss-Legendre resolution in t
    '''
    if s1 == s0:
        return 0.
    t0 = 0. if np.isinf(s1) else 1. / s1
    t1 = 1. / s0
    t, w = quadrature.composite_gauss(t0, t1, panels, order)
    vals = np.ones_like(t) if g is None else g(1. / t)
    return float(2. * np.pi * np.sum(w * vals))


def weighted_volume(s0, s1, a, order=32, panels=8):
    '''Single-factor int rho^a dV over [s0, s1]; diverges as s1 -> inf for a >= 1.'''
    return cusp_integral(lambda s: s ** a, s0, s1, order, panels)


@dataclass(frozen=True)
class GeometryBounds:
    '''
    Constants measured over a domain sample.

    Attributes:
        curvature (float): |Gauss curvature| of a cusp factor, constant on the model
        bisectional_floor (float): -inf_{i != j} R_{i i j j} on the product model (0)
        grad_ratio (float): sup of the (1,0) ratio |d rho| / rho
        real_grad_ratio (float): sup in the declared real convention
        scalar_curvature (float): |R| of the product model in the complex convention
        quasi_isometry (float): reference/model constant C
    '''
    curvature: float
    bisectional_floor: float
    grad_ratio: float
    real_grad_ratio: float
    scalar_curvature: float
    quasi_isometry: float


def measure_bounds(geometry, lam=1., f=None, m=8):
    '''Measure the curvature and |grad rho|/rho constants on the truncated domain.'''
    pts = sample_points(geometry, m)
    ratios = [grad_rho_ratio(p, lam, f) for p in pts]
    curv = max(abs(gauss_curvature_cusp(s)) for s in np.geomspace(geometry.s_min, geometry.s_max, m))
    # the Ricci form of each cusp factor is -2 g, so R = -2k in the complex convention
    scalar = 2. * geometry.k
    qi = quasi_isometry_constant(geometry, lam, f, m)
    bounds = GeometryBounds(float(curv), 0., max(r.ratio for r in ratios),
                            max(r.real_ratio for r in ratios), float(scalar), float(qi))
    logger.debug("measured geometry bounds: %s", bounds)
    return bounds
