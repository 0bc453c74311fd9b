"""
Damped Newton iteration for the reduced equation with a positivity line search.
"""
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.sparse.linalg import spsolve

from cuspma.errors import ConfigError, NonConvergenceError, PositivityError, StepRejectionError
from cuspma.grid import TorusGrid
from cuspma.solver.operator import (SolutionField, _forcing_values, check_dimension, jacobian,
                                    positivity_check, reduce_ma_operator)

logger = logging.getLogger('cuspma')


@dataclass(frozen=True)
class SolverConfig:
    '''
    Newton and continuation controls.

    Attributes:
        epsilon (float): perturbation parameter in (0, 1]
        newton_tol (float): target sup-norm of the scaled residual
        max_iter (int): Newton iterations before giving up
        damping (float): backtracking factor in (0, 1)
        min_step (float): smallest admissible step length
        grid (int): cells per s-axis
        bc (str): boundary treatment, only "dirichlet"
        require_compatibility (bool): enforce int (e^F - 1) dV = 0 in continuation
        compatibility_tol (float): tolerance of that check
    '''
    epsilon: float = 1.
    newton_tol: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    min_step: float = 2. ** -20
    grid: int = 64
    bc: str = 'dirichlet'
    require_compatibility: bool = False
    compatibility_tol: float = 1e-8

    def __post_init__(self):
        if not 0. < self.epsilon <= 1.:
            raise ConfigError("epsilon must lie in (0, 1], got %r" % (self.epsilon,), field='solver.epsilon')
        if not self.newton_tol > 0.:
            raise ConfigError("newton_tol must be positive", field='solver.newton_tol')
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer", field='solver.max_iter')
        if not 0. < self.damping < 1.:
            raise ConfigError("damping must lie in (0, 1)", field='solver.damping')
        if not 0. < self.min_step < 1.:
            raise ConfigError("min_step must lie in (0, 1)", field='solver.min_step')
        if int(self.grid) != self.grid or self.grid < 4:
            raise ConfigError("grid must be an integer >= 4", field='geometry.grid')
        if self.bc != 'dirichlet':
            raise ConfigError("only dirichlet boundary conditions are supported", field='solver.bc')

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError("unknown entries %s" % sorted(extra), field='solver')
        try:
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as err:
            raise ConfigError("malformed solver entry: %s" % err, field='solver')

    def to_dict(self):
        return asdict(self)

    def with_epsilon(self, eps):
        return replace(self, epsilon=eps)


def newton_solve(F, config, geometry=None, initial=None, grid=None):
    '''
    Solve det H = e^{F + eps phi} prod s^{-2} with phi = 0 on the box boundary.

    Args:
        F (ForcingField or ndarray): forcing
        config (SolverConfig): controls; config.epsilon is the eps solved for
        geometry (ModelGeometry): model, used when grid is not given
        initial (SolutionField): warm start; default phi = 0
        grid (TorusGrid): explicit grid (its N overrides config.grid)

    Returns:
        SolutionField with iterations, history and info filled in
    '''
    if grid is None:
        grid = initial.grid if initial is not None else TorusGrid(geometry, config.grid)
    check_dimension(grid.geometry)
    eps = config.epsilon
    Fv = _forcing_values(F, grid)
    inner = (slice(1, -1),) * grid.k
    shape = (grid.N - 1,) * grid.k

    phi = SolutionField(grid, grid.zeros() if initial is None else initial.values.copy(), eps)
    phi.values[~grid.interior] = 0.
    start = positivity_check(phi, interior_only=True)
    if not start.positive:
        raise PositivityError("initial iterate is not on the positive branch", point=start.location,
                              min_eigenvalue=start.min_eigenvalue)

    history, steps, min_eigs = [], [], []
    res = reduce_ma_operator(phi, Fv, eps, scaled=True)
    r0 = res.sup
    history.append(r0)
    it = 0
    while r0 > config.newton_tol:
        if it >= config.max_iter:
            phi.history = history
            phi.iterations = it
            raise NonConvergenceError("Newton did not reach %.1e in %d iterations (|R| = %.3e)"
                                      % (config.newton_tol, config.max_iter, r0), field=phi, history=history)
        J = jacobian(phi, Fv, eps)
        d = spsolve(J, -res.values[inner].ravel()).reshape(shape)
        t = 1.
        while True:
            trial = SolutionField(grid, phi.values.copy(), eps)
            trial.values[inner] += t * d
            pos = positivity_check(trial, interior_only=True)
            if pos.positive:
                res_t = reduce_ma_operator(trial, Fv, eps, scaled=True)
                if res_t.sup < r0:
                    break
            t *= config.damping
            if t < config.min_step:
                phi.history = history
                phi.iterations = it
                raise StepRejectionError("line search failed below step %.1e at iteration %d"
                                         % (config.min_step, it + 1), field=phi, history=history)
        phi, res, r0 = trial, res_t, res_t.sup
        it += 1
        history.append(r0)
        steps.append(t)
        min_eigs.append(pos.min_eigenvalue)
        logger.info("newton iter %d: |R| = %.3e, step = %g, min eig(H) = %.3e", it, r0, t, pos.min_eigenvalue)

    final = positivity_check(phi, interior_only=True)
    if not final.positive:
        raise PositivityError("converged iterate failed the positivity re-check", point=final.location,
                              min_eigenvalue=final.min_eigenvalue)
    phi.iterations = it
    phi.history = history
    phi.residual = reduce_ma_operator(phi, Fv, eps).values
    sup_F = float(np.max(np.abs(Fv)))
    phi.info = {
        'steps': steps,
        'min_eigenvalues': min_eigs,
        'min_eigenvalue': final.min_eigenvalue,
        'residual_sup': r0,
        'max_principle_gap': eps * phi.sup - sup_F,
        'forcing_sup': sup_F,
        'newton_tol': config.newton_tol,
    }
    logger.debug("newton converged in %d iterations at eps = %g", it, eps)
    return phi


def convergence_order(errors, hs):
    '''Observed orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}) for successive refinements.'''
    return [math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(len(errors) - 1)]
