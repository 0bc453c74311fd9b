"""
Continuation in eps: solve along a decreasing schedule, warm-starting each
solve from the previous one.
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from cuspma.errors import ContinuationError, NonConvergenceError, PreconditionError
from cuspma.forcing import compatibility_defect
from cuspma.grid import TorusGrid
from cuspma.solver.newton import newton_solve

logger = logging.getLogger('cuspma')


def default_schedule(levels=8):
    return [2. ** -i for i in range(levels + 1)]


@dataclass
class SolutionFamily:
    '''
    Solutions phi_eps along an eps schedule.

    Attributes:
        schedule (list): eps values solved, in order
        fields (list): SolutionField per eps
        iterations (list): Newton iterations per eps
        cauchy (list): ||phi_{eps_m} - phi_{eps_{m+1}}||_inf
        cold_iterations (list): iterations of cold starts, when requested
        compatibility_defect (float): int (e^F - 1) dV of the forcing
        forcing: the forcing the family solves for
    '''
    schedule: List[float] = field(default_factory=list)
    fields: list = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    cauchy: List[float] = field(default_factory=list)
    cold_iterations: List[int] = field(default_factory=list)
    compatibility_defect: float = 0.
    forcing: object = None

    def __len__(self):
        return len(self.fields)

    @property
    def cauchy_decreasing(self):
        return all(b < a for a, b in zip(self.cauchy[:-1], self.cauchy[1:]))

    def append(self, eps, phi):
        if self.fields:
            self.cauchy.append(float(np.max(np.abs(phi.values - self.fields[-1].values))))
        self.schedule.append(eps)
        self.fields.append(phi)
        self.iterations.append(phi.iterations)


def check_schedule(schedule):
    if len(schedule) == 0:
        raise PreconditionError("empty eps schedule")
    s = np.asarray(schedule, dtype=float)
    if np.any(s <= 0.) or np.any(s > 1.):
        raise PreconditionError("eps schedule must lie in (0, 1]")
    if np.any(np.diff(s) >= 0.):
        raise PreconditionError("eps schedule must be strictly decreasing")


def epsilon_continuation(F, schedule, config, geometry, grid=None, require_compatibility=None,
                         compare_cold=False):
    '''
    Solve along a strictly decreasing eps schedule with warm starts.

    Args:
        F (ForcingField): forcing
        schedule (list): strictly decreasing eps values in (0, 1]
        config (SolverConfig): Newton controls; its epsilon is ignored
        geometry (ModelGeometry): model
        grid (TorusGrid): optional explicit grid
        require_compatibility (bool): override config.require_compatibility
        compare_cold (bool): also run cold starts to record their iteration counts

    Returns:
        SolutionFamily
    '''
    check_schedule(schedule)
    grid = grid or TorusGrid(geometry, config.grid)
    need = config.require_compatibility if require_compatibility is None else require_compatibility
    defect = compatibility_defect(F, geometry)
    if need and abs(defect) > config.compatibility_tol:
        raise PreconditionError("forcing violates int (e^F - 1) dV = 0: defect %.3e" % defect)

    family = SolutionFamily(compatibility_defect=defect, forcing=F)
    previous = None
    for eps in schedule:
        cfg = config.with_epsilon(eps)
        try:
            phi = newton_solve(F, cfg, initial=previous, grid=grid)
        except NonConvergenceError as err:
            raise ContinuationError("continuation failed at eps = %g: %s" % (eps, err), family=family,
                                    field=err.field, history=err.history)
        family.append(eps, phi)
        if compare_cold and previous is not None:
            family.cold_iterations.append(newton_solve(F, cfg, grid=grid).iterations)
        logger.info("continuation eps = %g: %d iterations, cauchy = %s", eps, phi.iterations,
                    "%.3e" % family.cauchy[-1] if family.cauchy else "-")
        previous = phi
    return family
