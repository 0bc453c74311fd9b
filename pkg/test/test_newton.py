import numpy as np
import pytest

from cuspma.errors import ConfigError, ContinuationError, NonConvergenceError, PreconditionError
from cuspma.forcing import bump_forcing, make_forcing, zero_forcing
from cuspma.geometry import ModelGeometry
from cuspma.grid import TorusGrid
from cuspma.solver import (BumpSolution, SolverConfig, Sine4Solution, convergence_order, default_schedule,
                           epsilon_continuation, manufactured_forcing, newton_solve, positivity_check)

'''
Checks of the damped Newton solver and the eps continuation on small grids.
'''


def test_zero_forcing_gives_zero_solution():
    g = ModelGeometry(n=2, k=2)
    assert len(default_schedule()) == 9
    for eps in default_schedule():
        phi = newton_solve(zero_forcing(2), SolverConfig(epsilon=eps, grid=16), g)
        assert phi.sup <= 1e-10
        assert phi.iterations == 0
        assert phi.info['max_principle_gap'] <= 1e-10


def test_recovers_discrete_manufactured_solution():
    for k in (1, 2):
        g = ModelGeometry(n=k, k=k)
        grid = TorusGrid(g, 32 if k == 1 else 16)
        star = Sine4Solution(g, 5e-3).on_grid(grid, eps=0.5)
        F = manufactured_forcing(star, 0.5)
        phi = newton_solve(F, SolverConfig(epsilon=0.5), grid=grid)
        assert np.max(np.abs(phi.values - star.values)) < 1e-8
        assert phi.history[-1] <= 1e-10
        assert phi.iterations >= 1
        # quadratic convergence: the last step squares the residual (up to a constant)
        assert phi.history[-1] < 1e-3 * phi.history[-2] or phi.history[-2] < 1e-8
        assert positivity_check(phi).positive


def test_second_order_discretisation():
    g = ModelGeometry(n=1, k=1)
    star = Sine4Solution(g, 1e-2)
    eps = 1.
    F = manufactured_forcing(star, eps)
    errors, hs = [], []
    for N in (32, 64, 128):
        grid = TorusGrid(g, N)
        phi = newton_solve(F, SolverConfig(epsilon=eps), grid=grid)
        errors.append(np.max(np.abs(phi.values - star.on_grid(grid).values)))
        hs.append(grid.h)
    orders = convergence_order(errors, hs)
    assert all(1.7 < p < 2.3 for p in orders)


def test_bump_recovery_in_two_dimensions():
    g = ModelGeometry(n=2, k=2)
    c = g.s_min + 6.
    star = BumpSolution((c, c), 4.)
    F = manufactured_forcing(star, 1.)
    errors, hs = [], []
    for N in (32, 64, 128):
        grid = TorusGrid(g, N)
        phi = newton_solve(F, SolverConfig(epsilon=1.), grid=grid)
        errors.append(np.max(np.abs(phi.values - star.on_grid(grid).values)))
        hs.append(grid.h)
    assert all(p >= 1.8 for p in convergence_order(errors, hs))
    assert errors[-1] <= 1e-4


def test_maximum_principle():
    g = ModelGeometry(n=1, k=1)
    F = make_forcing('sine4', g, {'amplitude': 0.1})
    for eps in (1., 0.5):
        phi = newton_solve(F, SolverConfig(epsilon=eps, grid=64), g)
        assert eps * phi.sup <= 0.1 + 1e-10
        assert np.abs(phi.info['forcing_sup'] - F.sup(phi.grid)) < 1e-15


def test_non_convergence():
    g = ModelGeometry(n=1, k=1)
    F = make_forcing('sine4', g, {'amplitude': 0.1})
    with pytest.raises(NonConvergenceError) as err:
        newton_solve(F, SolverConfig(epsilon=1., grid=32, max_iter=1, newton_tol=1e-14), g)
    assert len(err.value.history) >= 1


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(epsilon=0.)
    with pytest.raises(ConfigError):
        SolverConfig(epsilon=1.5)
    with pytest.raises(ConfigError):
        SolverConfig(bc='neumann')
    with pytest.raises(ConfigError):
        SolverConfig.from_dict({'tolerance': 1e-8})
    cfg = SolverConfig.from_dict({'newton_tol': 1e-9, 'grid': 32})
    assert cfg.with_epsilon(0.25).epsilon == 0.25
    assert cfg.to_dict()['grid'] == 32


def test_schedule_errors():
    g = ModelGeometry(n=1, k=1)
    cfg = SolverConfig(grid=16)
    F = zero_forcing(1)
    for schedule in ([], [0.5, 0.5], [0.25, 0.5], [1.5, 0.5], [0.5, 0.]):
        with pytest.raises(PreconditionError):
            epsilon_continuation(F, schedule, cfg, g)
    assert default_schedule(3) == [1., 0.5, 0.25, 0.125]


def test_compatibility_requirement():
    g = ModelGeometry(n=1, k=1)
    F = bump_forcing(g)
    with pytest.raises(PreconditionError):
        epsilon_continuation(F, [1., 0.5], SolverConfig(grid=16, require_compatibility=True), g)
    family = epsilon_continuation(F, [1., 0.5], SolverConfig(grid=16), g)
    assert family.compatibility_defect > 0.
    balanced = make_forcing('balanced_bump', g)
    family = epsilon_continuation(balanced, [1., 0.5], SolverConfig(grid=16, require_compatibility=True), g)
    assert np.abs(family.compatibility_defect) <= 1e-8


def test_continuation_family():
    g = ModelGeometry(n=2, k=2)
    F = make_forcing('balanced_bump', g)
    cfg = SolverConfig(grid=16)
    schedule = [1., 0.5, 0.25]
    family = epsilon_continuation(F, schedule, cfg, g, compare_cold=True)
    assert len(family) == 3
    assert family.schedule == schedule
    assert len(family.cauchy) == 2
    assert len(family.cold_iterations) == 2
    # warm starts need fewer Newton steps than cold starts
    assert all(w < c for w, c in zip(family.iterations[1:], family.cold_iterations))
    # warm starts reach the same discrete solution as cold starts
    cold = newton_solve(F, cfg.with_epsilon(0.25), g)
    assert np.max(np.abs(cold.values - family.fields[-1].values)) < 1e-8
    for phi, eps in zip(family.fields, schedule):
        assert phi.eps == eps


def test_cauchy_differences_decrease():
    g = ModelGeometry(n=2, k=2)
    F = make_forcing('balanced_bump', g)
    family = epsilon_continuation(F, default_schedule(), SolverConfig(grid=16, require_compatibility=True), g)
    assert len(family.cauchy) == 8
    assert all(b < a for a, b in zip(family.cauchy[:-1], family.cauchy[1:]))
    assert family.cauchy_decreasing


def test_continuation_failure_keeps_prefix():
    g = ModelGeometry(n=1, k=1)
    F = make_forcing('sine4', g, {'amplitude': 0.1})
    cfg = SolverConfig(grid=16, max_iter=1, newton_tol=1e-14)
    with pytest.raises(ContinuationError) as err:
        epsilon_continuation(F, [1., 0.5], cfg, g)
    assert len(err.value.family) == 0
