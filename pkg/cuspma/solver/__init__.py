from cuspma.solver.operator import (SolutionField, SolutionInterpolant, ResidualField, PositivityVerdict,
                                    reduce_ma_operator, jacobian, positivity_check, manufactured_forcing,
                                    perturbed_hessian, Sine4Solution, BumpSolution,
                                    reduced_residual_at, complex_residual_oracle)
from cuspma.solver.newton import SolverConfig, newton_solve, convergence_order
from cuspma.solver.continuation import SolutionFamily, epsilon_continuation, default_schedule
from cuspma.solver.charts import quasi_chart_residual, residual_budget, chart_residual_family, charts_in_box
