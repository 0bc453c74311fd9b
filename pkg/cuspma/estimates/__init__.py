from cuspma.estimates.measures import MeasureSpec, NormLadder, IResult, moser_trace, I_functional
from cuspma.estimates.auxiliary import (AuxiliaryFields, InequalityCheck, auxiliary_fields,
                                        differential_inequality_check)
from cuspma.estimates.report import EstimateReport, norm_report, w3_surrogate, truncation_audit
from cuspma.estimates.gaffney import (GaffneyGrowth, GaffneyResult, gaffney_probe, gaffney_growth, gaffney_control,
                                      control_flux)
from cuspma.estimates.cutoff import (CutoffConvergence, chi, chi_prime, cutoff_approximation,
                                     cutoff_convergence, grad_d_sup)
