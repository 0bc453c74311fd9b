"""
Exceptions raised by cuspma.

Everything derives from the builtin type a caller would otherwise catch
(ValueError, RuntimeError, NotImplementedError), so plain ``except ValueError``
keeps working around the library.
"""


class DomainError(ValueError):
    '''A point lies outside the model domain or a chart polydisc.'''


class ConfigError(ValueError):
    '''
    Invalid run configuration.

    Args:
        message (str): human readable diagnostic
        field (str): dotted path of the offending entry, e.g. ``geometry.kappa``
    '''

    def __init__(self, message, field=None):
        if field is not None:
            message = "%s: %s" % (field, message)
        super().__init__(message)
        self.field = field


class PositivityError(ValueError):
    '''A metric or a perturbed metric is not positive definite.'''

    def __init__(self, message, point=None, min_eigenvalue=None):
        super().__init__(message)
        self.point = point
        self.min_eigenvalue = min_eigenvalue


class PreconditionError(ValueError):
    '''Inputs violate the stated hypotheses of a probe.'''


class UndefinedRatioError(ValueError):
    '''A ratio was requested for an identically vanishing field.'''


class InterpolationError(ValueError):
    '''Interpolation requested outside the solved grid.'''


class UnsupportedError(NotImplementedError):
    '''The requested dimension or exponent is not handled.'''


class NonConvergenceError(RuntimeError):
    '''
    Iteration stopped without meeting its tolerance.

    Args:
        message (str): diagnostic
        field: last accepted iterate (SolutionField or ndarray)
        history (list): residual sup-norm per iteration
    '''

    def __init__(self, message, field=None, history=None):
        super().__init__(message)
        self.field = field
        self.history = list(history) if history is not None else []


class StepRejectionError(NonConvergenceError):
    '''The damped line search could not find an admissible step.'''


class ContinuationError(NonConvergenceError):
    '''A step of the epsilon schedule failed; ``family`` holds the solved prefix.'''

    def __init__(self, message, family=None, field=None, history=None):
        super().__init__(message, field=field, history=history)
        self.family = family
