"""Exception types raised by the package."""


class InvalidDimsError(ValueError):
    """Model dimensions are inconsistent (e.g. map rank larger than the image)."""


class DegenerateInputError(ValueError):
    """Input has no usable signal (zero cube, zero column, collapsed residual)."""


class NumericalError(ArithmeticError):
    """A NaN or infinite value appeared during a computation.

    ``trace`` holds the partial :class:`~gradpapa.solver.RunTrace` when the
    error is raised from inside a solver run, otherwise ``None``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
