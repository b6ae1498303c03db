"""Exception hierarchy shared by all modelkit modules."""


class ModelkitError(ValueError):
    """Base class for errors raised by modelkit."""


class DataError(ModelkitError):
    """Input data is malformed or violates a type invariant."""


class CollinearDesignError(ModelkitError):
    """The centered Gram matrix is singular or too ill-conditioned."""


class ConvergenceError(ModelkitError):
    """An iterative procedure did not terminate as required.

    ``residual`` carries the last achieved residual norm.
    """

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual
