"""Exception types shared across the package."""


class GlassoError(Exception):
    """Base class for all errors raised by glassosym."""


class NotSymmetric(GlassoError, ValueError):
    pass


class NotPositiveDefinite(GlassoError, ValueError):
    def __init__(self, message="matrix is not positive definite", *, stage=None):
        super().__init__(message)
        self.stage = stage


class NoConvergence(GlassoError, RuntimeError):
    """An iterative routine hit its iteration cap.

    ``partial`` holds whatever the routine had computed when it stopped
    (last iterate, partial fit, ...), ``iterations`` the count reached.
    """

    def __init__(self, message, *, iterations=None, partial=None):
        super().__init__(message)
        self.iterations = iterations
        self.partial = partial


class InvalidPhi(GlassoError, ValueError):
    pass


class TooFewSamples(GlassoError, ValueError):
    pass


class LambdaZeroWithSingularS(GlassoError, ValueError):
    pass


class CliqueTooLarge(GlassoError, ValueError):
    pass


class CliqueTimeout(GlassoError, RuntimeError):
    """Clique enumeration exceeded its time budget; ``partial`` is NOT valid."""

    def __init__(self, message, *, partial=None):
        super().__init__(message)
        self.partial = partial
        self.valid = False
