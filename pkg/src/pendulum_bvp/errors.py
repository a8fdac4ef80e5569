"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the region where a quantity is defined."""


class DivergenceError(ArithmeticError):
    """A quadrature or iteration failed to converge."""


class NonIntegrableError(DivergenceError):
    """The integrand has a singularity that is not integrable."""


class MonotoneBranchError(RuntimeError):
    """A branch has no interior stationary point on the scanned grid."""
