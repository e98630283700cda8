"""Exception types shared across the package."""


class BlendlabError(Exception):
    """Base class for all package errors."""


class ContractViolation(BlendlabError):
    """A documented precondition was broken by the caller."""


class SingularCovarianceError(BlendlabError):
    """A covariance that must be positive definite is singular.

    The message names the offending input.
    """


class FlatDirectionError(BlendlabError):
    """A Hessian expected to be negative definite has flat or rising directions."""

    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = tuple(float(v) for v in eigenvalues)


class ColdStartError(BlendlabError):
    """An agent has no observations yet; the caller must supply a prior-only fallback."""


class ProvenanceError(BlendlabError):
    """An operator statistic references data outside the logged observation set."""


class ConfigurationError(BlendlabError):
    """Required models or configuration entries are missing or inconsistent."""


class InfeasibilityError(BlendlabError):
    """A search exhausted its budget without any finite-density candidate."""
