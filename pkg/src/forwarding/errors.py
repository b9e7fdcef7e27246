"""Exception hierarchy for the forwarding pipeline."""


class ForwardingError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGridError(ForwardingError, ValueError):
    pass


class DimensionError(ForwardingError, ValueError):
    pass


class DomainError(ForwardingError, ValueError):
    pass


class ContractError(ForwardingError, TypeError):
    """An operator is missing the space tags needed for an adjoint or norm."""


class AssumptionViolation(ForwardingError):
    pass


class ConditioningError(ForwardingError):
    """A shifted solve is numerically singular.

    ``shift`` holds the offending eigenvalue of S.
    """

    def __init__(self, message, shift=None):
        super().__init__(message)
        self.shift = shift


class RepresentationError(ForwardingError):
    pass


class DegenerateGainError(ForwardingError):
    pass


class GainTooLargeError(ForwardingError):
    pass


class CertificateImpossibleError(ForwardingError):
    pass


class StepSizeError(ForwardingError):
    pass


class NumericError(ForwardingError):
    pass


class ConfigError(ForwardingError, ValueError):
    pass
