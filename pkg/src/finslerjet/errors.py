"""Exception hierarchy shared by all modules."""


class FinslerJetError(Exception):
    """Base class for every error raised by this package."""


class JetConfigError(FinslerJetError):
    """Unsupported jet order or mismatched jet spaces."""


class JetOrderError(FinslerJetError):
    """A partial derivative above the stored order was requested."""


class SingularityError(FinslerJetError):
    """A division, root or logarithm hit a value too close to zero."""


class DegeneracyError(FinslerJetError):
    """A metric matrix is singular or not positive definite."""


class DomainError(FinslerJetError):
    """An argument lies outside the domain where a formula is valid."""


class RandersDegeneracyError(FinslerJetError):
    """k2 == k1*k3: the metric is of Randers type and excluded."""


class SingularODEError(FinslerJetError):
    """The leading coefficient 1+(k1+k3)s^2+k2 s^4 vanishes in the domain."""


class InversionError(FinslerJetError):
    """Root-finding for b^2 failed: no root or more than one root."""

    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class DimensionError(FinslerJetError):
    """The operation needs a larger dimension."""


class ConstancyError(FinslerJetError):
    """A quantity that must be constant varied beyond tolerance."""


class ConfigError(FinslerJetError):
    """Invalid scenario configuration or CLI usage."""


class DegenerateFamilyError(FinslerJetError):
    """Parameters outside the family a construction is defined for."""
