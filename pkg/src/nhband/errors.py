"""Exception types shared across the package."""


class NhbandError(Exception):
    """Base class for all package errors."""


class PotentialRepresentationError(NhbandError):
    """A Fourier component of V(x) cannot be represented at the current cutoff."""


class MissingGridPointError(NhbandError):
    """A required quasimomentum (k=0 or k=pi) is not on the k-grid."""


class ZeroPivotError(NhbandError):
    """The l=0 Bloch coefficient vanishes; the phase convention is undefined."""


class BandsNotSeparatedError(NhbandError):
    """A single-band gauge was requested while the bands still share exceptional points."""


class SingularProjectionError(NhbandError):
    """The trial-function projection matrix D(k) is numerically singular."""


class UnlabeledKError(NhbandError):
    """A k-point fits neither the real-spectrum nor the conjugate-pair region."""


class BaseOnCurveError(NhbandError):
    """The winding base point lies on the energy curve."""


class ConfigError(NhbandError):
    """A run configuration is malformed; the message names the offending field."""
