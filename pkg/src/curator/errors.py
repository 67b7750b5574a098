"""Exception types shared across the curator package."""


class CuratorError(Exception):
    """Base class for all curator-specific errors."""


class DimensionError(CuratorError):
    """Vector dimensions do not match."""


class NormalizationError(CuratorError):
    """Vector cannot be normalized (zero or non-finite input)."""


class DecodeError(CuratorError):
    """Bytes do not decode as an image."""


class ProviderUnavailable(CuratorError):
    """Remote embedding backend could not be reached. Retryable."""


class EmptyManifestError(CuratorError):
    """Manifest file contained no valid records."""


class EmptyReferenceError(CuratorError):
    """Reference set is empty."""


class MissingFeatureError(CuratorError):
    """A record lacks the hash or embedding required by the dedup method."""


class EmptyInputError(CuratorError):
    """An operation that needs at least one item received none."""


class NoDataError(CuratorError):
    """A statistic was requested over zero usable observations."""


class NoVotesError(CuratorError):
    """Verdict aggregation requires at least one vote."""


class PreconditionError(CuratorError):
    """An operation-specific precondition was violated."""


class UnknownCountryError(CuratorError):
    """Country code is not one of the 11 supported SEA countries."""
