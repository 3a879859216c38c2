"""Exception hierarchy shared by every keyspace module."""


class KeyspaceError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(KeyspaceError, ValueError):
    """A numeric or categorical parameter is outside its legal range."""


class InputError(KeyspaceError, ValueError):
    """Input data (indices, sequences, keys) is malformed or incompatible."""


class AlphabetError(ParameterError):
    """An alphabet specification violates its own consistency rules."""

    def __init__(self, message: str, letter: str | None = None):
        super().__init__(message)
        self.letter = letter


class AlphabetMismatchError(InputError):
    """Texts or models built over different alphabets were combined."""


class InsufficientDataError(KeyspaceError):
    """A corpus is too short for the requested operation."""


class UnobservedFractionError(ParameterError):
    """A cost model was asked to use a marked fraction of zero."""


class SizeError(ParameterError):
    """An exhaustive operation was requested on a too-large alphabet."""
