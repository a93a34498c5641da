"""Exception types shared across the package."""

from __future__ import annotations


class LaceError(Exception):
    """Base class for every error raised by this package."""


class InvalidCondition(LaceError):
    """Condition text is empty or otherwise unusable."""


class ParseError(LaceError):
    """A document is not well-formed (e.g. broken JSON)."""


class SchemaError(LaceError):
    """A document parsed but does not match the expected shape."""


class EmptyInput(LaceError):
    """An operation was given nothing to work on."""


class TaxonomyError(LaceError):
    """A taxonomy file is malformed or contains a cycle."""


class EnumerationTooLarge(LaceError):
    """The brute-force assignment space exceeds the configured bound."""


class UnverifiedPolicy(LaceError):
    """An operation requires a policy with Verified status."""


class CorpusFormatError(LaceError):
    """A persisted corpus file is malformed.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AuditWriteError(LaceError):
    """An audit record could not be written to disk.

    Raised instead of letting the decision succeed unaudited: an
    acknowledged decision must have its record on disk.
    """


class ProviderError(LaceError):
    """Base class for provider call failures."""


class Timeout(ProviderError):
    """The provider did not answer within the configured timeout."""


class TransportError(ProviderError):
    """The provider could not be reached or answered with a server error."""


class AuthError(ProviderError):
    """The provider rejected the configured credential."""


class MockMiss(ProviderError):
    """A scripted mock provider has no reply for the given prompt."""


class MalformedOutput(ProviderError):
    """A provider reply could not be parsed after the retry budget."""


class ConfigError(LaceError):
    """An engine configuration file is invalid."""
