from __future__ import annotations


class SaliencyError(ValueError):
    """Base class for every error raised by the saliency toolkit."""


class InputError(SaliencyError):
    pass


class AdmissibilityError(InputError):
    """Too few samples for the requested dimensionality (N < 2^D)."""


class FormatError(InputError):
    def __init__(self, message: str, location: str | None = None) -> None:
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class UndefinedError(SaliencyError):
    """The requested quantity has a zero denominator."""


class IoError(SaliencyError):
    """A path could not be read or written."""
