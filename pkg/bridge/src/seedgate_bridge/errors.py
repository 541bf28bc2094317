class BridgeError(Exception):
    """Base class for extraction failures."""


class ModelLoadFailure(BridgeError):
    """A requested backbone or its weights could not be loaded."""


class DecodeFailure(BridgeError):
    """A frame file could not be decoded as an image."""


class JobValidationError(BridgeError):
    """The extraction job description is invalid (bad click, empty clip, ...)."""
