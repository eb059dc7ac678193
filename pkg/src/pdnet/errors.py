"""Exception types shared across the package."""


class PdnetError(Exception):
    """Base class for errors raised by pdnet."""


class ShapeError(PdnetError, ValueError):
    pass


class NonFiniteError(PdnetError, FloatingPointError):
    pass


class FormatError(PdnetError, ValueError):
    """A file on disk does not match the expected format."""


class ManifestError(PdnetError, ValueError):
    pass


class ArmMismatchError(ManifestError):
    pass


class CheckpointError(PdnetError, ValueError):
    pass
