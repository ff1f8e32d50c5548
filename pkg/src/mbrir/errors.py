"""Exception types raised across the package."""


class MbrirError(Exception):
    """Base class for all errors raised by mbrir."""


class PlacementFailure(MbrirError):
    pass


class DegenerateData(MbrirError, ValueError):
    pass


class BudgetExceeded(MbrirError):
    pass


class LengthTooShort(MbrirError, ValueError):
    pass


class LengthMismatch(MbrirError, ValueError):
    pass


class InsufficientDecay(MbrirError):
    pass


class SilentInput(MbrirError, ValueError):
    pass


class TooShort(MbrirError, ValueError):
    pass


class ZeroNoise(MbrirError, ValueError):
    pass


class ZeroSpeech(MbrirError, ValueError):
    pass


class SilentReference(MbrirError, ValueError):
    pass


class OutDirUnwritable(MbrirError, OSError):
    pass
