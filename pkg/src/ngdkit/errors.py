"""Exception types shared across the toolkit."""


class ShapeError(ValueError):
    """Operand shapes are inconsistent with the operation's contract."""


class SingularMatrixError(ArithmeticError):
    """A factorization failed; the message names the failing pivot."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared where the contract requires finiteness."""


class CapacityError(ValueError):
    """A dense computation exceeds its configured size limit."""


class DataFormatError(ValueError):
    """A dataset byte stream violates its documented format."""


class ConfigError(ValueError):
    """An experiment configuration failed schema or semantic validation."""


class UnsupportedNetworkError(ValueError):
    """The requested operation does not apply to this architecture."""
