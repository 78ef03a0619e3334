"""Exception and warning types raised across the package."""


class JacobNetError(Exception):
    """Base class for all package errors."""


class NotSkewSymmetric(JacobNetError, ValueError):
    pass


class DimensionMismatch(JacobNetError, ValueError):
    pass


class NonFinite(JacobNetError, FloatingPointError):
    pass


class SingularUpdate(JacobNetError, ArithmeticError):
    pass


class SpecMismatch(JacobNetError, ValueError):
    pass


class GridMismatch(JacobNetError, ValueError):
    pass


class ShapeMismatch(JacobNetError, ValueError):
    pass


class WidthMismatch(ShapeMismatch):
    pass


class MalformedRow(JacobNetError, ValueError):
    """A CSV row could not be parsed; ``row`` is its zero-based index."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DomainError(JacobNetError, ValueError):
    pass


class UnknownAlgo(JacobNetError, ValueError):
    pass


class BadPlan(JacobNetError, ValueError):
    pass


class EmptyDataset(JacobNetError, ValueError):
    pass


class SingularSystem(JacobNetError, ArithmeticError):
    pass


class CorruptContainer(JacobNetError, ValueError):
    """A model file failed validation; ``section`` names the offending part."""

    def __init__(self, message, section=None):
        super().__init__(f"{message} (section: {section})" if section else message)
        self.section = section


class UnsupportedVersion(CorruptContainer):
    pass


class DegenerateColumn(UserWarning):
    """Emitted when a scaler meets a constant column and passes it through."""
