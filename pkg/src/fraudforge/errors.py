"""Exception hierarchy shared by every fraudforge module."""


class ForgeError(Exception):
    """Base class for all library errors."""


# tensor / nn
class ShapeMismatch(ForgeError, ValueError):
    pass


class AxisOutOfRange(ForgeError, ValueError):
    pass


class NotScalar(ForgeError, ValueError):
    pass


class MissingGrad(ForgeError, RuntimeError):
    pass


# data
class HeaderMismatch(ForgeError, ValueError):
    pass


class ParseError(ForgeError, ValueError):
    def __init__(self, row: int, col: int, message: str = ""):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {message}".rstrip(": "))


class EmptyFile(ForgeError, ValueError):
    pass


class EmptyDataset(ForgeError, ValueError):
    pass


class SchemaMismatch(ForgeError, ValueError):
    pass


class SingleClass(ForgeError, ValueError):
    pass


class WidthMismatch(ForgeError, ValueError):
    pass


class LengthMismatch(ForgeError, ValueError):
    pass


# oversampling / training
class TooFewMinoritySamples(ForgeError, ValueError):
    pass


class EmptyMinority(ForgeError, ValueError):
    pass


class DivergenceDetected(ForgeError, RuntimeError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class EmptyData(ForgeError, ValueError):
    pass


# checkpoints
class CorruptManifest(ForgeError, ValueError):
    pass


class VersionMismatch(ForgeError, ValueError):
    pass
