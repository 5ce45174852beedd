"""Exception hierarchy shared by all rbqi modules."""


class RBQIError(Exception):
    """Base class for every error raised by this package."""


class InputError(RBQIError, ValueError):
    """Arguments violate an operation's precondition."""


class UnsupportedFormat(RBQIError):
    pass


class CorruptData(RBQIError):
    pass


class WrongColorSpace(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class TooSmall(InputError):
    pass


class TooSmallForLevels(TooSmall):
    pass


class BadWindow(InputError):
    pass


class KernelTooLarge(InputError):
    pass


class EmptyInput(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class DegenerateInput(InputError):
    pass


class TooFewSamples(InputError):
    pass


class UnknownParameter(InputError):
    pass


class ManifestError(RBQIError):
    pass


class ParseError(ManifestError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingFile(ManifestError):
    def __init__(self, path, line=None):
        self.path = path
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}missing file {path}")


class MosOutOfRange(ManifestError):
    pass
