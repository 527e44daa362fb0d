"""Exception types shared across the package."""


class DWTRecError(Exception):
    """Base class for every error raised by dwtrec."""


class ShapeMismatch(DWTRecError, ValueError):
    pass


class UnsupportedWavelet(DWTRecError, ValueError):
    pass


class ExcessiveDepth(DWTRecError, ValueError):
    pass


class EmptySignal(DWTRecError, ValueError):
    pass


class InvalidItemId(DWTRecError, ValueError):
    pass


class InvalidLabel(DWTRecError, ValueError):
    pass


class ParseError(DWTRecError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDataset(DWTRecError, ValueError):
    pass


class CheckpointError(DWTRecError):
    pass


class DivergenceError(DWTRecError, ArithmeticError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite training loss {loss!r} in epoch {epoch}")


class ConfigError(DWTRecError, ValueError):
    pass
