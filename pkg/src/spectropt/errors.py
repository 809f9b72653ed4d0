class SpectroptError(Exception):
    pass


class PreconditionError(SpectroptError, ValueError):
    pass


class GridMismatchError(PreconditionError):
    pass


class ConvergenceError(SpectroptError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class ConfigError(SpectroptError, ValueError):
    pass
