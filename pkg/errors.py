class IKZMError(Exception):
    """Base class for simulation and analysis failures."""


class IKZMValidityWarning(UserWarning):
    """A closed-form estimate is used outside the regime it was derived for."""


class ConfigError(IKZMError, ValueError):
    pass


class DomainError(IKZMError, ValueError):
    pass


class CoincidentIonsError(IKZMError, ValueError):
    def __init__(self, distance: float):
        super().__init__(f"ions coincide (separation {distance:.3e} l0)")
        self.distance = distance


class ConvergenceError(IKZMError, RuntimeError):
    def __init__(self, message: str, grad_norm: float):
        super().__init__(f"{message} (gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class IntegrationError(IKZMError, RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} at step {step}")
        self.step = step


class QuenchTimeoutError(IKZMError, RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        details = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in diagnostics.items())
        super().__init__(f"{message} ({details})")
        self.diagnostics = diagnostics


class WindowError(IKZMError, ValueError):
    pass


class IndeterminateCensusError(IKZMError, ValueError):
    pass


class AmbiguousRegimeError(IKZMError, ValueError):
    def __init__(self, diagnostics: dict):
        details = ", ".join(f"{k}={v:.4g}" for k, v in diagnostics.items())
        super().__init__(f"parameters satisfy neither damping regime cleanly ({details})")
        self.diagnostics = diagnostics


class DivergentFrontError(IKZMError, ValueError):
    pass


class InsufficientDataError(IKZMError, ValueError):
    pass


class DataQualityError(IKZMError, RuntimeError):
    pass


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA_QUALITY = 3
