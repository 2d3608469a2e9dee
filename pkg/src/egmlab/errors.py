"""Exception hierarchy shared across the toolkit."""


class EgmlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(EgmlabError):
    """Invalid configuration or incompatible inputs (CLI exit code 2)."""


class GenerationError(EgmlabError):
    """Substrate generation could not satisfy the configured bounds."""


class NumericalInstabilityError(EgmlabError):
    """NaN/Inf detected during time stepping (CLI exit code 3)."""

    def __init__(self, step: int, t_ms: float):
        self.step = step
        self.t_ms = t_ms
        super().__init__(
            f"non-finite field values first detected at step {step} (t = {t_ms:.4g} ms); "
            "check the dt <= dx^2 / (4 max eig D) stability bound"
        )


class StaleArtifactError(EgmlabError):
    """An upstream artifact changed after a downstream stage consumed it."""
