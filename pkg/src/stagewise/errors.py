"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class DataFormatError(ValueError):
    """Malformed input file (embeddings, vocabulary, dataset, snapshot)."""


class IntegrityError(RuntimeError):
    """A stored artifact failed structural validation on reload."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training.

    Carries a diagnostic dict in ``details`` so the caller can dump it.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}
