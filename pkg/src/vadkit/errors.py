"""Exception hierarchy shared across the pipeline."""


class VadkitError(Exception):
    """Base class for all pipeline errors."""


class DatasetError(VadkitError):
    """Malformed or inconsistent on-disk dataset."""


class SpaError(VadkitError):
    """Caption-frequency model cannot be fitted or applied."""


class DivergenceError(VadkitError):
    """Non-finite value produced by the temporal model."""


class MetricsError(VadkitError):
    """Evaluation input does not admit the requested metric."""


class ConfigError(VadkitError):
    """Invalid configuration value or file."""


class PipelineError(VadkitError):
    """Stage cannot run: missing upstream artifact or unusable input."""
