"""Object-level video anomaly detection pipeline.

Scores video frames by combining a caption-frequency static anomaly score
with the prediction error of a linear state-space temporal model, then
fuses, smooths, and evaluates with frame-level micro-AUC. Operates entirely
on precomputed per-object detections, features, and caption answers.
"""

__version__ = "0.1.0"

from vadkit.errors import (
    ConfigError,
    DatasetError,
    DivergenceError,
    MetricsError,
    PipelineError,
    SpaError,
    VadkitError,
)

__all__ = [
    "ConfigError",
    "DatasetError",
    "DivergenceError",
    "MetricsError",
    "PipelineError",
    "SpaError",
    "VadkitError",
    "__version__",
]
