"""Bridge from trained torch models to the audit interchange format."""

from .errors import CheckpointMismatch, ExportError, LayerNotFound
from .export import ExportJob, export_attributions, relu_l1
from .gradcam import feature_maps, final_linear_head, gradcam, resolve_layer

__all__ = [
    "CheckpointMismatch",
    "ExportError",
    "ExportJob",
    "LayerNotFound",
    "export_attributions",
    "feature_maps",
    "final_linear_head",
    "gradcam",
    "relu_l1",
    "resolve_layer",
]

__version__ = "0.1.0"
