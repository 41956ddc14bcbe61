"""Export PyTorch models to the layer-graph interchange format."""

from .export import ExportError, ExportSession, export_model

__all__ = ["ExportError", "ExportSession", "export_model"]
__version__ = "0.1.0"
