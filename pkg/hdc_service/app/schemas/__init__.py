from .reports import BenchRow, ClassificationRow, ClassificationSummary, ImageManifest, MonitorRow, RunReport
from .run_config import Application, BundlingMode, RunConfig, Via

__all__ = [
    "Application",
    "BenchRow",
    "BundlingMode",
    "ClassificationRow",
    "ClassificationSummary",
    "ImageManifest",
    "MonitorRow",
    "RunConfig",
    "RunReport",
    "Via",
]
