"""RGB-D foreground segmentation: GMM and PBAS background models with a
deterministic data-parallel CPU engine, served over FastAPI or driven from
the CLI."""

__version__ = "0.1.0"

from .config import PipelineConfig
from .engine import RunStats, SegmentationEngine, pixel_rng, process_sequence
from .frames import RgbdFrame, SequenceSource
from .gmm import GmmParams
from .metrics import ConfusionCounts, MetricsReport, compare_masks, compute_metrics
from .pbas import PbasParams

__all__ = [
    "PipelineConfig", "RunStats", "SegmentationEngine", "pixel_rng",
    "process_sequence", "RgbdFrame", "SequenceSource", "GmmParams",
    "ConfusionCounts", "MetricsReport", "compare_masks", "compute_metrics",
    "PbasParams", "__version__",
]
