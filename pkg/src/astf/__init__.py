"""Abstract signal time-frequency (ASTF) diagrams for long-term spectrum data."""

from .abstraction import CellAbstraction, SignalAbstraction, StrengthThresholds, abstract_signal, strength_level
from .metrics import LossModel, LossWeights, VisualGeometry, classify_slice, cv_ts, dif_dr, loss, sim_cd, visual_duty_ratio
from .model import (
    AnomalyRecord,
    Cscp,
    FrequencyFrame,
    Segmentation,
    SignalRecord,
    StateSequence,
    extract_cscps,
)
from .preprocess import DataError, binarize_states, detect_anomalies, identify_signals
from .render import RenderSpec, render_cell, render_diagram
from .segmentation import (
    ALGORITHMS,
    SegmentationConfig,
    SegmentationResult,
    bssva,
    segment,
    segment_bu,
    segment_el,
    segment_fp,
    segment_sw,
    segment_td,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "AnomalyRecord",
    "CellAbstraction",
    "Cscp",
    "DataError",
    "FrequencyFrame",
    "LossModel",
    "LossWeights",
    "RenderSpec",
    "Segmentation",
    "SegmentationConfig",
    "SegmentationResult",
    "SignalAbstraction",
    "SignalRecord",
    "StateSequence",
    "StrengthThresholds",
    "VisualGeometry",
    "abstract_signal",
    "binarize_states",
    "bssva",
    "classify_slice",
    "cv_ts",
    "detect_anomalies",
    "dif_dr",
    "extract_cscps",
    "identify_signals",
    "loss",
    "render_cell",
    "render_diagram",
    "segment",
    "segment_bu",
    "segment_el",
    "segment_fp",
    "segment_sw",
    "segment_td",
    "sim_cd",
    "strength_level",
    "visual_duty_ratio",
]
