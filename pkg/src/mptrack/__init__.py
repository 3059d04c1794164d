"""Audio-visual speaker tracking: coherence-field acoustic maps, template-matching
visual cues, channel-attention fusion and a particle filter, with a simulator."""

from __future__ import annotations

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config  # noqa: E402
from .errors import ConfigurationError, InputError  # noqa: E402
from .metrics import EvalReport, acc, evaluate, mae  # noqa: E402
from .pipeline import CueSettings, extract_cues, simulate  # noqa: E402
from .tracker import TrackerConfig, track  # noqa: E402

__all__ = [
    "ConfigurationError", "CueSettings", "EvalReport", "ExperimentConfig", "InputError", "TrackerConfig",
    "acc", "evaluate", "extract_cues", "load_config", "mae", "simulate", "track",
]
