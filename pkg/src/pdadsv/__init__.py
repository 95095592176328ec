"""Voice-based Parkinson's screening toolkit.

Pipeline: WAV -> 32 acoustic features -> four boosted/bagged tree classifiers
-> performance-weighted hard vote -> screening decision. Exposed as a library,
CLI (``pdadsv``), HTTP service and a browser UI.
"""

__version__ = "0.1.0"

from .signal_features import (  # noqa: F401
    AudioClip,
    DspConfig,
    FeatureVector32,
    FEATURE_NAMES,
    decode_wav,
    extract_features,
)
