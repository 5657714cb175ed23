"""Cue Ball / Recall Net associative memory.

Attribute groups ("cue balls") of grandmother-cell neurons, each of which
stores one whole binary pattern image, linked ball-to-ball so that
presenting one image recalls a chain of associated images.
"""

from cbrn.codec import (
    DatasetManifest,
    PatternImage,
    PatternVector,
    cosine,
    load_pbm,
    save_pbm,
    synth_pattern,
    vectorize,
)
from cbrn.errors import (
    ArchiveError,
    CbrnError,
    LearningError,
    ManifestError,
    NormalizationError,
    PbmError,
    RecallError,
)
from cbrn.learning import (
    ChainSpec,
    TrainingReport,
    default_chains,
    learn_u,
    learn_v,
    learn_w,
    train_system,
)
from cbrn.model import (
    CbrnSystem,
    CrossLink,
    CueBall,
    SystemConfig,
    cross_preactivation,
    cue_preactivation,
    recall_output,
    threshold,
)
from cbrn.persistence import load_weights, save_weights
from cbrn.recall import (
    BallResponse,
    RecallTrace,
    chain_recall,
    identify,
    propagate,
    reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "BallResponse",
    "CbrnError",
    "CbrnSystem",
    "ChainSpec",
    "CrossLink",
    "CueBall",
    "DatasetManifest",
    "LearningError",
    "ManifestError",
    "NormalizationError",
    "PatternImage",
    "PatternVector",
    "PbmError",
    "RecallError",
    "RecallTrace",
    "SystemConfig",
    "TrainingReport",
    "chain_recall",
    "cosine",
    "cross_preactivation",
    "cue_preactivation",
    "default_chains",
    "identify",
    "learn_u",
    "learn_v",
    "learn_w",
    "load_pbm",
    "load_weights",
    "propagate",
    "recall_output",
    "reconstruct",
    "save_pbm",
    "save_weights",
    "synth_pattern",
    "threshold",
    "train_system",
    "vectorize",
]
