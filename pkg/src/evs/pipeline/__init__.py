"""Dataset ingestion, EVS splits, synthetic scenes and end-to-end prior generation."""

from .dataset import Dataset, augmented_id, load_dataset, make_evs_split, save_dataset
from .priors import PipelineConfig, PriorResult, run_priors
from .synth import KINDS, SynthScene, synth_scene

__all__ = [
    "augmented_id",
    "Dataset",
    "KINDS",
    "load_dataset",
    "make_evs_split",
    "PipelineConfig",
    "PriorResult",
    "run_priors",
    "save_dataset",
    "synth_scene",
    "SynthScene",
]
