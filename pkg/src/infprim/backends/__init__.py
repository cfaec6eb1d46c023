"""Inference-primitive backends."""

from .common import (AnnealParams, FixedSpinReduction, ScheduleSpec, apply_fixed_spins,
                     build_schedule, read_seeds)
from .dispatch import BACKENDS, infer
from .piqa import piqa_sample
from .sa import sa_sample, temperature_ladder

__all__ = [
    "AnnealParams", "BACKENDS", "FixedSpinReduction", "ScheduleSpec", "apply_fixed_spins",
    "build_schedule", "infer", "piqa_sample", "read_seeds", "sa_sample", "temperature_ladder",
]
