"""
Models package for coc-meanfield.
Exposes all model dataclasses for import in services, endpoints, and tests.
"""

from models.size_law import DistFamily, SizeDistribution
from models.component_model import ComponentModel, ModelKind
from models.system_config import Frame, FrameKind, JobClass, SystemConfig, ValidatedConfig
from models.tail_field import InterpolationMode, TailField
from models.sim_state import ArrivalEvent, SimState, StationarySample, VelocityEstimate
from models.fixed_point import (
    Classification,
    DMonotonicityCell,
    DMonotonicityReport,
    FieldTrajectory,
    FixedPointResult,
    GridSpec,
    SpeedRange,
    UniquenessProbe,
)
from models.experiment import AssertionResult, ExperimentKind, ExperimentReport, ExperimentSpec

__all__ = [
    "DistFamily",
    "SizeDistribution",
    "ComponentModel",
    "ModelKind",
    "Frame",
    "FrameKind",
    "JobClass",
    "SystemConfig",
    "ValidatedConfig",
    "InterpolationMode",
    "TailField",
    "ArrivalEvent",
    "SimState",
    "StationarySample",
    "VelocityEstimate",
    "Classification",
    "DMonotonicityCell",
    "DMonotonicityReport",
    "FieldTrajectory",
    "FixedPointResult",
    "GridSpec",
    "SpeedRange",
    "UniquenessProbe",
    "AssertionResult",
    "ExperimentKind",
    "ExperimentReport",
    "ExperimentSpec",
]
