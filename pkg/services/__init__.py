"""
Services package for coc-meanfield.

Exposes the simulator, the mean-field solvers and the experiment harness.
"""

from services.model_core import ModelCore
from services.field_calculus import FieldCalculator
from services.particle_sim import ParticleSimulator, SimulationRunner
from services.crossing import CrossingCalculator, GridCrossing
from services.meanfield import MeanFieldSolver
from services.wave_solver import WaveSolver
from services.operator_fp import OperatorOracle, StructureChecker
from services.experiments import ExperimentRunner
from services.report_writer import ReportWriter

__all__ = [
    "ModelCore",
    "FieldCalculator",
    "ParticleSimulator",
    "SimulationRunner",
    "CrossingCalculator",
    "GridCrossing",
    "MeanFieldSolver",
    "WaveSolver",
    "OperatorOracle",
    "StructureChecker",
    "ExperimentRunner",
    "ReportWriter",
]
