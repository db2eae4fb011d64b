"""
Experiment spec and report dataclasses for the simulation-vs-solver harness.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from models.fixed_point import GridSpec
from models.system_config import SystemConfig
from utils.errors import ValidationError


class ExperimentKind(str, Enum):
    VN_CONVERGENCE = "vn_convergence"
    SSAI_LEFT = "ssai_left"
    SSAI_RIGHT = "ssai_right"
    PHI1_BOUND = "phi1_bound"
    LOAD_CURVE = "load_curve"
    SPEED_RANGE_REPORT = "speed_range_report"


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    config: SystemConfig
    n_list: Tuple[int, ...] = (100,)
    horizon: float = 200.0
    burn_in: float = 50.0
    replicas: int = 2
    seed: int = 0
    out_dir: Optional[str] = None
    config_path: Optional[str] = None
    speeds: Tuple[float, ...] = ()
    nu: float = 0.5
    batches: int = 20
    stride: float = 1.0
    window: float = 100.0
    workers: int = 1
    levy_tol: float = 0.05
    busy_tol: float = 0.02
    tol_v: float = 1e-3
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        if self.replicas < 1:
            raise ValidationError("replica count must be at least 1", field="replicas", error_code="PARAM_RANGE")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValidationError("n-list must be strictly increasing", field="n_list", error_code="PARAM_RANGE")

    def provenance(self) -> dict:
        return {
            "experiment": self.kind.value,
            "config_hash": self.config.config_hash(),
            "config": self.config.to_dict(),
            "config_path": self.config_path,
            "seed": self.seed,
            "n_list": list(self.n_list),
            "horizon": self.horizon,
            "burn_in": self.burn_in,
            "replicas": self.replicas,
            "speeds": list(self.speeds),
            "nu": self.nu,
            "batches": self.batches,
            "stride": self.stride,
            "window": self.window,
            "grid": self.grid.to_dict(),
        }


@dataclass
class AssertionResult:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ExperimentReport:
    experiment: str
    config_hash: str
    seed: int
    cell_keys: List[str]
    cells: List[Dict[str, Any]] = field(default_factory=list)
    references: Dict[str, Any] = field(default_factory=dict)
    assertions: List[AssertionResult] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    @property
    def base_name(self) -> str:
        return f"{self.experiment}_{self.config_hash}_{self.seed}"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "cell_keys": list(self.cell_keys),
            "cells": self.cells,
            "references": self.references,
            "assertions": [a.to_dict() for a in self.assertions],
            "passed": self.passed,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            experiment=d["experiment"],
            config_hash=d["config_hash"],
            seed=d["seed"],
            cell_keys=list(d.get("cell_keys", [])),
            cells=list(d.get("cells", [])),
            references=dict(d.get("references", {})),
            assertions=[AssertionResult(**a) for a in d.get("assertions", [])],
            provenance=dict(d.get("provenance", {})),
        )
