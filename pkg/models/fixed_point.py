"""
Solver result dataclasses: fixed points, speed ranges, trajectories and
structural-check reports, plus the numerical GridSpec shared by all solvers.
"""

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from models.system_config import Frame
from models.tail_field import TailField


class Classification(str, Enum):
    HIT_AXIS = "hit_axis"
    PROPER_FREE = "proper_free"
    IMPROPER_RIGHT = "improper_right"
    REGULATED = "regulated"


@dataclass(frozen=True)
class GridSpec:
    """
    Numerical settings. Steps are relative to the mean of the mixture
    marginal unless an absolute `step` is given.
    """

    step: Optional[float] = None
    rel_step: float = 0.005  # shooting
    relax_rel_step: float = 0.01  # relaxation and time integration
    span: float = 40.0  # initial relaxation span, in mean sizes
    march_span: float = 80.0  # shooting span, in units of (mean + 1/beta)
    max_points: int = 400_000
    tol_zero: float = 1e-6
    slope_tol: float = 1e-8
    plateau_spans: float = 5.0  # plateau length, in units of 1/beta
    edge_tol: float = 1e-9
    tail_tol: float = 1e-12
    eps0: float = 0.999
    residual_tol: float = 1e-3

    def shooting_step(self, scale: float) -> float:
        return self.step if self.step is not None else self.rel_step * scale

    def relax_step(self, scale: float) -> float:
        return self.step if self.step is not None else self.relax_rel_step * scale

    def refined(self, factor: float = 2.0) -> "GridSpec":
        return replace(
            self,
            step=None if self.step is None else self.step / factor,
            rel_step=self.rel_step / factor,
            relax_rel_step=self.relax_rel_step / factor,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "GridSpec":
        return cls(**(d or {}))


@dataclass
class FixedPointResult:
    field: TailField
    speed: float
    classification: Classification
    frame: Frame
    grid_step: float
    residual: float = 0.0
    load: Optional[float] = None
    hit_point: Optional[float] = None
    eps_star: Optional[float] = None
    beta_used: Optional[float] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def sidecar(self) -> dict:
        return {
            "v": self.speed,
            "classification": self.classification.value,
            "load": self.load,
            "residual": self.residual,
            "beta": self.beta_used,
            "hit_point": self.hit_point,
            "eps_star": self.eps_star,
            "grid_step": self.grid_step,
        }

    def to_dict(self, include_field: bool = True) -> dict:
        d = self.sidecar()
        d["frame"] = self.frame.to_dict()
        d["diagnostics"] = dict(self.diagnostics)
        if include_field:
            d["field"] = self.field.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FixedPointResult":
        return cls(
            field=TailField.from_dict(d["field"]),
            speed=d["v"],
            classification=Classification(d["classification"]),
            frame=Frame.from_dict(d.get("frame")),
            grid_step=d["grid_step"],
            residual=d.get("residual", 0.0),
            load=d.get("load"),
            hit_point=d.get("hit_point"),
            eps_star=d.get("eps_star"),
            beta_used=d.get("beta"),
            diagnostics=d.get("diagnostics") or {},
        )


@dataclass
class SpeedRange:
    v_min: float
    v_max: float
    tol_v: float
    probes: List[Tuple[float, str]] = field(default_factory=list)
    analytic_fallback: bool = False
    lower_bracket: Optional[Tuple[float, float]] = None  # (largest hit speed, smallest non-hit speed)
    upper_bracket: Optional[Tuple[float, float]] = None  # (largest proper speed, smallest improper speed)

    @property
    def v_star(self) -> float:
        return 0.5 * (self.v_min + self.v_max)

    def to_dict(self) -> dict:
        return {
            "v_min": self.v_min,
            "v_max": self.v_max,
            "v_star": self.v_star,
            "tol_v": self.tol_v,
            "probes": [[v, c] for v, c in self.probes],
            "analytic_fallback": self.analytic_fallback,
            "lower_bracket": list(self.lower_bracket) if self.lower_bracket else None,
            "upper_bracket": list(self.upper_bracket) if self.upper_bracket else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpeedRange":
        return cls(
            v_min=d["v_min"],
            v_max=d["v_max"],
            tol_v=d["tol_v"],
            probes=[(v, c) for v, c in d.get("probes", [])],
            analytic_fallback=d.get("analytic_fallback", False),
            lower_bracket=tuple(d["lower_bracket"]) if d.get("lower_bracket") else None,
            upper_bracket=tuple(d["upper_bracket"]) if d.get("upper_bracket") else None,
        )


@dataclass
class FieldTrajectory:
    times: List[float]
    fields: List[TailField]
    anchored: bool = True

    def final(self) -> TailField:
        return self.fields[-1]


@dataclass
class DMonotonicityCell:
    gaps: Tuple[float, ...]
    mean: float
    half_width: float


@dataclass
class DMonotonicityReport:
    d: int
    k: int
    samples: int
    cells: List[DMonotonicityCell]
    violations: List[Tuple[Tuple[float, ...], Tuple[float, ...], float]]
    is_d_monotone: bool
    is_work_conserving: bool

    def cell(self, gaps) -> DMonotonicityCell:
        gaps = tuple(float(g) for g in gaps)
        for c in self.cells:
            if c.gaps == gaps:
                return c
        raise KeyError(gaps)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "samples": self.samples,
            "cells": [{"gaps": list(c.gaps), "mean": c.mean, "half_width": c.half_width} for c in self.cells],
            "violations": [{"from": list(a), "to": list(b), "excess": e} for a, b, e in self.violations],
            "is_d_monotone": self.is_d_monotone,
            "is_work_conserving": self.is_work_conserving,
        }


@dataclass
class UniquenessProbe:
    speed: float
    reference_load: float
    loads: List[float]
    outcomes: List[str]
    tail_levels: List[float]
    distinct_tail_levels: bool

    def to_dict(self) -> dict:
        return asdict(self)
