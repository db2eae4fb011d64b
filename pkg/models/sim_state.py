"""
Simulator state and estimate dataclasses.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from models.system_config import Frame
from models.tail_field import TailField


@dataclass
class SimState:
    """
    Positions of n particles in anchored coordinates.

    `positions[i]` is the location of particle i at time `stamps[i]`; drift
    since then is applied lazily by `positions_at`.
    """

    positions: np.ndarray
    stamps: np.ndarray
    clock: float
    frame: Frame
    speed: float
    perm: np.ndarray
    arrivals: np.ndarray
    total_displacement: float = 0.0
    events: int = 0

    @property
    def n(self) -> int:
        return int(self.positions.size)

    def positions_at(self, idx=None, t: Optional[float] = None) -> np.ndarray:
        t = self.clock if t is None else t
        if idx is None:
            pos, stamps = self.positions, self.stamps
        else:
            pos, stamps = self.positions[idx], self.stamps[idx]
        if self.speed == 0.0:
            return pos.copy()
        return np.maximum(self.frame.left, pos - self.speed * (t - stamps))

    def current_positions(self) -> np.ndarray:
        return self.positions_at()

    def copy(self) -> "SimState":
        return SimState(
            positions=self.positions.copy(),
            stamps=self.stamps.copy(),
            clock=self.clock,
            frame=self.frame,
            speed=self.speed,
            perm=self.perm.copy(),
            arrivals=self.arrivals.copy(),
            total_displacement=self.total_displacement,
            events=self.events,
        )


@dataclass
class ArrivalEvent:
    dt: float
    cls_index: int
    uniforms: np.ndarray
    sizes: np.ndarray


@dataclass
class VelocityEstimate:
    quantile_rate: float
    quantile_half_width: float
    mean_rate: float
    mean_half_width: float
    nu: float
    horizon: float
    burn_in: float
    n: int
    batches: int
    recurrence_suspect: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class StationarySample:
    snapshots: List[TailField]
    times: List[float]
    pooled: TailField
    phi1_mean: float
    phi1_half_width: float
    phi1_series: List[float] = field(default_factory=list)
    busy_fraction: Optional[float] = None
    busy_half_width: Optional[float] = None
    centered: bool = False
    unstable_suspected: bool = False

    def to_dict(self, include_snapshots: bool = False) -> dict:
        d = {
            "times": list(self.times),
            "phi1_mean": self.phi1_mean,
            "phi1_half_width": self.phi1_half_width,
            "busy_fraction": self.busy_fraction,
            "busy_half_width": self.busy_half_width,
            "centered": self.centered,
            "unstable_suspected": self.unstable_suspected,
            "pooled": self.pooled.to_dict(),
        }
        if include_snapshots:
            d["snapshots"] = [s.to_dict() for s in self.snapshots]
        return d
