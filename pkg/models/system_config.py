"""
SystemConfig dataclass - job classes, regulation frame and drift speed.

Also holds the versioned JSON schema (spec_version 1) and the config hash
used in cache keys and output file names.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Tuple

from models.component_model import ComponentModel
from utils.errors import ValidationError
from utils.validators import validate_required_fields

SCHEMA_VERSION = 1


class FrameKind(str, Enum):
    FREE = "free"
    LEFT = "left"
    RIGHT = "right"
    FINITE = "finite"


@dataclass(frozen=True)
class JobClass:
    d: int
    k: int
    sigma: float
    sizes: ComponentModel

    def to_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "sigma": self.sigma, "sizes": self.sizes.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "JobClass":
        validate_required_fields(d, ["d", "k", "sigma", "sizes"])
        return cls(d=int(d["d"]), k=int(d["k"]), sigma=float(d["sigma"]), sizes=ComponentModel.from_dict(d["sizes"]))


@dataclass(frozen=True)
class Frame:
    left: float = -math.inf
    right: float = math.inf

    @property
    def kind(self) -> FrameKind:
        lf, rf = math.isfinite(self.left), math.isfinite(self.right)
        if lf and rf:
            return FrameKind.FINITE
        if lf:
            return FrameKind.LEFT
        if rf:
            return FrameKind.RIGHT
        return FrameKind.FREE

    @property
    def is_free(self) -> bool:
        return self.kind == FrameKind.FREE

    def contains(self, w: float) -> bool:
        return self.left <= w <= self.right

    def to_dict(self) -> dict:
        return {
            "left": self.left if math.isfinite(self.left) else None,
            "right": self.right if math.isfinite(self.right) else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Frame":
        d = d or {}
        left = d.get("left")
        right = d.get("right")
        return cls(
            left=-math.inf if left is None else float(left),
            right=math.inf if right is None else float(right),
        )


@dataclass(frozen=True)
class SystemConfig:
    classes: Tuple[JobClass, ...]
    frame: Frame = field(default_factory=Frame)
    speed: float = 0.0

    @property
    def lam(self) -> float:
        return sum(c.sigma for c in self.classes)

    @property
    def pi(self) -> Tuple[float, ...]:
        lam = self.lam
        return tuple(c.sigma / lam for c in self.classes)

    @property
    def alpha(self) -> float:
        return sum(c.sigma * c.d for c in self.classes)

    @property
    def dbar(self) -> int:
        return max(c.d for c in self.classes)

    def with_frame(self, frame: Frame) -> "SystemConfig":
        return replace(self, frame=frame)

    def with_speed(self, speed: float) -> "SystemConfig":
        return replace(self, speed=float(speed))

    def scaled(self, factor: float) -> "SystemConfig":
        """Joint rescaling of all rates and the speed."""
        return replace(
            self,
            classes=tuple(replace(c, sigma=c.sigma * factor) for c in self.classes),
            speed=self.speed * factor,
        )

    def to_dict(self) -> dict:
        return {
            "spec_version": SCHEMA_VERSION,
            "classes": [c.to_dict() for c in self.classes],
            "frame": self.frame.to_dict(),
            "speed": self.speed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]

    def cache_key(self, kind: str, *params) -> str:
        suffix = ":".join(repr(p) for p in params)
        return f"{kind}:{self.config_hash()}:{suffix}" if suffix else f"{kind}:{self.config_hash()}"

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        validate_required_fields(d, ["classes"])
        version = d.get("spec_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported spec_version {version}",
                field="spec_version",
                details={"supported": SCHEMA_VERSION, "provided": version},
            )
        if not isinstance(d["classes"], list):
            raise ValidationError("classes must be a list", field="classes")
        return cls(
            classes=tuple(JobClass.from_dict(c) for c in d["classes"]),
            frame=Frame.from_dict(d.get("frame")),
            speed=float(d.get("speed", 0.0) or 0.0),
        )

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"config is not valid JSON: {e}", field="config")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str) -> "SystemConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class ValidatedConfig:
    config: SystemConfig
    finite_second_moment: bool
    nondegenerate: bool
    exists_k_lt_d_nondegenerate: bool
    strict_gap_class: bool
    all_iid_ihr: bool

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "lambda": self.config.lam,
            "alpha": self.config.alpha,
            "dbar": self.config.dbar,
            "flags": {
                "finite_second_moment": self.finite_second_moment,
                "nondegenerate": self.nondegenerate,
                "exists_k_lt_d_nondegenerate": self.exists_k_lt_d_nondegenerate,
                "strict_gap_class": self.strict_gap_class,
                "all_iid_ihr": self.all_iid_ihr,
            },
        }
