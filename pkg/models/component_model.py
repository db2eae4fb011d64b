"""
ComponentModel dataclass - the joint law of the d component sizes of a job.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from models.size_law import SizeDistribution
from utils.errors import ValidationError

# mixture weights must sum to one within this tolerance
WEIGHT_TOL = 1e-12


class ModelKind(str, Enum):
    IID = "iid"
    EXCHANGEABLE = "exchangeable"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class ComponentModel:
    kind: ModelKind
    dist: Optional[SizeDistribution] = None
    sampler: Optional[str] = None
    params: Tuple[Tuple[str, float], ...] = ()
    components: Tuple[Tuple[float, "ComponentModel"], ...] = ()
    # dimension the named sampler draws in before projecting to fewer coordinates
    source_dim: Optional[int] = None

    @classmethod
    def iid(cls, dist: SizeDistribution) -> "ComponentModel":
        return cls(ModelKind.IID, dist=dist)

    @classmethod
    def exchangeable(cls, sampler: str, **params: float) -> "ComponentModel":
        return cls(
            ModelKind.EXCHANGEABLE,
            sampler=sampler,
            params=tuple(sorted((k, float(v)) for k, v in params.items())),
        )

    @classmethod
    def mixture(cls, components: Sequence[Tuple[float, "ComponentModel"]]) -> "ComponentModel":
        if not components:
            raise ValidationError("mixture needs at least one component", field="components")
        return cls(ModelKind.MIXTURE, components=tuple((float(w), m) for w, m in components))

    @property
    def param_dict(self) -> Dict[str, float]:
        return dict(self.params)

    @property
    def weights(self) -> List[float]:
        return [w for w, _ in self.components]

    def iid_terms(self) -> Optional[List[Tuple[float, SizeDistribution]]]:
        """
        Flatten an iid model or a (nested) mixture of iid models into
        (weight, marginal) terms. Returns None when an exchangeable sampler is
        involved.
        """
        if self.kind == ModelKind.IID:
            return [(1.0, self.dist)]
        if self.kind == ModelKind.EXCHANGEABLE:
            return None
        terms = []
        for weight, inner in self.components:
            inner_terms = inner.iid_terms()
            if inner_terms is None:
                return None
            terms.extend((weight * w, dist) for w, dist in inner_terms)
        return terms

    def project(self, dim_from: int) -> "ComponentModel":
        """Law of the first coordinates of a draw made in dimension `dim_from`."""
        if self.kind == ModelKind.IID:
            return self
        if self.kind == ModelKind.MIXTURE:
            return replace(self, components=tuple((w, m.project(dim_from)) for w, m in self.components))
        return replace(self, source_dim=self.source_dim or dim_from)

    def to_dict(self) -> dict:
        if self.kind == ModelKind.IID:
            return {"kind": "iid", "dist": self.dist.to_dict()}
        if self.kind == ModelKind.MIXTURE:
            return {
                "kind": "mixture",
                "components": [{"weight": w, "model": m.to_dict()} for w, m in self.components],
            }
        d = {"kind": "exchangeable", "sampler": self.sampler, "params": self.param_dict}
        if self.source_dim is not None:
            d["source_dim"] = self.source_dim
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentModel":
        if not isinstance(d, dict) or "kind" not in d:
            raise ValidationError("sizes must be an object with a 'kind'", field="sizes")
        kind = d["kind"]
        if kind == "iid":
            if "dist" not in d:
                raise ValidationError("iid sizes need a 'dist'", field="sizes.dist")
            return cls.iid(SizeDistribution.from_dict(d["dist"]))
        if kind == "mixture":
            comps = d.get("components") or []
            try:
                parsed = [(float(c["weight"]), cls.from_dict(c["model"])) for c in comps]
            except (KeyError, TypeError):
                raise ValidationError(
                    "mixture components need 'weight' and 'model'", field="sizes.components"
                )
            return cls.mixture(parsed)
        if kind == "exchangeable":
            if "sampler" not in d:
                raise ValidationError("exchangeable sizes need a 'sampler'", field="sizes.sampler")
            model = cls.exchangeable(d["sampler"], **(d.get("params") or {}))
            if d.get("source_dim") is not None:
                model = replace(model, source_dim=int(d["source_dim"]))
            return model
        raise ValidationError(
            f"unknown size model kind '{kind}'",
            field="sizes.kind",
            details={"provided": kind},
            error_code="UNKNOWN_FAMILY",
        )
