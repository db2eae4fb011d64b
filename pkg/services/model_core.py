"""
Model-core services: config validation, reduced systems, marginals,
Laplace transforms, hazard-rate checks and component sampling.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from models.component_model import WEIGHT_TOL, ComponentModel, ModelKind
from models.size_law import DistFamily, SizeDistribution
from models.system_config import JobClass, SystemConfig, ValidatedConfig
from services.samplers import check_params, get_sampler
from utils.errors import ValidationError
from utils.validators import validate_int_range, validate_positive, validate_probability

logger = logging.getLogger(__name__)

# draws used whenever a property has no analytic rule
SAMPLING_DRAWS = 100_000
SAMPLING_SEED = 20_240_607

Marginal = Union[SizeDistribution, ComponentModel]
Terms = List[Tuple[float, SizeDistribution]]


def _dist_laplace(dist: SizeDistribution, beta: float) -> float:
    if dist.family == DistFamily.EXPONENTIAL:
        return dist.rate / (dist.rate + beta)
    if dist.family == DistFamily.DETERMINISTIC:
        return math.exp(-beta * dist.a)
    if dist.family == DistFamily.UNIFORM:
        x = beta * dist.a
        return 1.0 if x == 0 else -math.expm1(-x) / x
    if dist.family == DistFamily.EMPIRICAL:
        return float(np.mean(np.exp(-beta * dist._sorted)))
    return 1.0 - beta * _dist_lbar(dist, beta)


def _dist_lbar(dist: SizeDistribution, beta: float) -> float:
    """int_0^inf e^{-beta z} (1 - H(z)) dz, stable as beta -> 0."""
    if beta == 0:
        return dist.mean()
    if dist.family == DistFamily.EXPONENTIAL:
        return 1.0 / (dist.rate + beta)
    if dist.family == DistFamily.DETERMINISTIC:
        return -math.expm1(-beta * dist.a) / beta
    if dist.family == DistFamily.UNIFORM:
        a = dist.a
        x = beta * a
        if x < 1e-4:
            return a / 2.0 - beta * a * a / 6.0 + beta * beta * a**3 / 24.0
        return (1.0 - (-math.expm1(-x)) / x) / beta
    if dist.family == DistFamily.EMPIRICAL:
        return float(np.mean(-np.expm1(-beta * dist._sorted))) / beta
    value, _ = integrate.quad(
        lambda z: math.exp(-beta * z) * float(dist.inner.survival(z)),
        0.0,
        dist.cap,
        points=dist.inner.kinks(dist.cap),
        limit=200,
    )
    return value


def _numeric_ihr(cdf, upper: float) -> bool:
    """(H(y+D) - H(y)) / (1 - H(y)) non-decreasing in y on a grid, for several D."""
    ys = np.linspace(0.0, upper, 161)
    base = cdf(ys)
    live = base < 1.0 - 1e-9
    ys, base = ys[live], base[live]
    if ys.size < 2:
        return True
    for delta in upper * np.array([0.01, 0.05, 0.1, 0.25, 0.5, 1.0]):
        ratio = (cdf(ys + delta) - base) / (1.0 - base)
        if np.any(np.diff(ratio) < -1e-9):
            return False
    return True


class ModelCore:
    # sampling

    @staticmethod
    def sample_block(model: ComponentModel, d: int, rng: np.random.Generator, count: int) -> np.ndarray:
        """`count` independent joint draws as a (count, d) array."""
        if model.kind == ModelKind.IID:
            return model.dist.sample(rng, (count, d))
        if model.kind == ModelKind.EXCHANGEABLE:
            dim = max(model.source_dim or d, d)
            return get_sampler(model.sampler)(rng, count, dim, model.param_dict)[:, :d]
        weights = np.array(model.weights, dtype=float)
        idx = rng.choice(weights.size, size=count, p=weights / weights.sum())
        out = np.empty((count, d), dtype=float)
        for c, (_, inner) in enumerate(model.components):
            mask = idx == c
            m = int(mask.sum())
            if m:
                out[mask] = ModelCore.sample_block(inner, d, rng, m)
        return out

    @staticmethod
    def sample_components(cls: JobClass, rng: np.random.Generator) -> np.ndarray:
        return ModelCore.sample_block(cls.sizes, cls.d, rng, 1)[0]

    # marginals

    @staticmethod
    def marginal_terms(x: Marginal, d: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> Terms:
        """
        Marginal law of one component as weighted scalar distributions.

        Exchangeable samplers have no closed-form marginal; with a dimension
        `d` it is approximated by an empirical law of seeded draws, otherwise
        UNKNOWN_FAMILY is raised.
        """
        if isinstance(x, SizeDistribution):
            return [(1.0, x)]
        if x.kind == ModelKind.IID:
            return [(1.0, x.dist)]
        if x.kind == ModelKind.EXCHANGEABLE:
            if d is None:
                raise ValidationError(
                    f"sampler '{x.sampler}' exposes no marginal CDF",
                    field="sizes",
                    error_code="UNKNOWN_FAMILY",
                )
            rng = rng or np.random.default_rng(SAMPLING_SEED)
            draws = ModelCore.sample_block(x, d, rng, SAMPLING_DRAWS)[:, 0]
            return [(1.0, SizeDistribution.empirical(draws))]
        terms = []
        for weight, inner in x.components:
            terms.extend((weight * w, dist) for w, dist in ModelCore.marginal_terms(inner, d, rng))
        return terms

    @staticmethod
    def mixture_marginal(cfg: SystemConfig, rng: Optional[np.random.Generator] = None) -> ComponentModel:
        """H = sum_j (sigma_j d_j / alpha) H_j as a mixture of iid models."""
        alpha = cfg.alpha
        if not alpha > 0:
            raise ValidationError("total rate must be positive", field="classes", error_code="ZERO_TOTAL_RATE")
        components = []
        for cls in cfg.classes:
            if cls.sigma == 0:
                continue
            share = cls.sigma * cls.d / alpha
            for w, dist in ModelCore.marginal_terms(cls.sizes, cls.d, rng):
                if w > 0:
                    components.append([share * w, ComponentModel.iid(dist)])
        components[-1][0] = 1.0 - math.fsum(w for w, _ in components[:-1])
        return ComponentModel.mixture([(w, m) for w, m in components])

    @staticmethod
    def marginal_mean(x: Marginal) -> float:
        return math.fsum(w * dist.mean() for w, dist in ModelCore.marginal_terms(x))

    @staticmethod
    def marginal_cdf(x: Marginal, w) -> np.ndarray:
        terms = ModelCore.marginal_terms(x)
        return sum(weight * dist.cdf(w) for weight, dist in terms)

    @staticmethod
    def laplace(x: Marginal, beta: float) -> float:
        """E exp(-beta xi) of the marginal."""
        validate_positive(beta, "beta", allow_zero=True, error_code="PARAM_RANGE")
        return math.fsum(w * _dist_laplace(dist, beta) for w, dist in ModelCore.marginal_terms(x))

    @staticmethod
    def lbar(x: Marginal, beta: float) -> float:
        """(1 - L(beta)) / beta, equal to the mean at beta = 0."""
        validate_positive(beta, "beta", allow_zero=True, error_code="PARAM_RANGE")
        return math.fsum(w * _dist_lbar(dist, beta) for w, dist in ModelCore.marginal_terms(x))

    @staticmethod
    def expected_min(x: Marginal, d: int) -> float:
        """E min of d components, computed per iid term."""
        total = 0.0
        for w, dist in ModelCore.marginal_terms(x):
            if dist.family == DistFamily.EXPONENTIAL:
                total += w / (d * dist.rate)
                continue
            upper = dist.upper_support(1e-12)
            if upper <= 0:
                continue
            value, _ = integrate.quad(
                lambda z: float(dist.survival(z)) ** d, 0.0, upper, points=dist.kinks(upper), limit=200
            )
            total += w * value
        return total

    # hazard rate

    @staticmethod
    def is_ihr(x: Marginal) -> bool:
        if isinstance(x, ComponentModel) and x.kind == ModelKind.EXCHANGEABLE:
            raise ValidationError(
                f"sampler '{x.sampler}' exposes no CDF to check the hazard rate",
                field="sizes",
                error_code="UNKNOWN_FAMILY",
            )
        terms = [(w, dist) for w, dist in ModelCore.marginal_terms(x) if w > 0]
        if len({dist for _, dist in terms}) == 1:
            dist = terms[0][1]
            if dist.family in (DistFamily.EXPONENTIAL, DistFamily.DETERMINISTIC, DistFamily.UNIFORM):
                return True
            if dist.family == DistFamily.TRUNCATED:
                return ModelCore.is_ihr(dist.inner)
        upper = max(dist.upper_support(1e-6) for _, dist in terms)
        if upper <= 0:
            return True

        def cdf(w):
            return sum(weight * dist.cdf(w) for weight, dist in terms)

        return _numeric_ihr(cdf, upper)

    # validation

    @staticmethod
    def _validate_dist(dist: SizeDistribution, field: str) -> None:
        if dist.family == DistFamily.EXPONENTIAL:
            validate_positive(dist.rate, f"{field}.rate", error_code="PARAM_RANGE")
        elif dist.family == DistFamily.DETERMINISTIC:
            validate_positive(dist.a, f"{field}.a", allow_zero=True, error_code="PARAM_RANGE")
        elif dist.family == DistFamily.UNIFORM:
            validate_positive(dist.a, f"{field}.a", error_code="PARAM_RANGE")
        elif dist.family == DistFamily.TRUNCATED:
            validate_positive(dist.cap, f"{field}.cap", error_code="PARAM_RANGE")
            ModelCore._validate_dist(dist.inner, f"{field}.dist")
        elif dist._sorted is None or dist._sorted.size == 0 or dist._sorted[0] < 0:
            raise ValidationError("empirical sample must be non-empty and non-negative", field=f"{field}.sample")

    @staticmethod
    def _validate_model(model: ComponentModel, d: int, field: str) -> None:
        if model.kind == ModelKind.IID:
            if model.dist is None:
                raise ValidationError("iid sizes need a distribution", field=f"{field}.dist")
            ModelCore._validate_dist(model.dist, f"{field}.dist")
        elif model.kind == ModelKind.EXCHANGEABLE:
            get_sampler(model.sampler)
            check_params(model.sampler, model.param_dict)
            if model.source_dim is not None and model.source_dim < d:
                raise ValidationError(
                    "projected sampler dimension is smaller than d", field=f"{field}.source_dim"
                )
        else:
            weights = model.weights
            if any(not (w >= 0) for w in weights) or abs(math.fsum(weights) - 1.0) > WEIGHT_TOL:
                raise ValidationError(
                    "mixture weights must be non-negative and sum to 1",
                    field=f"{field}.components",
                    details={"weights": weights},
                )
            for i, (_, inner) in enumerate(model.components):
                ModelCore._validate_model(inner, d, f"{field}.components[{i}]")

    @staticmethod
    def _class_properties(cls: JobClass, rng: np.random.Generator) -> dict:
        """Nondegeneracy, strict gap, mean and second moment of one class."""
        terms = cls.sizes.iid_terms()
        if terms is not None:
            live = [(w, dist) for w, dist in terms if w > 0]
            nondegenerate = any(float(dist.cdf(0.0)) < 1.0 for _, dist in live)
            gap = cls.d >= 2 and any(not dist.is_point_mass() for _, dist in live)
            mean = math.fsum(w * dist.mean() for w, dist in live)
            second = math.fsum(w * dist.second_moment() for w, dist in live)
        else:
            draws = ModelCore.sample_block(cls.sizes, cls.d, rng, SAMPLING_DRAWS)
            positive = (draws > 0).sum(axis=1)
            nondegenerate = bool(np.any(positive >= cls.d - cls.k + 1))
            ordered = np.sort(draws, axis=1)
            gap = bool(np.any(ordered[:, -1] - ordered[:, cls.k - 1] > 0))
            mean = float(draws.mean())
            second = float((draws**2).mean())
        return {
            "nondegenerate": nondegenerate,
            "strict_gap": gap and cls.k < cls.d,
            "mean": mean,
            "second_moment": second,
        }

    @staticmethod
    def validate_config(cfg: SystemConfig, rng: Optional[np.random.Generator] = None) -> ValidatedConfig:
        if not cfg.classes:
            raise ValidationError("config needs at least one job class", field="classes")

        for i, cls in enumerate(cfg.classes):
            validate_int_range(cls.d, f"classes[{i}].d", min_value=1)
            validate_int_range(cls.k, f"classes[{i}].k", min_value=1)
            if cls.k > cls.d:
                raise ValidationError(
                    f"class {i}: k={cls.k} exceeds d={cls.d}",
                    field=f"classes[{i}].k",
                    details={"k": cls.k, "d": cls.d},
                    error_code="K_EXCEEDS_D",
                )
            if not (cls.sigma >= 0) or math.isinf(cls.sigma):
                raise ValidationError(
                    f"class {i}: arrival rate must be finite and non-negative, got {cls.sigma}",
                    field=f"classes[{i}].sigma",
                    error_code="NEGATIVE_RATE",
                )
            ModelCore._validate_model(cls.sizes, cls.d, f"classes[{i}].sizes")

        if not cfg.lam > 0:
            raise ValidationError("total arrival rate must be positive", field="classes", error_code="ZERO_TOTAL_RATE")
        if not cfg.frame.left < cfg.frame.right:
            raise ValidationError(
                "frame must satisfy left < right",
                field="frame",
                details=cfg.frame.to_dict(),
                error_code="EMPTY_FRAME",
            )
        validate_positive(cfg.speed, "speed", allow_zero=True, error_code="PARAM_RANGE")

        rng = rng or np.random.default_rng(SAMPLING_SEED)
        props = [ModelCore._class_properties(cls, rng) for cls in cfg.classes]
        active = [(cls, p) for cls, p in zip(cfg.classes, props) if cls.sigma > 0]
        if not any(p["nondegenerate"] and p["mean"] > 0 for _, p in active):
            raise ValidationError(
                "no class has positive mean component size",
                field="classes",
                error_code="DEGENERATE_SIZES",
            )

        all_iid_ihr = True
        for cls, _ in active:
            terms = cls.sizes.iid_terms()
            if terms is None or not all(ModelCore.is_ihr(dist) for w, dist in terms if w > 0):
                all_iid_ihr = False
                break

        validated = ValidatedConfig(
            config=cfg,
            finite_second_moment=all(math.isfinite(p["second_moment"]) for _, p in active),
            nondegenerate=any(p["nondegenerate"] for _, p in active),
            exists_k_lt_d_nondegenerate=any(cls.k < cls.d and p["nondegenerate"] for cls, p in active),
            strict_gap_class=any(p["strict_gap"] for _, p in active),
            all_iid_ihr=all_iid_ihr,
        )
        logger.debug("Validated config %s: %s", cfg.config_hash(), validated.to_dict()["flags"])
        return validated

    # reduced systems

    @staticmethod
    def reduce_system(cfg: SystemConfig, eps: float, delta: float) -> SystemConfig:
        """
        Limiting (eps, delta)-reduced system: fractions eps of particles at
        +inf and delta at -inf. Class j splits into subclasses (m, l) with l
        selected particles at -inf and d_j - m at +inf. A subclass with fewer
        than k_j - l live components keeps all of them (k = d).
        """
        validate_probability(eps, "eps", closed_right=False)
        validate_probability(delta, "delta", closed_right=False)
        if eps + delta >= 1.0:
            raise ValidationError(
                f"eps + delta must be below 1, got {eps + delta}",
                field="eps",
                details={"eps": eps, "delta": delta},
                error_code="PARAM_RANGE",
            )
        if eps == 0 and delta == 0:
            return cfg

        live = 1.0 - eps - delta
        reduced = []
        for cls in cfg.classes:
            for ell in range(cls.k):
                for m in range(ell + 1, cls.d + 1):
                    coef = math.comb(cls.d, m) * math.comb(m, ell)
                    rate = cls.sigma * coef * delta**ell * live ** (m - ell) * eps ** (cls.d - m) / live
                    if rate <= 0:
                        continue
                    sizes = cls.sizes if m - ell == cls.d else cls.sizes.project(cls.d)
                    # fewer than k live components: the job never completes and keeps every component
                    reduced.append(JobClass(d=m - ell, k=min(cls.k, m) - ell, sigma=rate, sizes=sizes))
        logger.debug("Reduced %d classes to %d subclasses (eps=%s, delta=%s)", len(cfg.classes), len(reduced), eps, delta)
        return SystemConfig(classes=tuple(reduced), frame=cfg.frame, speed=cfg.speed)
