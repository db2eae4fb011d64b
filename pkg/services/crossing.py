"""
The crossing functional: the rate lambda*h(x_{(-inf, w]}) at which particles
distributed i.i.d. according to a tail field x jump over level w.

For i.i.d. component sizes the rate factorizes per class (and per mixture
component, since a mixture index is drawn once per job):

    lambda*h(w) = sum_t coef_t * P(Bin(d_t - 1, p_t(w)) <= k_t - 1) * I_t(w)

where p_t(w) is the probability that a companion's potential is at most w
and I_t(w) the probability that the tagged particle sits at or left of w
with its potential beyond w. Exchangeable samplers are handled by Monte
Carlo only.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import signal, stats

from models.size_law import SizeDistribution
from models.system_config import SystemConfig
from models.tail_field import TailField
from services.field_calculus import FieldCalculator
from services.model_core import ModelCore
from utils.errors import SolverError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MC_SAMPLES = 100_000
# kernel entries beyond this survival level are dropped
KERNEL_TAIL = 1e-16
# bound on (levels x field pieces) evaluated at once
CHUNK_CELLS = 2_000_000


@dataclass(frozen=True)
class CrossingTerm:
    """One i.i.d. block: rate coefficient sigma_j * d_j * weight, selection size, completion count, marginal."""

    coef: float
    d: int
    k: int
    dist: SizeDistribution


def binom_cdf(k: int, n: int, p):
    """P(Bin(n, p) <= k), vectorized over p."""
    if k >= n:
        return np.ones_like(np.asarray(p, dtype=float))
    return stats.binom.cdf(k, n, p)


def binom_cdf_scalar(k: int, n: int, p: float) -> float:
    if k >= n:
        return 1.0
    q = 1.0 - p
    return math.fsum(math.comb(n, i) * p**i * q ** (n - i) for i in range(k + 1))


class CrossingCalculator:
    @staticmethod
    def crossing_terms(cfg: SystemConfig) -> List[CrossingTerm]:
        terms = []
        for i, cls in enumerate(cfg.classes):
            if cls.sigma == 0:
                continue
            iid = cls.sizes.iid_terms()
            if iid is None:
                raise ValidationError(
                    f"class {i} uses an exchangeable sampler; the exact crossing rate needs i.i.d. sizes",
                    field=f"classes[{i}].sizes",
                    error_code="UNSUPPORTED_MODEL",
                )
            for w, dist in iid:
                if w > 0:
                    terms.append(CrossingTerm(cls.sigma * cls.d * w, cls.d, cls.k, dist))
        return terms

    @staticmethod
    def supports_exact(cfg: SystemConfig) -> bool:
        return all(cls.sigma == 0 or cls.sizes.iid_terms() is not None for cls in cfg.classes)

    @staticmethod
    def rate_at(x: TailField, w, cfg: SystemConfig, terms: Optional[List[CrossingTerm]] = None):
        """lambda*h at level(s) w by exact summation over the field's atoms and segments."""
        terms = terms if terms is not None else CrossingCalculator.crossing_terms(cfg)
        w_arr = np.atleast_1d(np.asarray(w, dtype=float))
        loc, mass = x.atoms()
        keep = mass > 0
        loc, mass = loc[keep], mass[keep]
        a, b, seg = x.segments()
        keep = seg > 0
        a, b, seg = a[keep], b[keep], seg[keep]
        below = 1.0 - x.x_minus_inf

        chunk = max(1, CHUNK_CELLS // max(1, loc.size + seg.size))
        out = np.zeros(w_arr.size)
        for start in range(0, w_arr.size, chunk):
            ws = w_arr[start : start + chunk, None]
            total = np.zeros(ws.shape[0])
            for t in terms:
                gap = ws - loc
                left = gap >= 0
                p = below + np.sum(np.where(left, mass * t.dist.cdf(gap), 0.0), axis=1)
                inside = np.sum(np.where(left, mass * t.dist.survival(gap), 0.0), axis=1)
                if seg.size:
                    c = np.minimum(b, ws)
                    active = ws >= a
                    g_a = t.dist.integrated_survival(ws - a)
                    g_c = t.dist.integrated_survival(ws - c)
                    dens = seg / (b - a)
                    inside += np.sum(np.where(active, dens * (g_a - g_c), 0.0), axis=1)
                    p += np.sum(np.where(active, dens * ((c - a) - g_a + g_c), 0.0), axis=1)
                p = np.clip(p, 0.0, 1.0)
                total += t.coef * binom_cdf(t.k - 1, t.d - 1, p) * np.maximum(inside, 0.0)
            out[start : start + chunk] = total
        return float(out[0]) if np.ndim(w) == 0 else out

    @staticmethod
    def rate_mc(
        x: TailField,
        w: float,
        cfg: SystemConfig,
        rng: np.random.Generator,
        samples: int = DEFAULT_MC_SAMPLES,
        max_se: Optional[float] = None,
    ) -> tuple:
        """
        Monte-Carlo lambda*h at one level: average number of selected
        particles crossing w per job, weighted by the class rates.
        Returns (estimate, standard error).
        """
        estimate, var = 0.0, 0.0
        for cls in cfg.classes:
            if cls.sigma == 0:
                continue
            loc = FieldCalculator.inverse(x, rng.random((samples, cls.d)))
            sizes = ModelCore.sample_block(cls.sizes, cls.d, rng, samples)
            with np.errstate(invalid="ignore"):
                potentials = loc + sizes
            t_star = np.partition(potentials, cls.k - 1, axis=1)[:, cls.k - 1 : cls.k]
            new = np.maximum(loc, np.minimum(potentials, t_star))
            crossings = np.sum((loc <= w) & (new > w), axis=1)
            estimate += cls.sigma * float(crossings.mean())
            var += cls.sigma**2 * float(crossings.var(ddof=1)) / samples
        se = math.sqrt(var)
        if max_se is not None and se > max_se:
            raise SolverError(
                f"Monte-Carlo standard error {se:.3g} exceeds {max_se:.3g} at {samples} samples",
                error_code="MC_VARIANCE_EXCEEDED",
                details={"se": se, "max_se": max_se, "samples": samples},
            )
        return estimate, se

    @staticmethod
    def compute_h(
        x: TailField,
        w: float,
        cfg: SystemConfig,
        method: str = "auto",
        rng: Optional[np.random.Generator] = None,
        samples: int = DEFAULT_MC_SAMPLES,
        max_se: Optional[float] = None,
    ) -> float:
        """
        h(x_{(-inf, w]}): expected number of selected particles crossing w
        per arrival, normalized per particle. method is "exact", "mc" or
        "auto" (exact whenever every class has i.i.d. sizes).
        """
        if method not in ("auto", "exact", "mc"):
            raise ValidationError(f"unknown method '{method}'", field="method", error_code="PARAM_RANGE")
        if method == "auto":
            method = "exact" if CrossingCalculator.supports_exact(cfg) else "mc"
        if method == "exact":
            lam_h = CrossingCalculator.rate_at(x, float(w), cfg)
        else:
            lam_h, se = CrossingCalculator.rate_mc(x, float(w), cfg, rng or np.random.default_rng(), samples, max_se)
            logger.debug("MC crossing rate at w=%s: %.6g (se %.2g)", w, lam_h, se)
        return lam_h / cfg.lam


class GridCrossing:
    """
    lambda*h of a linear-mode field on a uniform grid g_i = g_0 + i*step,
    evaluated at g_i + offset*step for every node at once.

    Segment contributions are a discrete convolution of the segment masses
    with a kernel built from the integrated survival G of each marginal.
    """

    def __init__(self, terms: List[CrossingTerm], step: float, size: int, offset: float = 0.0):
        self.terms = terms
        self.step = step
        self.size = size
        self.offset = offset
        self.kernels = []
        self.cdf_at = []
        self.survival_at = []
        nodes = (np.arange(size) + offset) * step
        for t in terms:
            length = min(size, int(t.dist.upper_support(KERNEL_TAIL) / step) + 2)
            s = np.arange(length, dtype=float)
            G = t.dist.integrated_survival
            kernel = (G((s + offset) * step) - G((s - 1 + offset) * step)) / step
            kernel[0] = float(G(offset * step)) / step
            self.kernels.append(kernel)
            self.cdf_at.append(t.dist.cdf(nodes))
            self.survival_at.append(t.dist.survival(nodes))

    def rates(self, values: np.ndarray, x_minus_inf: float = 1.0) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        n = values.size
        if n != self.size:
            raise ValueError(f"expected {self.size} values, got {n}")
        atom = x_minus_inf - values[0]
        masses = np.append(values[:-1] - values[1:], 0.0)
        below = 1.0 - x_minus_inf
        passed = values[0] - values
        total = np.zeros(n)
        for t, kernel, cdf, surv in zip(self.terms, self.kernels, self.cdf_at, self.survival_at):
            conv = signal.fftconvolve(masses, kernel)[:n]
            inside = np.maximum(atom * surv + conv, 0.0)
            p = np.clip(below + atom * cdf + passed + self.offset * masses - conv, 0.0, 1.0)
            total += t.coef * binom_cdf(t.k - 1, t.d - 1, p) * inside
        return total

    def residual(
        self, values: np.ndarray, speed: float, x_minus_inf: float = 1.0, lo: int = 1, hi: Optional[int] = None
    ) -> float:
        """max |v x' + lambda*h| over nodes [lo, hi) with central differences."""
        values = np.asarray(values, dtype=float)
        hi = values.size - 1 if hi is None else hi
        if hi - lo < 1 or values.size < 3:
            return 0.0
        gap = np.abs(speed * np.gradient(values, self.step) + self.rates(values, x_minus_inf))
        return float(gap[lo:hi].max())


def terms_mean(terms: List[CrossingTerm]) -> float:
    """Mean of the rate-weighted marginal sum_t coef_t H_t / alpha."""
    total = math.fsum(t.coef for t in terms)
    return math.fsum(t.coef * t.dist.mean() for t in terms) / total


def terms_support(terms: List[CrossingTerm], tail: float) -> float:
    return max(t.dist.upper_support(tail) for t in terms)
