"""Probability mass functions over constellations and their moments.

Families: uniform, Maxwell-Boltzmann (exponential in |x|^2), the
two-parameter kurtosis-tailored family (exponential in |x|^2 and |x|^4),
and free per-ring probabilities.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, _check_pmf_length

# Probabilities below this are flushed to zero after normalization so
# downstream quadrature never sees subnormal noise.
PROB_FLOOR = 1e-300

PMF_SUM_TOL = 1e-12


class Family(enum.Enum):
    UNIFORM = "uniform"
    MAXWELL_BOLTZMANN = "mb"
    KURTOSIS_TAILORED = "opt"
    PER_RING = "per_ring"


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over constellation points."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1:
            raise ValueError("pmf must be one-dimensional")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise ValueError("pmf entries must be finite and non-negative")
        if abs(probs.sum() - 1.0) > PMF_SUM_TOL:
            raise ValueError(f"pmf sums to {probs.sum()!r}, expected 1")
        probs = np.where(probs < PROB_FLOOR, 0.0, probs)
        probs = probs / probs.sum()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class ShapingParams:
    """Family selector plus its parameters.

    ``lam`` is the Maxwell-Boltzmann rate; ``nu1``/``nu2`` weight the
    second and fourth power moments in the tailored family; ``ring_probs``
    gives total per-ring masses for the free per-ring family.
    """

    family: Family
    lam: float = 0.0
    nu1: float = 0.0
    nu2: float = 0.0
    ring_probs: tuple[float, ...] | None = None


def _normalized_exp(exponents: np.ndarray) -> Pmf:
    # Subtract the max exponent so exp never overflows; underflow is benign.
    shifted = exponents - exponents.max()
    weights = np.exp(shifted)
    return Pmf(weights / weights.sum())


def uniform_pmf(constellation: Constellation) -> Pmf:
    return Pmf(np.full(constellation.order, 1.0 / constellation.order))


def mb_pmf(constellation: Constellation, lam: float) -> Pmf:
    """Maxwell-Boltzmann pmf, p_i proportional to exp(-lam |x_i|^2)."""
    if not math.isfinite(lam):
        raise ValueError(f"lam must be finite, got {lam!r}")
    return _normalized_exp(-lam * constellation.sq_magnitudes)


def tailored_pmf(constellation: Constellation, nu1: float, nu2: float) -> Pmf:
    """Two-parameter pmf, p_i proportional to exp(-nu1 |x_i|^2 - nu2 |x_i|^4).

    Reduces to :func:`mb_pmf` at nu2 = 0. Positive nu2 suppresses the
    outer tail harder than any Maxwell-Boltzmann pmf, which is what pulls
    the excess kurtosis down; nu2 may take either sign.
    """
    if not (math.isfinite(nu1) and math.isfinite(nu2)):
        raise ValueError(f"nu1/nu2 must be finite, got {nu1!r}, {nu2!r}")
    r2 = constellation.sq_magnitudes
    return _normalized_exp(-nu1 * r2 - nu2 * r2 * r2)


def ring_pmf(constellation: Constellation, ring_probs) -> Pmf:
    """Pmf from total per-ring masses, split equally inside each ring."""
    q = np.asarray(ring_probs, dtype=np.float64)
    if q.shape != (len(constellation.rings),):
        raise ValueError(
            f"expected {len(constellation.rings)} ring probabilities, got {q.shape}"
        )
    if np.any(q < 0.0) or abs(q.sum() - 1.0) > PMF_SUM_TOL:
        raise ValueError("ring probabilities must be non-negative and sum to 1")
    probs = np.zeros(constellation.order)
    for ring, mass in zip(constellation.rings, q):
        probs[ring.indices] = mass / ring.indices.size
    return Pmf(probs)


def build_pmf(constellation: Constellation, params: ShapingParams) -> Pmf:
    """Instantiate the pmf described by ``params`` on ``constellation``."""
    if params.family is Family.UNIFORM:
        return uniform_pmf(constellation)
    if params.family is Family.MAXWELL_BOLTZMANN:
        return mb_pmf(constellation, params.lam)
    if params.family is Family.KURTOSIS_TAILORED:
        return tailored_pmf(constellation, params.nu1, params.nu2)
    if params.family is Family.PER_RING:
        if params.ring_probs is None:
            raise ValueError("per-ring family requires ring_probs")
        return ring_pmf(constellation, params.ring_probs)
    raise ValueError(f"unknown family {params.family!r}")


def ring_masses(constellation: Constellation, pmf: Pmf) -> np.ndarray:
    """Total probability carried by each ring."""
    _check_pmf_length(constellation, pmf.probs)
    return np.array([pmf.probs[r.indices].sum() for r in constellation.rings])


def is_ring_constant(constellation: Constellation, pmf: Pmf, tol: float = 1e-13) -> bool:
    """True when equal-magnitude points carry equal probability."""
    _check_pmf_length(constellation, pmf.probs)
    for ring in constellation.rings:
        vals = pmf.probs[ring.indices]
        if vals.max() - vals.min() > tol:
            return False
    return True


def excess_kurtosis(constellation: Constellation, pmf: Pmf) -> float:
    """E|X|^4 / (E|X|^2)^2 - 2 of the complex symbol; 0 for a complex
    Gaussian, exactly -1 for constant-modulus sets. Scale-invariant."""
    _check_pmf_length(constellation, pmf.probs)
    r2 = constellation.sq_magnitudes
    m2 = float(pmf.probs @ r2)
    if m2 <= 0.0:
        raise ValueError("mean power must be positive to define kurtosis")
    m4 = float(pmf.probs @ (r2 * r2))
    return m4 / (m2 * m2) - 2.0


def entropy(pmf: Pmf) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    p = pmf.probs[pmf.probs > 0.0]
    return float(-(p * np.log2(p)).sum())
