"""Mutual information of discrete constellations on the complex AWGN channel.

The production path is tensor-product Gauss-Hermite quadrature over the
two noise quadratures; a seeded Monte-Carlo estimator with the exact
conditional densities serves as its independent check.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .constellation import Constellation
from .shaping import Pmf, entropy, is_ring_constant

LN2 = float(np.log(2.0))

DEFAULT_ORDER = 16

# Unit-power check guards against silently feeding an unnormalized
# constellation, which would reinterpret the SNR axis.
UNIT_POWER_TOL = 1e-6

# exp() arguments below this are flushed; keeps the hot loops out of the
# subnormal range, where libm is an order of magnitude slower.
EXP_UNDERFLOW = -700.0

PROB_TINY = 1e-320


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite nodes/weights for weight function exp(-t^2)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)


@functools.lru_cache(maxsize=None)
def gauss_hermite(order: int) -> QuadratureRule:
    """Nodes and weights of the physicists' Gauss-Hermite rule.

    Exact for polynomials up to degree 2*order - 1 against exp(-t^2).
    """
    if not isinstance(order, int) or not 2 <= order <= 64:
        raise ValueError(f"quadrature order must be an integer in [2, 64], got {order!r}")
    nodes, weights = hermgauss(order)
    return QuadratureRule(nodes, weights, order)


def _snr_to_sigma2(snr_db: float) -> float:
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db!r}")
    return 10.0 ** (-snr_db / 10.0)


def _require_unit_power(constellation: Constellation, pmf: Pmf) -> None:
    power = float(pmf.probs @ constellation.sq_magnitudes)
    if abs(power - 1.0) > UNIT_POWER_TOL:
        raise ValueError(
            f"constellation mean power is {power!r} under this pmf; "
            "normalize to unit power before evaluating MI"
        )


def mi_awgn_2d(
    constellation: Constellation,
    pmf: Pmf,
    snr_db: float,
    rule: QuadratureRule | None = None,
) -> float:
    """MI in bits per complex symbol for Y = X + N, N circular Gaussian.

    The expectation over the two noise quadratures uses the tensor
    product of ``rule`` with itself. The mixture over constellation
    points is evaluated in a factorized, overflow-safe form; for
    ring-constant pmfs the outer expectation collapses onto one point
    per dihedral orbit, an 8-fold saving.

    The result is clamped to [0, entropy(pmf)].
    """
    if rule is None:
        rule = gauss_hermite(DEFAULT_ORDER)
    _require_unit_power(constellation, pmf)
    sigma2 = _snr_to_sigma2(snr_db)
    sigma = np.sqrt(sigma2)

    x = constellation.points
    p = pmf.probs
    if is_ring_constant(constellation, pmf):
        reps = constellation.orbit_reps
        mult = constellation.orbit_sizes.astype(np.float64)
    else:
        reps = np.arange(constellation.order)
        mult = np.ones(constellation.order)
    keep = p[reps] > 0.0
    reps, mult = reps[keep], mult[keep]

    t = rule.nodes
    w2d = np.outer(rule.weights, rule.weights) / np.pi
    tmax = float(np.abs(t).max())

    acc = 0.0
    # Rep-axis chunks bound the (chunk, order, M) work arrays to ~30 MB.
    chunk = max(1, 3_000_000 // (rule.order * constellation.order))
    for lo in range(0, reps.size, chunk):
        r = reps[lo : lo + chunk]
        d = x[r][:, None] - x[None, :]                     # (R, M)
        dr, di = d.real, d.imag
        # term(a, b, j) = p_j exp(-(|d_j|^2 + 2 Re(d_j conj(n_ab))) / s2)
        # with n_ab = sigma (t_a + i t_b). Split the node dependence into
        # two rank-one exponents, shifting each by its maximum over the
        # nodes so every factor stays finite.
        mu = (2.0 * tmax / sigma) * np.abs(dr)
        mv = (2.0 * tmax / sigma) * np.abs(di)
        base = p[None, :] * np.exp(-(dr * dr + di * di) / sigma2 + mu + mv)
        u = np.exp((-2.0 / sigma) * dr[:, None, :] * t[None, :, None] - mu[:, None, :])
        v = np.exp((-2.0 / sigma) * di[:, None, :] * t[None, :, None] - mv[:, None, :])
        inner = np.matmul(base[:, None, :] * u, np.swapaxes(v, 1, 2))  # (R, A, B)
        log_mix = np.log(inner)
        per_rep = np.tensordot(log_mix, w2d, axes=([1, 2], [0, 1]))
        acc += float((p[r] * mult[lo : lo + chunk] * per_rep).sum())

    mi = -acc / LN2
    return float(np.clip(mi, 0.0, entropy(pmf)))


def mi_monte_carlo(
    constellation: Constellation,
    pmf: Pmf,
    snr_db: float,
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte-Carlo MI estimate and its standard error, bits per complex symbol.

    Estimates H(X|Y) from sampled symbol/noise pairs using the exact
    Gaussian conditional densities and subtracts it from the analytic
    entropy. Deterministic for a given seed.
    """
    if samples < 10_000:
        raise ValueError(f"need at least 1e4 samples for a stable estimate, got {samples}")
    _require_unit_power(constellation, pmf)
    sigma2 = _snr_to_sigma2(snr_db)

    rng = np.random.default_rng(seed)
    x = constellation.points
    p = pmf.probs
    logp = np.where(p > 0.0, np.log(np.maximum(p, PROB_TINY)), -np.inf)
    xq = np.vstack([x.real, x.imag])                      # (2, M)
    x2 = np.abs(x) ** 2

    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 1 << 15
    while done < samples:
        k = min(chunk, samples - done)
        idx = rng.choice(x.size, size=k, p=p)
        noise = np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(k) + 1j * rng.standard_normal(k)
        )
        y = x[idx] + noise
        yq = np.empty((k, 2))
        yq[:, 0], yq[:, 1] = y.real, y.imag
        # a_j = log p_j - |y - x_j|^2 / s2, dropping the |y|^2 term common to all j
        a = logp[None, :] + (2.0 * (yq @ xq) - x2[None, :]) / sigma2
        a_max = a.max(axis=1)
        a_true = a[np.arange(k), idx]
        np.subtract(a, a_max[:, None], out=a)
        np.maximum(a, EXP_UNDERFLOW, out=a)
        lse = a_max + np.log(np.exp(a).sum(axis=1))
        neg_log_post = (lse - a_true) / LN2
        total += float(neg_log_post.sum())
        total_sq += float((neg_log_post**2).sum())
        done += k

    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    mi = entropy(pmf) - mean
    return float(np.clip(mi, 0.0, entropy(pmf))), float(np.sqrt(var / samples))
