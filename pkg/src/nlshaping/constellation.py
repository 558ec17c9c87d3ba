"""Square QAM constellations: geometry, power moments, amplitude rings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = (16, 64, 256, 1024, 4096)

# Absolute tolerance for grouping |x|^2 into rings on the integer grid.
RING_ATOL = 1e-9


@dataclass(frozen=True)
class Ring:
    """One amplitude ring: all points sharing a squared magnitude."""

    sq_magnitude: float
    indices: np.ndarray  # point indices, ascending


@dataclass(frozen=True)
class Constellation:
    """Ordered complex symbol set with its amplitude-ring decomposition.

    Points are row-major over (I, Q) levels of the odd-integer grid
    {+-1, +-3, ..., +-(sqrt(M)-1)}^2, possibly rescaled by a positive
    factor (see :func:`normalized`). Instances are immutable and safe
    to share across workers.
    """

    points: np.ndarray          # complex128, shape (M,)
    order: int
    rings: tuple[Ring, ...]
    orbit_reps: np.ndarray      # one index per 8-fold dihedral orbit
    orbit_sizes: np.ndarray     # orbit multiplicities, same length

    def __post_init__(self):
        self.points.setflags(write=False)
        self.orbit_reps.setflags(write=False)
        self.orbit_sizes.setflags(write=False)

    @property
    def sq_magnitudes(self) -> np.ndarray:
        # re^2 + im^2 rather than |x|^2: exact on the integer grid.
        return self.points.real**2 + self.points.imag**2


def _build_rings(points: np.ndarray, atol: float) -> tuple[Ring, ...]:
    r2 = points.real**2 + points.imag**2
    order = np.argsort(r2, kind="stable")
    rings: list[Ring] = []
    start = 0
    sorted_r2 = r2[order]
    for i in range(1, points.size + 1):
        if i == points.size or sorted_r2[i] - sorted_r2[start] > atol:
            idx = np.sort(order[start:i])
            rings.append(Ring(float(r2[idx[0]]), idx))
            start = i
    return tuple(rings)


def dihedral_orbits(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group points into orbits of the square's symmetry group.

    Two points are in the same orbit when one maps onto the other by a
    90-degree rotation, a reflection, or any composition of the two. For
    ring-constant probability assignments every orbit carries a single
    probability value, which lets downstream quadrature sum over one
    representative per orbit instead of all M points.

    Returns (representative indices, orbit sizes).
    """
    a = np.maximum(np.abs(points.real), np.abs(points.imag))
    b = np.minimum(np.abs(points.real), np.abs(points.imag))
    scale = float(a.max())
    if scale == 0.0:
        raise ValueError("degenerate constellation: all points at the origin")
    ka = np.round(a / scale * 1e9).astype(np.int64)
    kb = np.round(b / scale * 1e9).astype(np.int64)
    keys = ka << 31 | kb
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    reps = np.full(uniq.size, -1, dtype=np.int64)
    for i in range(points.size - 1, -1, -1):
        reps[inverse[i]] = i
    return reps, counts.astype(np.int64)


def square_qam(order: int, *, min_order: int = 16) -> Constellation:
    """Build the square QAM constellation of the given order.

    Points lie on the odd-integer grid and are ordered row-major over
    the (I, Q) levels, so output is deterministic. Rings merge points of
    equal squared magnitude even when they come from different geometric
    shells (e.g. 50 = 1+49 = 25+25 in 64QAM).

    ``min_order`` relaxes the default lower bound of 16, admitting the
    4-point constellation for degenerate single-ring testing.
    """
    if not isinstance(order, int) or order < 4:
        raise ValueError(f"order must be an integer >= 4, got {order!r}")
    root = np.sqrt(order)
    m = int(round(root))
    if m * m != order or (m & (m - 1)) != 0:
        raise ValueError(
            f"order {order} is not square QAM: need an even power of two "
            f"(one of {SUPPORTED_ORDERS})"
        )
    if order < min_order or order > 4096:
        raise ValueError(
            f"order {order} outside the supported range [{min_order}, 4096]"
        )
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    points = (re + 1j * im).ravel()
    reps, sizes = dihedral_orbits(points)
    return Constellation(points, order, _build_rings(points, RING_ATOL), reps, sizes)


def _check_pmf_length(constellation: Constellation, probs: np.ndarray) -> None:
    if probs.shape != (constellation.order,):
        raise ValueError(
            f"pmf length {probs.shape} does not match constellation order "
            f"{constellation.order}"
        )


def mean_power(constellation: Constellation, pmf) -> float:
    """Average symbol power sum_i p_i |x_i|^2 under the given pmf."""
    probs = np.asarray(getattr(pmf, "probs", pmf), dtype=np.float64)
    _check_pmf_length(constellation, probs)
    power = float(probs @ constellation.sq_magnitudes)
    if power <= 0.0:
        raise ValueError("mean power is not positive under this pmf")
    return power


def normalized(constellation: Constellation, pmf) -> Constellation:
    """Rescale so the constellation has unit mean power under ``pmf``.

    Ring structure and point ordering are preserved; only magnitudes
    change. Normalizing an already-normalized constellation is the
    identity to within floating-point roundoff.
    """
    power = mean_power(constellation, pmf)
    scale = 1.0 / np.sqrt(power)
    points = constellation.points * scale
    rings = tuple(
        Ring(r.sq_magnitude * scale * scale, r.indices) for r in constellation.rings
    )
    return Constellation(
        points, constellation.order, rings,
        constellation.orbit_reps, constellation.orbit_sizes,
    )
