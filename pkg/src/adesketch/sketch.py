"""Single linear-sketch matrices and the two per-sketch length estimators.

A sketch is a dense m x d random matrix applied to vectors in R^d. The
Euclidean flavor draws entries from N(0, 1/m) and estimates ||v|| as the plain
norm of the projection; the lp flavor draws entries from the symmetric
p-stable law and estimates ||v||_p as the median of coordinate absolute
values divided by Med_p.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .stable import StableParams, sample_stable

GAUSSIAN = "gaussian"  # entries ~ N(0, 1/m)
STABLE = "stable"      # entries ~ Stab(p)

# l*m*d and n*m*l grow fast; fail early instead of thrashing.
DEFAULT_MEMORY_CAP = 2 * 2**30


def check_capacity(n_floats, memory_cap_bytes, what):
    n_bytes = int(n_floats) * 8
    if n_bytes > memory_cap_bytes:
        raise CapacityError(
            f"{what} needs {n_bytes / 2**20:.0f} MiB of float64 storage, "
            f"exceeding the {memory_cap_bytes / 2**20:.0f} MiB memory cap; "
            f"raise the cap explicitly to proceed"
        )


@dataclass(frozen=True)
class SketchMatrix:
    """Dense m x d sketch with its distribution kind and RNG provenance."""

    kind: str
    p: float | None
    m: int
    d: int
    entries: np.ndarray = field(repr=False)
    stream_id: int = 0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, STABLE):
            raise ValueError(f"unknown sketch kind {self.kind!r}")
        if self.kind == STABLE and self.p is None:
            raise ValueError("stable sketches need a stability index p")
        if self.m < 1 or self.d < 1:
            raise ValueError(f"matrix dimensions must be positive, got {self.m}x{self.d}")
        if self.entries.shape != (self.m, self.d):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match {self.m}x{self.d}"
            )
        if not np.isfinite(self.entries).all():
            raise ValueError("sketch entries must all be finite")


@dataclass(frozen=True)
class SketchedVector:
    """Image of one vector under one sketch matrix."""

    values: np.ndarray
    source_matrix: int = 0


def gen_sketch(kind, m, d, rng, stream_id=0, p=None, memory_cap_bytes=DEFAULT_MEMORY_CAP):
    """Generate one sketch matrix with iid entries per `kind`.

    Deterministic given the generator state; the same stream always produces
    the same matrix.
    """
    if m < 1 or d < 1:
        raise ValueError(f"matrix dimensions must be positive, got {m}x{d}")
    check_capacity(m * d, memory_cap_bytes, f"a {m}x{d} sketch matrix")
    if kind == GAUSSIAN:
        entries = rng.standard_normal((m, d)) * (m ** -0.5)
    elif kind == STABLE:
        entries = sample_stable(StableParams(p), rng, (m, d))
    else:
        raise ValueError(f"unknown sketch kind {kind!r}")
    return SketchMatrix(kind=kind, p=p, m=m, d=d, entries=entries, stream_id=stream_id)


def apply(matrix, v):
    """Exact dense product of the sketch with a d-vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (matrix.d,):
        raise ValueError(f"vector has shape {v.shape}, expected ({matrix.d},)")
    return SketchedVector(values=matrix.entries @ v, source_matrix=matrix.stream_id)


def apply_batch(matrices, points, block_size=64, memory_cap_bytes=DEFAULT_MEMORY_CAP):
    """Project every point under every matrix; returns shape (n, l, m).

    Computed as blocked matrix-matrix products over groups of `block_size`
    points. Values agree with repeated `apply` up to float accumulation order
    (and exactly when block_size=1, which uses the same product expression).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {points.shape}")
    n, d = points.shape
    l = len(matrices)
    for mat in matrices:
        if mat.d != d:
            raise ValueError(f"matrix expects dimension {mat.d}, points have {d}")
    if l == 0 or n == 0:
        return np.empty((n, l, 0 if l == 0 else matrices[0].m))
    m = matrices[0].m
    check_capacity(n * l * m, memory_cap_bytes, f"{n}x{l} sketched vectors of length {m}")
    out = np.empty((n, l, m))
    for j, mat in enumerate(matrices):
        if block_size == 1:
            for i in range(n):
                out[i, j, :] = mat.entries @ points[i]
        else:
            for start in range(0, n, block_size):
                block = points[start:start + block_size]
                out[start:start + block_size, j, :] = (mat.entries @ block.T).T
    return out


def estimate_l2(sv):
    """Euclidean norm of the projection (variance-1/m entries need no rescale)."""
    return float(np.linalg.norm(sv.values))


def estimate_lp(sv, med_p):
    """Median of coordinate absolute values over Med_p.

    Even-length medians average the two middle order statistics.
    """
    if not med_p > 0:
        raise ValueError(f"med_p must be strictly positive, got {med_p}")
    return float(np.median(np.abs(sv.values)) / med_p)


def frobenius(matrix):
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(matrix.entries))
