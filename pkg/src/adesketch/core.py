"""The ensemble distance-estimation structure.

Building draws l independent sketch matrices (Gaussian for p=2, p-stable for
p<2) and stores the sketches of every data point; the original points are not
kept. A query samples r matrix indices with replacement, projects the query
once per sampled index, forms per-sketch distance estimates against the stored
sketches, and reports the per-point median. Fresh index sampling per query is
what makes answers trustworthy even when queries adapt to previous answers;
`robustify` exposes the same wrapper for arbitrary answerers.
"""

import hashlib
import math
import os
import struct
import tempfile
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ChecksumError, StructureFormatError, VersionError
from .rng import MATRIX_STREAM, substream, validate_seed
from .sketch import (
    DEFAULT_MEMORY_CAP,
    GAUSSIAN,
    STABLE,
    SketchMatrix,
    check_capacity,
    gen_sketch,
)
from .stable import (
    P_MAX,
    P_MIN,
    MedPTable,
    StableParams,
    lp_norm,
    med_p as stable_med_p,
    sample_unit_directions,
)


@dataclass(frozen=True)
class AdeParams:
    """Build parameters; p=2.0 selects the Euclidean/Gaussian path.

    c_m, c_l, c_r scale the derived sizes m, l, r. Defaults are tuned to pass
    the Monte Carlo accuracy suites at desk scale. l_max optionally caps the
    ensemble size below the derived l.
    """

    p: float = 2.0
    epsilon: float = 0.25
    delta: float = 0.05
    c_m: float = 40.0
    c_l: float = 1.0
    c_r: float = 3.0
    master_seed: int = 0
    l_max: int | None = None

    def __post_init__(self):
        if not P_MIN <= self.p <= P_MAX:
            raise ValueError(f"p must be in [{P_MIN}, {P_MAX}], got {self.p}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        for name in ("c_m", "c_l", "c_r"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        validate_seed(self.master_seed)
        if self.l_max is not None and self.l_max < 1:
            raise ValueError(f"l_max must be at least 1, got {self.l_max}")


def derive_r(params, n):
    """Number of per-query index samples."""
    return max(1, math.ceil(params.c_r * math.log(2 * n / params.delta)))


def derive_sizes(params, d, n):
    """Resolve (m, l, r) from the accuracy parameters and problem size.

    m = ceil(c_m / eps^2) rows per sketch; l sketches, with an extra
    log(3d/eps) factor on the p<2 path; r = ceil(c_r * ln(2n/delta)) samples
    per query.
    """
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    m = max(1, math.ceil(params.c_m / params.epsilon**2))
    l_raw = params.c_l * (d + math.log(1 / params.delta))
    if params.p < 2.0:
        l_raw *= math.log(3 * d / params.epsilon)
    l = max(1, math.ceil(l_raw))
    if params.l_max is not None:
        l = min(l, params.l_max)
    return m, l, derive_r(params, n)


@dataclass
class AdeStructure:
    """l sketch matrices plus the sketches of all n data points.

    `sketched` has shape (l, n, m): row j holds every point's image under
    matrix j. The raw points are not stored; queries are answered from the
    sketches alone.
    """

    params: AdeParams
    d: int
    n: int
    m: int
    l: int
    med_p: float
    matrices: list = field(repr=False)
    sketched: np.ndarray = field(repr=False)

    def memory_bytes(self):
        """Bytes held by the matrix entries and stored sketches."""
        return sum(mat.entries.nbytes for mat in self.matrices) + self.sketched.nbytes


@dataclass
class QueryResult:
    """Per-point estimates with sampling diagnostics."""

    estimates: np.ndarray
    sampled_indices: np.ndarray
    per_point_samples: np.ndarray | None = None


def _validate_points(points):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {points.shape}")
    n, d = points.shape
    if n < 1 or d < 1:
        raise ValueError(f"need at least one point and one dimension, got {n}x{d}")
    if not np.isfinite(points).all():
        bad = np.argwhere(~np.isfinite(points))[0]
        raise ValueError(f"non-finite coordinate at point {bad[0]}, column {bad[1]}")
    return points


def build(points, params, med_table=None, memory_cap_bytes=DEFAULT_MEMORY_CAP):
    """Construct the ensemble structure over an n x d dataset.

    Matrix j is generated from the substream (master_seed, MATRIX_STREAM, j),
    so rebuilding with the same seed is bit-identical and generation could be
    farmed out per matrix. Stored sketches use the same per-matrix product
    expression (`entries @ vector`) that queries use for the query projection,
    so a query equal to a stored point cancels exactly.
    """
    points = _validate_points(points)
    n, d = points.shape
    m, l, _ = derive_sizes(params, d, n)
    check_capacity(l * m * d, memory_cap_bytes, f"{l} sketch matrices of shape {m}x{d}")
    check_capacity(n * l * m, memory_cap_bytes, f"{n}x{l} sketched vectors of length {m}")

    if params.p == 2.0:
        med_value = stable_med_p(StableParams(2.0), 0)  # stored but unused
        kind, kind_p = GAUSSIAN, None
    else:
        table = med_table if med_table is not None else MedPTable.with_closed_forms()
        med_value = table.get(params.p)
        kind, kind_p = STABLE, params.p

    matrices = []
    sketched = np.empty((l, n, m))
    for j in range(l):
        mat = gen_sketch(
            kind, m, d,
            substream(params.master_seed, MATRIX_STREAM, j),
            stream_id=j, p=kind_p, memory_cap_bytes=memory_cap_bytes,
        )
        matrices.append(mat)
        entries = mat.entries
        for i in range(n):
            sketched[j, i, :] = entries @ points[i]
    return AdeStructure(
        params=params, d=d, n=n, m=m, l=l,
        med_p=med_value, matrices=matrices, sketched=sketched,
    )


def _validate_query(structure, q):
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (structure.d,):
        raise ValueError(f"query has shape {q.shape}, structure expects ({structure.d},)")
    if not np.isfinite(q).all():
        raise ValueError("query has non-finite coordinates")
    return q


def query(structure, q, rng, keep_samples=True):
    """Estimate the distance from q to every stored point.

    Samples r matrix indices iid with replacement (before reading q, so the
    sampled indices never depend on the query values), projects q once per
    distinct sampled index, and reports the per-point median of the r
    per-sketch estimates. Runtime is O((n + d) * m * r).
    """
    r = derive_r(structure.params, structure.n)
    sampled = rng.integers(0, structure.l, size=r)
    q = _validate_query(structure, q)

    euclidean = structure.params.p == 2.0
    samples = np.empty((structure.n, r))
    for j in np.unique(sampled):
        proj = structure.matrices[j].entries @ q
        diff = structure.sketched[j] - proj
        if euclidean:
            col = np.linalg.norm(diff, axis=1)
        else:
            col = np.median(np.abs(diff), axis=1) / structure.med_p
        samples[:, sampled == j] = col[:, None]
    estimates = np.median(samples, axis=1)
    return QueryResult(
        estimates=estimates,
        sampled_indices=sampled,
        per_point_samples=samples if keep_samples else None,
    )


def query_repeated(structure, queries, rng, keep_samples=True):
    """Answer a sequence of queries with fresh index samples per query."""
    return [query(structure, q, rng, keep_samples=keep_samples) for q in queries]


def exact_distances(points, q, p):
    """Brute-force lp distances from q to every row; verification oracle."""
    diffs = np.asarray(points, dtype=np.float64) - np.asarray(q, dtype=np.float64)
    if p == 2.0:
        return np.linalg.norm(diffs, axis=1)
    return lp_norm(diffs, p, axis=1)


def representativeness_counts(structure, n_directions, rng):
    """Per-direction counts of matrices estimating within (1 +- epsilon).

    Directions are random unit-lp vectors. A healthy ensemble keeps every
    count at or above 0.9*l; the audit command enforces exactly that.
    """
    params = structure.params
    directions = sample_unit_directions(params.p, structure.d, n_directions, rng)
    lo, hi = 1 - params.epsilon, 1 + params.epsilon
    counts = np.zeros(n_directions, dtype=np.int64)
    euclidean = params.p == 2.0
    for mat in structure.matrices:
        proj = directions @ mat.entries.T
        if euclidean:
            est = np.linalg.norm(proj, axis=1)
        else:
            est = np.median(np.abs(proj), axis=1) / structure.med_p
        counts += (est >= lo) & (est <= hi)
    return counts


@dataclass
class RobustAnswerer:
    """Median/majority over answers from r uniformly sampled instances.

    The generic adaptive-safety wrapper: per query, sample r instance indices
    with replacement, collect their answers, and aggregate. The ensemble
    query path above is an instantiation of this contract.
    """

    instances: list
    aggregator: str
    r: int
    rng: np.random.Generator

    def answer(self, q):
        idx = self.rng.integers(0, len(self.instances), size=self.r)
        answers = [self.instances[j](q) for j in idx]
        if self.aggregator == "median":
            return np.median(np.asarray(answers), axis=0)
        # majority vote; ties break toward the smallest answer
        counts = Counter(answers)
        return max(sorted(counts), key=counts.get)

    __call__ = answer


def robustify(instances, aggregator, r, rng):
    """Wrap l independent answerers into one adaptive-safe answerer."""
    instances = list(instances)
    if not instances:
        raise ValueError("need at least one instance")
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    if aggregator not in ("median", "majority"):
        raise ValueError(f"aggregator must be 'median' or 'majority', got {aggregator!r}")
    return RobustAnswerer(instances=instances, aggregator=aggregator, r=r, rng=rng)


# On-disk structure format: magic, u16 version, then little-endian header
# (p, epsilon, delta, c_m, c_l, c_r as f64; master_seed, d, n, m, l as u64;
# med_p as f64), l matrices row-major f64, n*l sketched vectors (point-major),
# and a 64-bit BLAKE2b checksum of all preceding bytes.
MAGIC = b"ADES"
FORMAT_VERSION = 1
_VERSION_STRUCT = struct.Struct("<H")
_HEADER_STRUCT = struct.Struct("<6dQ4Qd")


def save_structure(structure, path):
    """Write the structure file atomically (temp file + rename)."""
    header = _HEADER_STRUCT.pack(
        structure.params.p,
        structure.params.epsilon,
        structure.params.delta,
        structure.params.c_m,
        structure.params.c_l,
        structure.params.c_r,
        structure.params.master_seed,
        structure.d,
        structure.n,
        structure.m,
        structure.l,
        structure.med_p,
    )
    chunks = [MAGIC, _VERSION_STRUCT.pack(FORMAT_VERSION), header]
    for mat in structure.matrices:
        chunks.append(np.ascontiguousarray(mat.entries, dtype="<f8").tobytes())
    file_order = np.ascontiguousarray(structure.sketched.transpose(1, 0, 2), dtype="<f8")
    chunks.append(file_order.tobytes())

    digest = hashlib.blake2b(digest_size=8)
    for chunk in chunks:
        digest.update(chunk)
    chunks.append(digest.digest())

    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            for chunk in chunks:
                fh.write(chunk)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_structure(path):
    """Read a structure file; verifies the checksum before constructing anything."""
    with open(path, "rb") as fh:
        data = fh.read()
    prefix = len(MAGIC) + _VERSION_STRUCT.size
    if len(data) < prefix:
        raise StructureFormatError(f"{path}: too short to hold a structure header")
    if data[: len(MAGIC)] != MAGIC:
        raise StructureFormatError(f"{path}: bad magic bytes {data[:4]!r}, expected {MAGIC!r}")
    (version,) = _VERSION_STRUCT.unpack_from(data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise VersionError(
            f"{path}: file has format version {version}, this build reads version {FORMAT_VERSION}"
        )
    if len(data) < prefix + _HEADER_STRUCT.size + 8:
        raise ChecksumError(f"{path}: truncated header")
    p, epsilon, delta, c_m, c_l, c_r, master_seed, d, n, m, l = _HEADER_STRUCT.unpack_from(
        data, prefix
    )[:11]
    med_value = _HEADER_STRUCT.unpack_from(data, prefix)[11]
    expected = prefix + _HEADER_STRUCT.size + 8 * (l * m * d) + 8 * (n * l * m) + 8
    if len(data) != expected:
        raise ChecksumError(
            f"{path}: expected {expected} bytes for d={d}, n={n}, m={m}, l={l}; found {len(data)}"
        )
    digest = hashlib.blake2b(data[:-8], digest_size=8).digest()
    if digest != data[-8:]:
        raise ChecksumError(f"{path}: checksum mismatch")

    params = AdeParams(
        p=p, epsilon=epsilon, delta=delta, c_m=c_m, c_l=c_l, c_r=c_r,
        master_seed=master_seed,
    )
    offset = prefix + _HEADER_STRUCT.size
    kind, kind_p = (GAUSSIAN, None) if p == 2.0 else (STABLE, p)
    matrices = []
    for j in range(l):
        entries = np.frombuffer(data, dtype="<f8", count=m * d, offset=offset).reshape(m, d).copy()
        matrices.append(SketchMatrix(kind=kind, p=kind_p, m=m, d=d, entries=entries, stream_id=j))
        offset += 8 * m * d
    file_order = np.frombuffer(data, dtype="<f8", count=n * l * m, offset=offset).reshape(n, l, m)
    sketched = np.ascontiguousarray(file_order.transpose(1, 0, 2))
    return AdeStructure(
        params=params, d=d, n=n, m=m, l=l,
        med_p=med_value, matrices=matrices, sketched=sketched,
    )
