"""Symmetric p-stable sampling and the Med_p normalizer table.

A symmetric p-stable variate Z has characteristic function E[exp(-itZ)] =
exp(-|t|^p); linear combinations collapse as sum(v_i * Z_i) ~ ||v||_p * Z,
which is what makes a matrix of iid stable entries a norm estimator. The
median-of-absolute-values estimator divides by Med_p = Median(|Z|), which has
closed forms only for p in {1, 2} and is otherwise calibrated once by Monte
Carlo and cached in a small on-disk table.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import CalibrationError
from .rng import CALIBRATION_STREAM, substream, validate_seed

# Very small p makes |Z| so heavy-tailed that desk-scale calibration and the
# median estimator's constants stop being meaningful.
P_MIN = 0.25
P_MAX = 2.0

# Below this, the Monte Carlo median is not calibration quality.
CALIBRATION_MIN_SAMPLES = 1_000_000
DEFAULT_CALIBRATION_SAMPLES = 10_000_000


@dataclass(frozen=True)
class StableParams:
    """Stability index p; tails of |Z| decay like t**-p."""

    p: float

    def __post_init__(self):
        if not isinstance(self.p, (int, float)) or not math.isfinite(self.p):
            raise ValueError(f"stability index must be a finite real, got {self.p!r}")
        if not P_MIN <= self.p <= P_MAX:
            raise ValueError(f"stability index must be in [{P_MIN}, {P_MAX}], got {self.p}")
        object.__setattr__(self, "p", float(self.p))


def sample_stable(params, rng, size=None):
    """Draw from the symmetric p-stable law with E[exp(-itZ)] = exp(-|t|^p).

    Uses the two-uniform transform (uniform angle + unit exponential) in
    general; p=1 and p=2 use the equivalent closed forms (standard Cauchy and
    N(0, 2)). Deterministic given the generator state.
    """
    p = params.p
    if p == 1.0:
        return np.tan(rng.uniform(-np.pi / 2, np.pi / 2, size))
    if p == 2.0:
        return np.sqrt(2.0) * rng.standard_normal(size)
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    return (np.sin(p * u) / np.cos(u) ** (1.0 / p)) * (
        np.cos((1.0 - p) * u) / w
    ) ** ((1.0 - p) / p)


def med_p(params, seed, n_samples=DEFAULT_CALIBRATION_SAMPLES):
    """Median of |Z| for Z p-stable.

    Exact for p=1 (Cauchy quartile) and p=2 (0.75 quantile of the half-normal
    with scale sqrt(2)); otherwise the empirical median over `n_samples` draws
    from the (seed, calibration) stream.
    """
    p = params.p
    if p == 1.0:
        return 1.0
    if p == 2.0:
        return float(np.sqrt(2.0) * stats.norm.ppf(0.75))
    if n_samples < CALIBRATION_MIN_SAMPLES:
        raise CalibrationError(
            f"med_p calibration needs at least {CALIBRATION_MIN_SAMPLES} samples, "
            f"got {n_samples}"
        )
    rng = substream(seed, CALIBRATION_STREAM)
    z = sample_stable(params, rng, n_samples)
    return float(np.median(np.abs(z)))


def tail_survival_estimate(params, t, n_samples, seed):
    """Empirical P(|Z| >= t); property-test support only."""
    if t < 0:
        raise ValueError(f"threshold must be non-negative, got {t}")
    rng = substream(seed, CALIBRATION_STREAM)
    z = sample_stable(params, rng, n_samples)
    return float(np.mean(np.abs(z) >= t))


def lp_norm(x, p, axis=-1):
    """(sum |x|^p)^(1/p); for p < 1 this is the standard quasi-norm."""
    return np.sum(np.abs(x) ** p, axis=axis) ** (1.0 / p)


def sample_unit_directions(p, d, size, rng):
    """Random directions on the unit lp sphere, shape (size, d).

    Coordinates are drawn with density proportional to exp(-|x|^p) (a signed
    Gamma(1/p)**(1/p) draw) and the vector is normalized by its lp norm, the
    standard recipe for a full-support direction distribution on the sphere.
    """
    g = rng.standard_gamma(1.0 / p, (size, d)) ** (1.0 / p)
    signs = np.where(rng.random((size, d)) < 0.5, -1.0, 1.0)
    x = signs * g
    return x / lp_norm(x, p, axis=1)[:, None]


@dataclass(frozen=True)
class MedPEntry:
    value: float
    seed: int
    n_samples: int


class MedPTable:
    """Write-once cache of Med_p values keyed by p, with provenance.

    File format: one entry per line, ``p <tab> med_p <tab> seed <tab>
    n_samples``, UTF-8, LF line endings. Floats are written with full
    round-trippable precision.
    """

    def __init__(self):
        self._entries = {}

    @classmethod
    def with_closed_forms(cls):
        """Table holding the exact entries for p=1 and p=2."""
        table = cls()
        table.add(1.0, med_p(StableParams(1.0), 0), seed=0, n_samples=0)
        table.add(2.0, med_p(StableParams(2.0), 0), seed=0, n_samples=0)
        return table

    def add(self, p, value, seed, n_samples):
        if not value > 0:
            raise ValueError(f"Med_p must be strictly positive, got {value}")
        if p == 1.0 and value != 1.0:
            raise ValueError(f"Med_p(1.0) is exactly 1, refusing to store {value}")
        self._entries[float(p)] = MedPEntry(float(value), int(seed), int(n_samples))

    def calibrate(self, params, seed, n_samples=DEFAULT_CALIBRATION_SAMPLES):
        """Compute med_p, store it with provenance, and return the value."""
        value = med_p(params, seed, n_samples)
        self.add(params.p, value, seed=seed, n_samples=n_samples)
        return value

    def get(self, p):
        entry = self._entries.get(float(p))
        if entry is None:
            raise CalibrationError(
                f"no Med_p calibration for p={p}; calibrate it first "
                f"(closed forms exist only for p=1 and p=2)"
            )
        return entry.value

    def entry(self, p):
        self.get(p)
        return self._entries[float(p)]

    def __contains__(self, p):
        return float(p) in self._entries

    def items(self):
        return sorted(self._entries.items())

    def save(self, path):
        lines = [
            f"{entry_p!r}\t{e.value!r}\t{e.seed}\t{e.n_samples}\n"
            for entry_p, e in self.items()
        ]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)

    @classmethod
    def load(cls, path):
        table = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 4:
                    raise CalibrationError(
                        f"{path}: line {lineno}: expected 4 tab-separated fields"
                    )
                p, value, seed, n_samples = parts
                table.add(float(p), float(value), validate_seed(int(seed)), int(n_samples))
        return table
