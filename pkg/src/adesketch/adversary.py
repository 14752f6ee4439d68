"""The adaptive attack against distance-estimation oracles.

The attack runs against an oracle built over the three-point database
{-e, 0, +e}: it sends iid standard normal probes, reads back which of +-e the
probe looks closer to, and accumulates the signed probes into a single
adversarial vector whose reported length a single fixed sketch grossly
overestimates. Only the final evaluation query is adaptive. The same driver
runs against a naive single-sketch oracle (which it breaks), the ensemble
structure (which it does not), and an exact-distance reference.
"""

from dataclasses import dataclass, field

import numpy as np

from . import core


def attack_points(d, axis=0):
    """The canonical three-point database [-e, 0, +e] in R^d."""
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range for dimension {d}")
    e = np.zeros(d)
    e[axis] = 1.0
    return np.stack([-e, np.zeros(d), e])


class ExactOracle:
    """Answers true Euclidean distances; the no-sketch reference."""

    descriptor = "exact"

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64)
        self.n, self.d = self.points.shape

    def answer(self, q):
        return core.exact_distances(self.points, q, 2.0)


class NaiveJLOracle:
    """One fixed k x d Gaussian sketch for its whole lifetime.

    Entries are N(0, 1/k); the distance to x_i is reported as the norm of the
    projected difference. Accurate for queries independent of the matrix, and
    exactly the estimator the attack breaks.
    """

    def __init__(self, points, k, rng):
        points = np.asarray(points, dtype=np.float64)
        self.n, self.d = points.shape
        self.k = k
        self.matrix = rng.standard_normal((k, self.d)) * (k ** -0.5)
        self._sketched = np.empty((self.n, k))
        for i in range(self.n):
            self._sketched[i] = self.matrix @ points[i]
        self.descriptor = f"naivejl(k={k})"

    def answer(self, q):
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.d,):
            raise ValueError(f"query has shape {q.shape}, oracle expects ({self.d},)")
        return np.linalg.norm(self._sketched - self.matrix @ q, axis=1)


class AdeOracle:
    """The ensemble structure behind the oracle interface.

    Holds its own query stream; every answer uses a fresh index sample.
    """

    def __init__(self, structure, rng):
        self.structure = structure
        self.n = structure.n
        self.d = structure.d
        self._rng = rng
        self.descriptor = f"ade(p={structure.params.p}, eps={structure.params.epsilon}, l={structure.l})"

    def answer(self, q):
        return core.query(self.structure, q, self._rng, keep_samples=False).estimates


@dataclass
class EvalRecord:
    """Snapshot of the accumulated adversarial vector at one evaluation round."""

    round: int
    w: int
    acc_norm_true: float
    acc_norm_reported: float

    @property
    def ratio(self):
        return self.acc_norm_reported / self.acc_norm_true


@dataclass
class AttackTrace:
    """Evaluation records plus enough provenance to reproduce the run."""

    oracle_descriptor: str
    n_rounds: int
    eval_every: int
    adaptive: bool
    records: list = field(default_factory=list)
    signs: np.ndarray | None = None
    final_vector: np.ndarray | None = None

    def ratios(self):
        return np.array([rec.ratio for rec in self.records])


def _run_schedule(oracle, n_rounds, eval_every, rng, adaptive):
    if n_rounds < 1:
        raise ValueError(f"n_rounds must be at least 1, got {n_rounds}")
    if eval_every < 1:
        raise ValueError(f"eval_every must be at least 1, got {eval_every}")
    if oracle.n != 3:
        raise ValueError("the attack runs against the three-point database [-e, 0, +e]")
    d = oracle.d
    z = np.zeros(d)
    signs = np.zeros(n_rounds, dtype=np.uint8)
    trace = AttackTrace(
        oracle_descriptor=oracle.descriptor,
        n_rounds=n_rounds,
        eval_every=eval_every,
        adaptive=adaptive,
    )
    for i in range(1, n_rounds + 1):
        probe = rng.standard_normal(d)
        if adaptive:
            reported = oracle.answer(probe)
            # closer to +e than to -e (ties included) means subtract the probe
            w = 1 if reported[2] <= reported[0] else 0
        else:
            w = 0
        signs[i - 1] = w
        z += -probe if w else probe
        if i % eval_every == 0:
            reported_norm = float(oracle.answer(z)[1])  # distance to the 0 point
            trace.records.append(
                EvalRecord(
                    round=i,
                    w=w,
                    acc_norm_true=float(np.linalg.norm(z)),
                    acc_norm_reported=reported_norm,
                )
            )
    trace.signs = signs
    trace.final_vector = z
    return trace


def run_attack(oracle, n_rounds, eval_every, rng):
    """Run the adaptive schedule; black-box, reads only oracle answers.

    Per round: draw a standard normal probe, ask the oracle for distances to
    the database, set the sign bit from the reported distances to +-e, and
    accumulate the signed probe. Every `eval_every` rounds the current
    accumulated vector is evaluated against the 0 point and recorded (the only
    adaptively chosen queries). Evaluation answers never feed back into probe
    generation.
    """
    return _run_schedule(oracle, n_rounds, eval_every, rng, adaptive=True)


def random_query_baseline(oracle, n_rounds, eval_every, rng):
    """Identical schedule with no sign adaptation: the plain sum of probes."""
    return _run_schedule(oracle, n_rounds, eval_every, rng, adaptive=False)


def alignment_diagnostic(attack_z, target_matrix, axis=0):
    """Cosine similarity between the attack vector and Pi^T Pi e.

    White-box and test-only: quantifies how well the accumulated vector found
    the direction the target sketch inflates.
    """
    z = np.asarray(attack_z, dtype=np.float64)
    matrix = np.asarray(target_matrix, dtype=np.float64)
    y = matrix.T @ matrix[:, axis]
    nz, ny = np.linalg.norm(z), np.linalg.norm(y)
    if nz == 0 or ny == 0:
        raise ValueError("alignment undefined for zero-norm inputs")
    return float(z @ y / (nz * ny))


TRACE_CSV_HEADER = "round,w,acc_norm_true,acc_norm_reported,ratio"


def trace_csv_lines(trace):
    """Trace rows in the documented CSV layout, full float precision."""
    lines = [TRACE_CSV_HEADER]
    for rec in trace.records:
        lines.append(
            f"{rec.round},{rec.w},{rec.acc_norm_true!r},{rec.acc_norm_reported!r},{rec.ratio!r}"
        )
    return lines


def parse_trace_csv(text):
    """Inverse of trace_csv_lines for the data rows; returns column arrays."""
    rows = [
        line.split(",")
        for line in text.splitlines()
        if line and not line.startswith("#") and not line.startswith("round,")
    ]
    cols = list(zip(*rows)) if rows else [[]] * 5
    return {
        "round": np.array([int(x) for x in cols[0]]),
        "w": np.array([int(x) for x in cols[1]]),
        "acc_norm_true": np.array([float(x) for x in cols[2]]),
        "acc_norm_reported": np.array([float(x) for x in cols[3]]),
        "ratio": np.array([float(x) for x in cols[4]]),
    }
