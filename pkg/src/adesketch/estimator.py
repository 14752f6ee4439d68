"""scikit-learn estimator facade over the ensemble structure.

`fit(X)` builds the sketch ensemble; `transform(Q)` returns an
(n_queries, n_fitted_points) matrix of lp distance estimates, one row per
query. Each row is answered from a fresh random subsample of the ensemble, so
accuracy guarantees hold even for queries chosen adversarially from earlier
answers. That freshness makes transform stateful across calls (reproducible
for a fixed random_state and call sequence), unlike a deterministic
transformer.
"""

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import AdeParams, build, query
from .rng import QUERY_STREAM, fresh_seed, substream
from .sketch import DEFAULT_MEMORY_CAP


def _resolve_master_seed(random_state):
    if random_state is None:
        return fresh_seed()
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(0, 2**64, dtype=np.uint64))
    if isinstance(random_state, np.random.RandomState):
        return int(random_state.randint(0, 2**32))
    raise ValueError(f"random_state must be None, an int, or a numpy generator, got {random_state!r}")


class AdaptiveDistanceEstimator(TransformerMixin, BaseEstimator):
    """Distance estimates to all fitted points, safe under adaptive queries.

    Parameters
    ----------
    p : float, default=2.0
        Norm index in [0.25, 2.0]; 2.0 uses Gaussian sketches, smaller values
        use p-stable sketches with the median estimator.
    epsilon : float, default=0.25
        Target relative accuracy of the estimates.
    delta : float, default=0.05
        Per-query failure probability.
    c_m, c_l, c_r : float
        Constants scaling the derived sketch width, ensemble size, and
        per-query sample count.
    l_max : int or None
        Optional cap on the ensemble size.
    med_table : MedPTable or None
        Calibrated Med_p values; only needed for p outside {1.0, 2.0}.
    memory_cap_bytes : int
        Build refuses allocations beyond this cap.
    random_state : int, numpy Generator, or None
        Master seed for matrix generation and query sampling.

    Attributes
    ----------
    structure_ : AdeStructure
        The fitted ensemble.
    n_features_in_ : int
    n_samples_fit_ : int
    """

    def __init__(self, p=2.0, epsilon=0.25, delta=0.05, c_m=40.0, c_l=1.0,
                 c_r=3.0, l_max=None, med_table=None,
                 memory_cap_bytes=DEFAULT_MEMORY_CAP, random_state=None):
        self.p = p
        self.epsilon = epsilon
        self.delta = delta
        self.c_m = c_m
        self.c_l = c_l
        self.c_r = c_r
        self.l_max = l_max
        self.med_table = med_table
        self.memory_cap_bytes = memory_cap_bytes
        self.random_state = random_state

    def fit(self, X, y=None):
        """Build the sketch ensemble over X (n_samples, n_features)."""
        X = check_array(X, dtype=np.float64)
        seed = _resolve_master_seed(self.random_state)
        params = AdeParams(
            p=self.p, epsilon=self.epsilon, delta=self.delta,
            c_m=self.c_m, c_l=self.c_l, c_r=self.c_r,
            master_seed=seed, l_max=self.l_max,
        )
        self.structure_ = build(
            X, params, med_table=self.med_table,
            memory_cap_bytes=self.memory_cap_bytes,
        )
        self.n_features_in_ = X.shape[1]
        self.n_samples_fit_ = X.shape[0]
        self._query_rng = substream(seed, QUERY_STREAM)
        return self

    def transform(self, X):
        """Distance estimates from each row of X to every fitted point."""
        check_is_fitted(self, "structure_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but this estimator was fitted "
                f"with {self.n_features_in_} features"
            )
        out = np.empty((X.shape[0], self.n_samples_fit_))
        for i, q in enumerate(X):
            out[i] = query(self.structure_, q, self._query_rng, keep_samples=False).estimates
        return out

    def query(self, q):
        """Single query with full diagnostics (sampled indices, per-sketch estimates)."""
        check_is_fitted(self, "structure_")
        return query(self.structure_, np.asarray(q, dtype=np.float64), self._query_rng)
