"""Stable sampling, Med_p calibration, and the tail/symmetry properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from adesketch.errors import CalibrationError
from adesketch.rng import substream
from adesketch.stable import (
    MedPTable,
    StableParams,
    lp_norm,
    med_p,
    sample_stable,
    sample_unit_directions,
    tail_survival_estimate,
)


def test_params_validation():
    StableParams(0.25)
    StableParams(2.0)
    with pytest.raises(ValueError):
        StableParams(0.1)
    with pytest.raises(ValueError):
        StableParams(2.5)
    with pytest.raises(ValueError):
        StableParams(float("nan"))


def test_variance_p2():
    # exp(-t^2) is the characteristic function of N(0, 2)
    z = sample_stable(StableParams(2.0), substream(1, 0), 100_000)
    assert 1.9 <= z.var() <= 2.1


def test_median_abs_p1():
    # standard Cauchy: median |Z| = tan(pi/4) = 1
    z = sample_stable(StableParams(1.0), substream(2, 0), 100_000)
    assert 0.98 <= np.median(np.abs(z)) <= 1.02


def test_survival_ratio_p05():
    # t^(-p) tails: quadrupling t halves the p=1/2 survival probability
    z = np.abs(sample_stable(StableParams(0.5), substream(3, 0), 1_000_000))
    ratio = np.mean(z >= 100) / np.mean(z >= 400)
    assert 1.6 <= ratio <= 2.4


def test_scalar_draws_deterministic():
    params = StableParams(0.7)
    a = sample_stable(params, substream(4, 0))
    b = sample_stable(params, substream(4, 0))
    assert np.isscalar(a) or a.shape == ()
    assert a == b


def test_streams_bit_identical():
    for p in (0.5, 1.0, 1.7, 2.0):
        a = sample_stable(StableParams(p), substream(5, 1), 10_000)
        b = sample_stable(StableParams(p), substream(5, 1), 10_000)
        assert np.array_equal(a, b)


def test_symmetry_all_p():
    for p in (0.25, 0.5, 1.0, 1.5, 2.0):
        z = sample_stable(StableParams(p), substream(6, int(p * 100)), 1_000_000)
        assert -0.01 <= np.median(z) <= 0.01


def test_stability_closure_ks_nonspecial_p():
    # sum(v_i Z_i) ~ ||v||_p Z, two-sample KS at significance 1e-3
    p = 0.7
    v = substream(7, 0).standard_normal(8)
    z = sample_stable(StableParams(p), substream(7, 1), (100_000, 8))
    lhs = z @ v
    rhs = lp_norm(v, p) * sample_stable(StableParams(p), substream(7, 2), 100_000)
    assert stats.ks_2samp(lhs, rhs).pvalue >= 1e-3


def test_med_p_closed_form_p1():
    assert med_p(StableParams(1.0), seed=0) == 1.0


def test_med_p_closed_form_p2_against_quantile_oracle():
    # independent oracle: 0.75 standard-normal quantile via erfinv
    oracle = float(np.sqrt(2.0) * np.sqrt(2.0) * special.erfinv(0.5))
    assert med_p(StableParams(2.0), seed=0) == pytest.approx(oracle, rel=1e-12)
    assert med_p(StableParams(2.0), seed=0) == pytest.approx(0.9538725524089398, rel=1e-12)


def test_med_p_rejects_small_sample_budget():
    with pytest.raises(CalibrationError):
        med_p(StableParams(0.5), seed=0, n_samples=10_000)


def test_med_p_monte_carlo_reproducibility():
    params = StableParams(0.5)
    same1 = med_p(params, seed=11, n_samples=1_000_000)
    same2 = med_p(params, seed=11, n_samples=1_000_000)
    assert same1 == same2
    # different seeds agree within 0.5% relative at calibration scale
    v1 = med_p(params, seed=11, n_samples=10_000_000)
    v2 = med_p(params, seed=12, n_samples=10_000_000)
    assert abs(v1 - v2) / v1 < 0.005
    # frozen from the pre-registered calibration run
    assert v1 == pytest.approx(1.28395, abs=5e-3)


def test_tail_survival_cauchy_against_exact_cdf():
    # exact Cauchy oracle: P(|Z| >= t) = 2*arctan(1/t)/pi
    exact = 2 * np.arctan(1 / 10) / np.pi
    est = tail_survival_estimate(StableParams(1.0), 10.0, 1_000_000, seed=8)
    assert est == pytest.approx(exact, abs=5e-3)


def test_tail_survival_at_zero():
    for p in (0.5, 1.3, 2.0):
        assert tail_survival_estimate(StableParams(p), 0.0, 1000, seed=9) == 1.0
    with pytest.raises(ValueError):
        tail_survival_estimate(StableParams(1.0), -1.0, 1000, seed=9)


def test_tail_survival_sweep_p05():
    surv = [
        tail_survival_estimate(StableParams(0.5), t, 1_000_000, seed=10)
        for t in (25, 100, 400)
    ]
    for a, b in zip(surv, surv[1:]):
        assert 1.5 <= a / b <= 2.5


def test_med_table_roundtrip(tmp_path):
    table = MedPTable.with_closed_forms()
    table.calibrate(StableParams(0.5), seed=11, n_samples=1_000_000)
    path = tmp_path / "medp.tsv"
    table.save(path)
    loaded = MedPTable.load(path)
    assert loaded.get(1.0) == 1.0
    assert loaded.get(0.5) == table.get(0.5)
    entry = loaded.entry(0.5)
    assert entry.seed == 11 and entry.n_samples == 1_000_000
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.decode("utf-8").count("\n") == 3


def test_med_table_missing_entry():
    table = MedPTable.with_closed_forms()
    with pytest.raises(CalibrationError, match="p=0.7"):
        table.get(0.7)
    with pytest.raises(ValueError):
        table.add(0.5, -1.0, seed=0, n_samples=0)
    with pytest.raises(ValueError):
        table.add(1.0, 1.5, seed=0, n_samples=0)


@settings(max_examples=25, deadline=None)
@given(
    p=st.floats(min_value=0.25, max_value=2.0),
    d=st.integers(min_value=1, max_value=40),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_unit_directions_have_unit_lp_norm(p, d, seed):
    dirs = sample_unit_directions(p, d, 5, substream(seed, 0))
    assert dirs.shape == (5, d)
    np.testing.assert_allclose(lp_norm(dirs, p, axis=1), 1.0, rtol=1e-9)
