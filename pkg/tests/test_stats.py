import math

import numpy as np
import pytest

from randjulia.domain import Circle, Disk, DiskAt, RegionUnion
from randjulia.dynamics import derive_constants, green
from randjulia.domain import Constant
from randjulia.stats import (
    InsufficientData,
    Mode,
    TailCurve,
    disconnect_fraction,
    fast_escape_violations,
    fit_gamma,
    green_summary,
    merge_tails,
    sample_critical,
    sample_tail,
    sandwich_violations,
)


def test_small_disk_never_escapes():
    curve = sample_tail(Disk(0.25), 20_000, 60, 300, 1)
    assert curve.censored == curve.M
    assert np.all(curve.survival == 1.0)
    with pytest.raises(InsufficientData):
        fit_gamma(curve)


@pytest.mark.parametrize("gamma", [0.05, 0.2, 1.0])
def test_fit_recovers_synthetic_gamma(gamma):
    k = np.arange(61)
    curve = TailCurve.from_survival(np.exp(-gamma * k), M=1e12)
    fit = fit_gamma(curve, k_lo=5, min_survivors=1)
    assert fit.gamma_hat == pytest.approx(gamma, abs=1e-9)
    assert fit.rms_residual < 1e-9


def test_fit_needs_three_points():
    curve = TailCurve.from_survival([1, 1, 0.5, 0.25, 0.0, 0.0], M=1000)
    with pytest.raises(InsufficientData):
        fit_gamma(curve, k_lo=2)


def test_tail_curve_rejects_increasing_counts():
    with pytest.raises(ValueError):
        TailCurve(M=10, survivors=(10, 5, 6), censored=0, n_max=10, master_seed=0)


def test_merge_of_halves_equals_full_run():
    full = sample_tail(Disk(1.0), 8000, 40, 500, 7)
    a = sample_tail(Disk(1.0), 3000, 40, 500, 7)
    b = sample_tail(Disk(1.0), 5000, 40, 500, 7, stream_start=3000)
    assert merge_tails(a, b) == full


def test_merge_rejects_mismatch():
    a = sample_tail(Disk(1.0), 100, 20, 100, 7)
    b = sample_tail(Disk(1.0), 100, 20, 100, 8)
    with pytest.raises(ValueError):
        merge_tails(a, b)


@pytest.mark.parametrize("mode", list(Mode))
def test_thread_count_does_not_change_result(mode):
    a = sample_tail(Disk(1.0), 10_000, 40, 500, 3, mode=mode, threads=1)
    b = sample_tail(Disk(1.0), 10_000, 40, 500, 3, mode=mode, threads=4)
    assert a == b


def test_survival_nonincreasing_and_starts_at_one():
    curve = sample_tail(Disk(1.0), 5000, 60, 1000, 11)
    assert curve.survival[0] == 1.0
    assert np.all(np.diff(curve.survival) <= 0)
    assert np.all(curve.stderr <= 0.5 / math.sqrt(curve.M) + 1e-15)


def test_fast_escape_mode_dominates_escape_time():
    # g < G 2**-k fails once the orbit is fast, which happens no later than escape
    data = sample_critical(Disk(1.0), 5000, 1000, 5)
    assert not fast_escape_violations(data, 60).any()
    assert not sandwich_violations(data).any()


def test_disk_tail_regression():
    curve = sample_tail(Disk(1.0), 100_000, 60, 1000, 42)
    fit = fit_gamma(curve)
    assert curve.censored == 0
    assert curve.median() == 6
    assert fit.gamma_hat == pytest.approx(0.236172, rel=1e-5)
    assert fit.rms_residual == pytest.approx(0.026363, rel=1e-4)
    assert fit.fit_range == (5, 37)


def test_circle_rarely_censored():
    curve = sample_tail(Circle(0.5), 20_000, 60, 1000, 2)
    assert curve.censored / curve.M < 1e-2


def test_green_summary_disk():
    s = green_summary(Disk(1.0), 5000, 500, 42)
    assert s.sandwich_violations == 0
    assert s.censored_fraction == 0.0
    assert s.escaped == 5000
    qs = [s.quantiles[q] for q in sorted(s.quantiles)]
    assert qs == sorted(qs)
    assert qs[-1] <= (math.log(s.R0) + 1) / 2


def test_green_summary_tiny_disk_matches_autonomous():
    region = RegionUnion((DiskAt(0.3 + 0j, 1e-9),))
    s = green_summary(region, 200, 1000, 0)
    ref = green(Constant(0.3), 0, derive_constants(0.3 + 1e-9)).value
    for v in s.quantiles.values():
        assert v == pytest.approx(ref, rel=1e-3)


def test_disconnect_fraction_regressions():
    rep = disconnect_fraction(Disk(1.0), 2000, 30, 500, 42)
    assert rep.fraction_disconnected == 1.0
    small = disconnect_fraction(Disk(0.25), 200, 10, 200, 42)
    assert small.fraction_disconnected == 0.0
    assert small.horizon_limited_samples == 200


@pytest.mark.parametrize("K, expected", [(0, 0.0), (1, 0.0), (2, 1.0), (4, 1.0)])
def test_far_disk_evidence_depends_on_cap(K, expected):
    rep = disconnect_fraction(DiskAt(2 + 0j, 0.1), 300, 30, 500, 42, K_cap=K)
    assert rep.fraction_evidence_td == expected
    assert rep.fraction_disconnected == 1.0


def test_disconnect_fraction_threads():
    a = disconnect_fraction(Disk(1.0), 500, 20, 300, 9, threads=1)
    b = disconnect_fraction(Disk(1.0), 500, 20, 300, 9, threads=3)
    assert a == b
