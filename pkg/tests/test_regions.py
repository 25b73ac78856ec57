import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slagrigid.regions import (
    Spectrum,
    classify,
    m_margin,
    rayleigh_oracle_min,
    region_scan,
    spectra_from_lines,
    strengthened_margin,
)

spectra = st.lists(st.floats(min_value=-5, max_value=5), min_size=2, max_size=4)


def test_spectrum_is_canonical():
    s = Spectrum([0.5, 2.0, -1.0])
    assert s.tolist() == [2.0, 0.5, -1.0]
    assert len(s) == 3
    assert list(s) == [2.0, 0.5, -1.0]
    assert s == Spectrum([-1.0, 2.0, 0.5])
    assert s.neg().tolist() == [1.0, -0.5, -2.0]


def test_spectrum_rejects_non_finite():
    with pytest.raises(ValueError):
        Spectrum([1.0, math.nan])
    with pytest.raises(ValueError):
        classify([math.inf, 0.0], 1.0)


def test_classify_flat_plane():
    report = classify([0.0, 0.0, 0.0], 1.0)
    assert all(report.flags.values())
    assert report.m_margin == pytest.approx(1.0, abs=1e-12)
    assert report.strengthened_margin == pytest.approx(0.0, abs=1e-12)


def test_classify_in_xi():
    report = classify([2.0, -0.4], 2.0)
    assert report.flags["in_xi"]
    assert report.flags["in_ball"]
    assert report.xi_margin == pytest.approx(0.2)
    assert report.ball_margin == 0.0


def test_classify_outside_xi():
    report = classify([3.0, -0.5], 3.0)
    assert not report.flags["in_xi"]
    assert report.xi_margin == pytest.approx(-0.5)


def test_classify_in_xi_prime():
    report = classify([1.0, 1.0, -0.4], 1.0)
    assert report.flags["in_xi_prime"]
    assert report.flags["in_xi_prime_k"]
    assert report.xi_prime_margin == pytest.approx(0.2)


def test_classify_outside_m():
    report = classify([10.0, -10.0, 0.0], 11.0)
    assert report.m_margin <= -15.66
    assert not report.flags["in_m"]
    assert not report.flags["in_m_k"]
    assert report.violations() == []


def test_classify_validates_arguments():
    with pytest.raises(ValueError):
        classify([1.0], 0.0)
    with pytest.raises(ValueError):
        classify([1.0], 1.0, tol=-1.0)


def test_strict_and_semi_membership():
    report = classify([1.0, 1.0], 2.0, tol=1e-9)
    assert report.flags["in_m"] and report.flags["in_m_strict"]
    report = classify([1.0, 1.0], 2.0, tol=10.0)
    assert report.flags["in_m"] and not report.flags["in_m_strict"]


def test_one_dimension_is_vacuous():
    report = classify([7.0], 5.0)
    assert report.ball_margin == -2.0
    for margin in (report.xi_margin, report.xi_prime_margin, report.m_margin, report.strengthened_margin):
        assert margin == math.inf


def test_margin_fixtures():
    assert m_margin([2.0, -0.5]) == pytest.approx(1.5625, abs=1e-9)
    assert m_margin([0.0] * 5) == pytest.approx(1.0, abs=1e-12)
    assert strengthened_margin([1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert strengthened_margin([0.0, 0.0]) == pytest.approx(0.0, abs=1e-12)


def test_xi_prime_is_not_strengthened_in_four_dimensions():
    report = classify([1.0, -0.4, 1.0, 1.0], 1.0)
    assert report.flags["in_xi_prime"]
    assert report.strengthened_margin < -0.01
    assert "xi_prime_not_strengthened" in report.violations()


@settings(max_examples=60, deadline=None)
@given(spectra, st.randoms(use_true_random=False))
def test_margins_are_permutation_invariant(values, random):
    shuffled = list(values)
    random.shuffle(shuffled)
    a, b = classify(values, 6.0), classify(shuffled, 6.0)
    assert a.margins == b.margins


@settings(max_examples=60, deadline=None)
@given(spectra)
def test_m_margin_is_even(values):
    s = Spectrum(values)
    assert m_margin(s.neg()) == pytest.approx(m_margin(s), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(spectra)
def test_strengthened_is_shift_by_one(values):
    assert strengthened_margin(values) == pytest.approx(m_margin(values) - 1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-10, max_value=10), min_size=2, max_size=2))
def test_two_dimensional_strengthened_margin_is_nonnegative(values):
    assert strengthened_margin(values) >= -1e-9


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_xi_is_inside_m(n):
    summary = region_scan(n, 3.0, 500, seed=n, condition="xi")
    assert summary.memberships["in_xi"] == 500
    assert [c for c in summary.counterexamples if c["kind"] == "xi_not_m"] == []
    assert summary.extremes["m"]["min"] >= -1e-9


def test_xi_prime_strengthened_in_three_dimensions():
    summary = region_scan(3, 3.0, 500, seed=3, condition="xiprime")
    assert summary.memberships["in_xi_prime"] == 500
    assert summary.counterexamples == []
    assert summary.extremes["strengthened"]["min"] >= -1e-9


def test_two_dimensional_scan_has_no_counterexamples():
    summary = region_scan(2, 10.0, 500, seed=1)
    assert summary.counterexamples == []
    assert summary.extremes["strengthened"]["min"] >= -1e-9


def test_scan_finds_points_outside_m():
    summary = region_scan(3, 12.0, 1000, seed=2)
    assert summary.memberships["in_m"] < 1000
    assert summary.extremes["m"]["min"] < 0


def test_scan_counts_are_bounded():
    summary = region_scan(3, 2.0, 200, seed=9)
    assert all(0 <= count <= 200 for count in summary.memberships.values())
    assert summary.memberships["in_m_k"] <= summary.memberships["in_m"]
    assert summary.m_not_xi_union <= summary.memberships["in_m"]
    assert len(summary.rows) == 200


def test_scan_is_deterministic():
    a = region_scan(3, 3.0, 50, seed=4, condition="xiprime")
    b = region_scan(3, 3.0, 50, seed=4, condition="xiprime")
    assert a.to_dict() == b.to_dict()
    c = region_scan(3, 3.0, 50, seed=5, condition="xiprime")
    assert a.to_dict() != c.to_dict()


def test_scan_does_not_depend_on_processes():
    serial = region_scan(3, 3.0, 40, seed=6)
    parallel = region_scan(3, 3.0, 40, seed=6, processes=3)
    assert serial.to_dict() == parallel.to_dict()
    assert serial.rows == parallel.rows


def test_scan_rejection_cap():
    with pytest.raises(RuntimeError, match="attempts"):
        region_scan(5, 1000.0, 50, seed=0, condition="xi", rejection_cap=1)


def test_scan_validates_arguments():
    with pytest.raises(ValueError):
        region_scan(2, 1.0, 0, seed=0)
    with pytest.raises(ValueError):
        region_scan(2, 1.0, 10, seed=0, condition="sometimes")


@pytest.mark.parametrize("n", [2, 3])
def test_rayleigh_oracle_bounds_restricted_eigenvalue(n):
    rng = np.random.default_rng(n)
    for seed in range(20):
        lam = rng.uniform(-3, 3, size=n)
        exact = m_margin(lam)
        sampled = rayleigh_oracle_min(lam, 10**5, seed)
        assert sampled >= exact - 1e-6
        if n == 2:
            assert sampled == pytest.approx(exact, abs=1e-3)


def test_spectra_from_lines():
    lines = ["# header", "", "1, 2 ,3", "0.5,-0.5  # trailing", "   "]
    assert [s.tolist() for s in spectra_from_lines(lines)] == [[3.0, 2.0, 1.0], [0.5, -0.5]]
    with pytest.raises(ValueError, match="line 2"):
        spectra_from_lines(["1,2", "1,x"])
