import inspect
from fractions import Fraction

import pytest

from mixmap.errors import DomainError
from mixmap.construction.params import level_positions
from mixmap.construction.verification import (CheckReport, contains_landmark, mixing_probe,
                                              random_mixing_trials, torus_compatibility,
                                              verify_monotone_pieces, verify_partition,
                                              verify_periodic_orbits, verify_slope_bound,
                                              smoothness_window_count, verify_smoothness_at_one)


def test_check_report_records_failures():
    report = CheckReport(name='demo')
    assert report.passed
    report.fail('first')
    report.fail('second')
    assert not report.passed
    assert report.to_dict() == {"name": "demo", "passed": False, "failures": ['first', 'second'], "details": {}}


def test_smoothness_at_one(f14):
    report = verify_smoothness_at_one(f14, 1)
    assert report.passed, report.failures
    maxima = [m for _, _, m in report.details["windows"]]
    assert maxima[-1] < maxima[0]


def test_smoothness_windows_reach_inside_power_piece(f14):
    report = verify_smoothness_at_one(f14, 1)
    assert smoothness_window_count(f14.params) == 7
    assert len(report.details["windows"]) == 7
    maxima = [m for _, _, m in report.details["windows"]]
    assert maxima[5] < maxima[2]


@pytest.mark.parametrize('k', [1, 2])
def test_smoothness_at_one_r2(f14_r2, k):
    report = verify_smoothness_at_one(f14_r2, k)
    assert report.passed, report.failures
    assert smoothness_window_count(f14_r2.params) == 11
    maxima = [m for _, _, m in report.details["windows"]]
    assert len(maxima) == 11
    assert maxima[-1] < maxima[-4]


def test_smoothness_order_limited_to_r(f14):
    with pytest.raises(DomainError):
        verify_smoothness_at_one(f14, 2)


@pytest.mark.parametrize('n', [1, 2, 3])
def test_monotone_pieces(f14, n):
    report = verify_monotone_pieces(f14, n)
    assert report.passed, report.failures


def test_monotone_pieces_sample_large_levels(f14):
    report = verify_monotone_pieces(f14, 4)
    assert report.passed, report.failures
    assert report.details["laps_checked"] == 6


def test_partition(f14):
    report = verify_partition(f14, 3)
    assert report.passed, report.failures


def test_torus_compatibility(f14):
    assert torus_compatibility(f14, 2)
    with pytest.raises(DomainError):
        torus_compatibility(f14, 3)


def test_periodic_orbits(f14):
    report = verify_periodic_orbits(f14, 4)
    assert report.passed, report.failures
    assert len(report.details["levels"]) == 4


def test_slope_bound(f14):
    report = verify_slope_bound(f14, samples=20000)
    assert report.passed, report.failures
    assert report.details["sup_ratio"] == pytest.approx(1.0, abs=1e-9)
    assert report.details["endpoint_slopes"] == pytest.approx([14.0, 14.0])


@pytest.mark.parametrize('a, b, expected', [
    (0.0, 0.1, True),
    (0.2, 0.4, False),
    (1.99, 2.01, True),
    (2.1, 2.2, False),
])
def test_contains_landmark(a, b, expected):
    assert contains_landmark(a, b) is expected


def test_mixing_from_zero_covers_in_two_steps(f14):
    result = mixing_probe(f14, 0.0, 1 / 14)
    assert result.steps == 2
    assert result.trace[-1] == (0.0, 4.0)


@pytest.mark.parametrize('n', [1, 2])
def test_mixing_from_level_interval(f14, n):
    x, y = level_positions(n)
    result = mixing_probe(f14, float(x), float(y))
    assert result.covered
    assert result.steps <= 2 * (n + 1) + 1


def test_mixing_rejects_degenerate_interval(f14):
    with pytest.raises(DomainError):
        mixing_probe(f14, 1.0, 1.0)


def test_random_mixing_trials(f14):
    report = random_mixing_trials(f14, trials=10, seed=7)
    assert report.passed, report.failures
    assert len(report.details["steps"]) == 10
    assert report.details["max_steps"] <= 500


@pytest.mark.parametrize('n', [1, 2, 3, 4])
def test_level_interval_covers_in_exact_step_count(f14, n):
    x, y = level_positions(n)
    report = mixing_probe(f14, float(x), float(y))
    assert report.covered
    assert report.steps == 2 * (n + 1) + 1


def test_periodic_orbits_through_level_eight(f14):
    report = verify_periodic_orbits(f14, 8)
    assert report.passed, report.failures
    assert len(report.details["levels"]) == 8


def test_hundred_random_mixing_trials(f14):
    report = random_mixing_trials(f14, trials=100, seed=7)
    assert report.passed, report.failures
    assert len(report.details["steps"]) == 100


def test_slope_bound_default_sample_count():
    assert inspect.signature(verify_slope_bound).parameters["samples"].default == 10 ** 6
