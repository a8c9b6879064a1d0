"""
Tests des bornes de Peierls, du seuil de dimérisation et du taux de décroissance
"""
import math

import numpy as np
import pytest

from app.exceptions import DivergentSeriesError, InvalidParameterError
from app.services.bounds import (
    bound_report,
    bounds_table,
    c_of_S,
    decay_rate,
    decay_tail_bound,
    dimerization_threshold,
    geometric_tail,
    parse_S_grid,
    peierls_bound,
    peierls_bound_array,
    peierls_bound_truncated,
    peierls_pieces,
    threshold_grid_scan,
    winding_suppression_bound,
)


# ---------- somme sur les contours ----------

def test_bound_at_S_40():
    pieces = peierls_pieces(40)
    assert pieces["k5"] == pytest.approx(64 / 729)
    assert pieces["k6"] == pytest.approx(128 / 6561)
    assert peierls_bound(40) == pytest.approx(0.47355, abs=1e-5)
    assert peierls_bound(40) < 0.5


def test_c_of_S():
    assert c_of_S(40) == pytest.approx(0.05289, abs=1e-5)
    assert c_of_S(30) < 0
    for S in (40, 41.5, 60, 100, 1000):
        assert c_of_S(S) > 0


@pytest.mark.parametrize("S", [8, 10, 20, 39.2, 40, 100])
def test_closed_form_tail_matches_truncated_sum(S):
    assert peierls_bound(S) == pytest.approx(peierls_bound_truncated(S), rel=1e-12)


def test_geometric_tail_closed_form():
    r = 4 / 9
    assert geometric_tail(r, 7) == pytest.approx(r ** 7 * (8 - 7 * r) / (1 - r) ** 2)
    assert geometric_tail(0.5, 0) == pytest.approx(4.0)


@pytest.mark.parametrize("S", [1, 7, 7.5])
def test_divergence_up_to_fifteen_halves(S):
    with pytest.raises(DivergentSeriesError):
        peierls_bound(S)
    with pytest.raises(DivergentSeriesError):
        peierls_bound_truncated(S)


def test_invalid_spin():
    with pytest.raises(InvalidParameterError):
        peierls_bound(0)


def test_bound_is_decreasing():
    grid = np.linspace(8, 200, 500)
    values = peierls_bound_array(grid)
    assert np.all(np.diff(values) < 0)
    assert values[-1] < 0.1


def test_array_matches_scalar():
    grid = [8.0, 12.5, 39.2, 40.0, 77.0]
    np.testing.assert_allclose(peierls_bound_array(np.array(grid)), [peierls_bound(S) for S in grid], rtol=1e-14)


# ---------- seuil ----------

def test_dimerization_threshold():
    threshold = dimerization_threshold()
    assert threshold == pytest.approx(39.2, abs=0.1)
    assert peierls_bound(threshold) == pytest.approx(0.5, abs=1e-6)


def test_grid_scan_agrees_with_bisection():
    assert threshold_grid_scan() == pytest.approx(dimerization_threshold(xtol=1e-9), abs=1e-5)


# ---------- décroissance ----------

def test_decay_rate():
    assert decay_rate(40) == pytest.approx(1 / math.log(9 / 4))
    assert decay_rate(40) == pytest.approx(1.23315, abs=1e-5)
    assert decay_rate(8) == pytest.approx(33.0, abs=0.1)
    with pytest.raises(DivergentSeriesError):
        decay_rate(7.5)


def test_decay_tail_bound():
    values = [decay_tail_bound(40, 2.0, m) for m in range(2, 11)]
    assert all(v > 0 for v in values)
    assert all(a > b for a, b in zip(values, values[1:]))
    with pytest.raises(DivergentSeriesError):
        decay_tail_bound(40, 1.0, 2)
    with pytest.raises(InvalidParameterError):
        decay_tail_bound(40, 0.0, 2)


def test_winding_suppression_bound():
    assert winding_suppression_bound(2, 1, 1) == pytest.approx(1.25 / 8)


# ---------- rapports ----------

def test_bound_report():
    report = bound_report(40)
    assert report.series_convergent
    assert report.q == 81
    assert report.c_of_S == pytest.approx(0.05289, abs=1e-5)
    assert report.eta_min == pytest.approx(1.23315, abs=1e-5)
    assert report.k5_term + report.k6_term + report.tail_term == pytest.approx(report.peierls_bound)


def test_bound_report_marks_divergence():
    report = bound_report(7)
    assert not report.series_convergent
    assert report.peierls_bound is None
    assert report.c_of_S is None


def test_bounds_table_and_grid():
    grid = parse_S_grid("8:9:0.5")
    assert grid == [8.0, 8.5, 9.0]
    table = bounds_table([7.0] + grid)
    assert [r.series_convergent for r in table] == [False, True, True, True]
    assert parse_S_grid("8, 10,40") == [8.0, 10.0, 40.0]
    assert len(parse_S_grid("8:100:0.5")) == 185


@pytest.mark.parametrize("grid", ["8:7:1", "8:9:0", "1:2"])
def test_invalid_S_grid(grid):
    with pytest.raises(InvalidParameterError):
        parse_S_grid(grid)
