from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memdetm.errors import ZeroDenominator
from memdetm.fuzzy import (IT2MembershipFamily, check_interval_order, constant, crisp,
                           family_from_spec, family_to_spec, normalized_membership, sigmoid_band,
                           tabulated)

finite = st.floats(-50, 50, allow_nan=False)


def test_crisp_family_selects_rule():
    assert normalized_membership(crisp(2, 0), [3.0, -1.0]).tolist() == [1.0, 0.0]


def test_equal_grades_split_evenly():
    fam = constant([0.5, 0.5], [0.5, 0.5])
    assert np.allclose(normalized_membership(fam, [0.0]), [0.5, 0.5])


def test_default_family_at_origin():
    # grades [0.4, 0.5] and [0.4, 0.6]: the complement is taken of the lower grade
    got = normalized_membership(sigmoid_band(), [0.0, 0.0])
    assert got == pytest.approx([0.45 / 0.95, 0.5 / 0.95], abs=1e-15)


def test_symmetric_band_gives_even_split():
    fam = sigmoid_band(band=0.0)
    assert np.allclose(normalized_membership(fam, [0.0, 0.0]), [0.5, 0.5], atol=1e-15)


def test_default_family_closed_form():
    # independent evaluation with the math module
    up1 = 1.0 / (1.0 + math.exp(2.0))
    lo1 = max(0.0, up1 - 0.1)
    up2 = 1.0 - lo1
    lo2 = max(0.0, 1.0 - up1 - 0.1)
    r1, r2 = 0.5 * (lo1 + up1), 0.5 * (lo2 + up2)
    want = [r1 / (r1 + r2), r2 / (r1 + r2)]
    got = normalized_membership(sigmoid_band(), [2.0, 0.0])
    assert got == pytest.approx(want, abs=1e-14)
    assert got == pytest.approx([0.07284518, 0.92715482], abs=1e-8)


def test_zero_denominator():
    with pytest.raises(ZeroDenominator):
        normalized_membership(constant([0, 0], [0, 0]), [1.0])


def test_interval_order_grid():
    g = np.linspace(-5, 5, 10)
    samples = [np.array([a, b]) for a in g for b in g]
    assert check_interval_order(sigmoid_band(), samples)


def test_interval_order_swapped():
    fam = sigmoid_band()
    swapped = IT2MembershipFamily(2, fam.upper, fam.lower)
    assert not check_interval_order(swapped, [np.array([0.3, 0.0])])


def test_interval_order_all_zero():
    assert check_interval_order(constant([0, 0], [0, 0]), [np.zeros(2)])


def test_interval_order_needs_samples():
    with pytest.raises(ValueError):
        check_interval_order(sigmoid_band(), [])


@given(st.lists(finite, min_size=2, max_size=2), st.floats(0, 0.5), st.floats(-3, 3))
def test_normalized_is_simplex(x, band, shift):
    w = normalized_membership(sigmoid_band(shift=shift, band=band), np.array(x))
    assert np.all(w >= 0)
    assert abs(w.sum() - 1) < 1e-12


@given(st.lists(st.floats(0.01, 1), min_size=3, max_size=3),
       st.lists(st.floats(0, 1), min_size=3, max_size=3), st.floats(1e-3, 1e3))
def test_scaling_invariance(up, frac, c):
    up = np.array(up)
    lo = up * np.array(frac)
    a = normalized_membership(constant(lo, up), [0.0])
    b = normalized_membership(constant(c * lo, c * up), [0.0])
    assert np.allclose(a, b, atol=1e-12, rtol=0)


@given(st.lists(finite, min_size=2, max_size=2))
def test_lower_only_blend_is_type1(x):
    fam = sigmoid_band(band=0.05, blend=1.0)
    lo, _ = fam.grades(np.array(x))
    if lo.sum() > 0:
        assert np.allclose(normalized_membership(fam, np.array(x)), lo / lo.sum(), atol=1e-12)


def test_tabulated_family():
    fam = tabulated([-1, 1], [[0.8, 0.0], [0.0, 0.8]], [[1.0, 0.2], [0.2, 1.0]])
    assert np.allclose(normalized_membership(fam, [0.0]), [0.5, 0.5])
    assert np.allclose(normalized_membership(fam, [5.0]), [0.1 / 1.0, 0.9 / 1.0])
    assert check_interval_order(fam, [np.array([v]) for v in np.linspace(-2, 2, 9)])


def test_spec_round_trip():
    fam = sigmoid_band(axis=1, shift=0.3, band=0.05)
    again = family_from_spec(family_to_spec(fam))
    assert np.allclose(normalized_membership(fam, [0.1, 0.7]), normalized_membership(again, [0.1, 0.7]))
    with pytest.raises(ValueError):
        family_from_spec({"type": "nope"})
