"""Dimensional constants against closed-form values."""

import math

import pytest

from yamabe_lab.constants import (area_weight, conformal_coupling,
                                  critical_exponent, sphere_volume)
from yamabe_lab.functional import lambda_constant


def test_conformal_coupling_values():
    assert conformal_coupling(3) == pytest.approx(1.0 / 8.0, abs=0)
    assert conformal_coupling(4) == pytest.approx(1.0 / 6.0)
    assert conformal_coupling(6) == pytest.approx(0.2)


def test_critical_exponent_values():
    assert critical_exponent(3) == pytest.approx(6.0, abs=0)
    assert critical_exponent(4) == pytest.approx(4.0, abs=0)
    assert critical_exponent(6) == pytest.approx(3.0, abs=0)


def test_sphere_volumes_closed_form():
    # S^1 = 2 pi, S^2 = 4 pi, S^3 = 2 pi^2.
    assert sphere_volume(1) == pytest.approx(2 * math.pi, rel=1e-14)
    assert sphere_volume(2) == pytest.approx(4 * math.pi, rel=1e-14)
    assert sphere_volume(3) == pytest.approx(2 * math.pi**2, rel=1e-14)
    assert area_weight(3) == pytest.approx(4 * math.pi, rel=1e-14)


def test_lambda_constant_frozen():
    # Lambda(n) = n(n-2)/4 * omega_n^{2/n}; values frozen from the
    # closed form evaluated independently.
    assert lambda_constant(3) == pytest.approx(5.477904089531331, rel=1e-13)
    assert lambda_constant(4) == pytest.approx(10.260398641294909, rel=1e-13)
    assert lambda_constant(5) == pytest.approx(14.81191172000594, rel=1e-13)
    # direct recomputation of the n = 3 value: omega_3 = 2 pi^2
    expected = 3.0 / 4.0 * (2 * math.pi**2) ** (2.0 / 3.0)
    assert lambda_constant(3) == pytest.approx(expected, rel=1e-14)


def test_dimension_guards():
    for fn in (conformal_coupling, critical_exponent, area_weight):
        with pytest.raises(ValueError):
            fn(2)
