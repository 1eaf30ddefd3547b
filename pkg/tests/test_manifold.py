"""Metric profiles: validation, curvature, volumes, growth exponents."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from yamabe_lab import manifold
from yamabe_lab.errors import DomainError, ProfileError


# -- validation --------------------------------------------------------------


def test_rejects_low_dimension():
    with pytest.raises(ProfileError):
        manifold.euclidean(2)


def test_rejects_nonpositive_r_max():
    with pytest.raises(ProfileError):
        manifold.euclidean(3, r_max=0.0)


def test_rejects_wrong_pole_slope():
    # f(r) = 2r has f'(0) = 2, not an admissible profile.
    with pytest.raises(ProfileError):
        manifold.MetricProfile(
            n=3, r_max=1.0, name="bad",
            f=lambda r: 2.0 * np.asarray(r, dtype=float),
            f_prime=lambda r: np.full_like(np.asarray(r, dtype=float), 2.0),
            f_second=lambda r: np.zeros_like(np.asarray(r, dtype=float)))


def test_rejects_vanishing_warp():
    with pytest.raises(ProfileError):
        manifold.MetricProfile(
            n=3, r_max=8.0, name="bad",
            f=np.sin, f_prime=np.cos, f_second=lambda r: -np.sin(r))


def test_sphere_needs_r_max_below_pi():
    with pytest.raises(ProfileError):
        manifold.sphere(3, r_max=3.5)


def test_power_bump_parameter_guards():
    with pytest.raises(ProfileError):
        manifold.power_bump(3, a=1.0, b=0.0)
    with pytest.raises(ProfileError):
        manifold.power_bump(3, a=-3.0, b=1.0)  # a <= -b e


def test_check_radius():
    prof = manifold.euclidean(3, r_max=5.0)
    prof.check_radius(5.0)
    with pytest.raises(DomainError):
        prof.check_radius(5.1)
    with pytest.raises(DomainError):
        prof.check_radius(-0.1)


# -- scalar curvature --------------------------------------------------------


def test_space_form_curvatures():
    # [TRIVIAL] flat R = 0; hyperbolic R = -n(n-1); sphere R = +n(n-1).
    r = np.linspace(0.0, 2.0, 64)
    for n in (3, 4, 5):
        assert np.allclose(manifold.euclidean(n).scalar_curvature(r), 0.0,
                           atol=1e-9)
        assert np.allclose(manifold.hyperbolic(n).scalar_curvature(r),
                           -n * (n - 1), rtol=1e-9)
        assert np.allclose(
            manifold.sphere(n).scalar_curvature(np.linspace(0, 2.0, 64)),
            n * (n - 1), rtol=1e-9)


def test_cigar_curvature_limits():
    # [DERIVED] pole value from the series R(0) = -6 c3 n(n-1) with
    # c3 = -1/3 (tanh r = r - r^3/3 + ...), so R(0) = 12 for n = 3;
    # far limit (n-1)(n-2)/1 = 2 on the unit cylinder end.
    prof = manifold.cigar(3, r_max=50.0)
    assert prof.scalar_curvature(0.0) == pytest.approx(12.0, rel=1e-12)
    assert prof.scalar_curvature(30.0) == pytest.approx(2.0, rel=1e-6)


def test_pole_series_matches_direct_formula():
    # The series branch must join the direct formula continuously.
    prof = manifold.power_bump(3, a=1.5, b=0.7, r_max=10.0)
    near = prof.scalar_curvature(9e-5)    # series branch
    direct = prof.scalar_curvature(2e-4)  # direct branch
    assert near == pytest.approx(direct, rel=1e-4)


def test_scalar_curvature_scalar_in_scalar_out():
    prof = manifold.hyperbolic(3)
    out = prof.scalar_curvature(1.0)
    assert isinstance(out, float)
    assert out == pytest.approx(-6.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-0.2, 4.0), b=st.floats(0.2, 2.0))
def test_bump_pole_curvature_series(a, b):
    # R(0) = -6 a n (n-1) for the bump family (c3 = a).
    prof = manifold.power_bump(3, a=a, b=b, r_max=10.0)
    assert prof.scalar_curvature(0.0) == pytest.approx(-36.0 * a, abs=1e-9)


# -- volumes -----------------------------------------------------------------


def test_flat_ball_volume_closed_form():
    prof = manifold.euclidean(3, r_max=10.0)
    assert prof.ball_volume(2.0) == pytest.approx(4.0 / 3.0 * math.pi * 8.0,
                                                  rel=1e-10)


def test_hyperbolic_ball_volume_oracle():
    # Independent quadrature of omega_2 sinh^2.
    prof = manifold.hyperbolic(3, r_max=10.0)
    oracle, _ = quad(lambda t: 4 * math.pi * math.sinh(t) ** 2, 0.0, 3.0)
    assert prof.ball_volume(3.0) == pytest.approx(oracle, rel=1e-9)


def test_ball_volume_zero_radius():
    assert manifold.euclidean(3).ball_volume(0.0) == 0.0


# -- volume growth -----------------------------------------------------------


def test_flat_growth_exponent_zero():
    growth = manifold.volume_growth_exponent(manifold.euclidean(3, 100.0),
                                             (10.0, 80.0))
    assert not growth.exponential
    assert growth.rho == pytest.approx(0.0, abs=1e-6)


def test_hyperbolic_growth_flagged_exponential():
    growth = manifold.volume_growth_exponent(manifold.hyperbolic(3, 30.0),
                                             (10.0, 28.0))
    assert growth.exponential
    assert growth.rho is None


def test_cigar_growth_exponent():
    # Cylinder end: V(r) ~ r, i.e. rho = 1 - n = -2 in dimension 3.
    growth = manifold.volume_growth_exponent(manifold.cigar(3, 200.0),
                                             (50.0, 180.0))
    assert not growth.exponential
    assert growth.rho == pytest.approx(-2.0, abs=0.05)


def test_growth_window_validation():
    prof = manifold.euclidean(3, 10.0)
    with pytest.raises(DomainError):
        manifold.volume_growth_exponent(prof, (5.0, 2.0))
    with pytest.raises(DomainError):
        manifold.volume_growth_exponent(prof, (1.0, 5.0), samples=4)


# -- table profiles ----------------------------------------------------------


def test_table_profile_roundtrip(tmp_path):
    r = np.linspace(0.0, 5.0, 201)
    path = tmp_path / "sinh.csv"
    lines = ["r,f"] + [f"{ri},{math.sinh(ri)}" for ri in r]
    path.write_text("\n".join(lines) + "\n")
    prof = manifold.load_table_csv(3, path)
    assert prof.name == "table"
    # Spline interpolation reproduces the function and its curvature.
    assert float(prof.f(2.345)) == pytest.approx(math.sinh(2.345), rel=1e-8)
    assert prof.scalar_curvature(2.0) == pytest.approx(-6.0, rel=1e-4)


def test_table_requires_header_and_density(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n0,0\n1,1\n")
    with pytest.raises(ProfileError):
        manifold.load_table_csv(3, path)
    with pytest.raises(ProfileError):
        manifold.from_table(3, np.linspace(0, 1, 5), np.linspace(0, 1, 5))


def test_make_profile_dispatch():
    prof = manifold.make_profile("power_bump", n=4, r_max=12.0,
                                 params={"a": 1.0, "b": 1.0})
    assert prof.n == 4 and prof.name == "power_bump"
    with pytest.raises(ProfileError):
        manifold.make_profile("moebius", n=3, r_max=1.0)
    with pytest.raises(ProfileError):
        manifold.make_profile("table", n=3, r_max=1.0)
