"""Exhaustion pipeline: traces, extension by zero, exponents, verdicts."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamabe_lab import manifold
from yamabe_lab.errors import (DomainError, InfeasibleExponentError,
                               MonotonicityError)
from yamabe_lab.exhaustion import (BallRecord, ExhaustionTrace, beta0_select,
                                   boundary_bound, concentration_verdict,
                                   decay_fit, exponent_formulas,
                                   fit_tail_exponent, k_normalize, load_trace,
                                   run_exhaustion, save_trace,
                                   subsolution_check)
from yamabe_lab.functional import lambda_constant
from yamabe_lab.radial import RadialField, RadialGrid


# -- run_exhaustion ----------------------------------------------------------


def test_flat_trace_shape(flat_trace):
    assert flat_trace.radii == (2.0, 4.0, 8.0)
    assert len(flat_trace.records) == 3
    assert flat_trace.largest.j == 8.0
    lam = lambda_constant(3)
    for rec in flat_trace.records:
        assert rec.y == pytest.approx(lam, rel=0.05)
    with pytest.raises(DomainError):
        flat_trace.record_for(16.0)


def test_exhaustion_input_validation(flat_profile):
    with pytest.raises(DomainError):
        run_exhaustion(flat_profile, (2.0, 4.0))          # too few
    with pytest.raises(DomainError):
        run_exhaustion(flat_profile, (4.0, 2.0, 8.0))     # not increasing
    small = manifold.euclidean(3, r_max=6.0)
    with pytest.raises(DomainError):
        run_exhaustion(small, (2.0, 4.0, 8.0))            # exceeds r_max


def test_monotonicity_tripwire(flat_profile):
    # A zero tolerance must trip on the ~1% method noise of a constant
    # sequence; the default 2% must not (covered by the flat fixture).
    with pytest.raises(MonotonicityError):
        run_exhaustion(flat_profile, (2.0, 4.0, 8.0), nodes_per_unit=64,
                       tol_mono_rel=0.0)


# -- subsolution check -------------------------------------------------------


def test_subsolution_extension_passes(flat_profile, flat_trace):
    rep = subsolution_check(flat_trace, 4.0, flat_profile)
    assert rep.passed
    assert rep.max_violation <= rep.tol


def test_subsolution_detects_fake_multiplier(flat_profile, flat_trace):
    # Lowering the solved multiplier makes u_j fail the weak inequality:
    # the check must notice a corrupted record.
    rec = flat_trace.record_for(4.0)
    fake = dataclasses.replace(
        rec, lam_schedule=rec.lam_schedule[:-1] + (rec.lam_schedule[-1] * 0.5,))
    records = tuple(fake if r.j == 4.0 else r for r in flat_trace.records)
    doctored = dataclasses.replace(flat_trace, records=records)
    rep = subsolution_check(doctored, 4.0, flat_profile)
    assert not rep.passed


def test_subsolution_respects_r_max(flat_trace):
    small = manifold.euclidean(3, r_max=10.0)
    with pytest.raises(DomainError):
        subsolution_check(flat_trace, 8.0, small)  # extension needs 16


# -- exponent formulas -------------------------------------------------------


def test_beta0_select_values():
    # [DERIVED] sqrt(1/c0y) capped at n/(n-2).
    assert beta0_select(3, 0.25) == pytest.approx(2.0, rel=1e-9)
    assert beta0_select(3, 0.04) == pytest.approx(3.0, rel=1e-8)  # capped
    assert beta0_select(4, -1.0) == pytest.approx(2.0, rel=1e-8)  # Y <= 0
    assert beta0_select(3, 0.5, eps=0.5) == pytest.approx(1.0, abs=1e-9)


def test_beta0_select_guards():
    with pytest.raises(InfeasibleExponentError) as err:
        beta0_select(3, 1.0)
    assert "margin exhausted" in str(err.value)
    with pytest.raises(DomainError):
        beta0_select(3, 0.5, eps=1.5)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 8), c0y=st.floats(1e-6, 0.95))
def test_beta0_always_admissible(n, c0y):
    eps = 0.01
    beta0 = beta0_select(n, c0y, eps=eps)
    assert 1.0 < beta0 < n / (n - 2)
    # the defining admissibility condition holds strictly under the slack
    assert (beta0**2 + eps) * c0y < 1.0


_FIXTURES = [
    # (n, Y, Y_inf, rho) -> (beta0, rho0, delta, alpha) [DERIVED] from the
    # closed forms evaluated by hand:
    #   Y > 0: beta0 = min(sqrt(Y_inf/Y), n/(n-2)^-),
    #          rho0 = min(n sqrt(Y_inf/Y) - n, 2n/(n-2)),
    #          alpha = (n-2)/2 - (n-2) rho / (2 n (beta0 - 1))
    #   Y <= 0: beta0 = n/(n-2)^-, rho0 = 2n/(n-2),
    #          alpha = (n-2)(2n - rho(n-2)) / (4n)
    #   delta = (n-2) beta0 / (n beta0 - 2)
    ((3, 1.0, 4.0, 0.0), (2.0, 3.0, 0.5, 0.5)),
    ((4, 2.0, 8.0, 1.0), (2.0, 4.0, 2.0 / 3.0, 0.75)),
    ((3, -2.0, 5.0, 0.0), (3.0, 6.0, 3.0 / 7.0, 0.5)),
    ((5, 1.0, 2.0, 1.0),
     (math.sqrt(2.0), 5.0 * math.sqrt(2.0) - 5.0,
      3.0 * math.sqrt(2.0) / (5.0 * math.sqrt(2.0) - 2.0),
      1.5 - 3.0 / (10.0 * (math.sqrt(2.0) - 1.0)))),
    ((4, 0.0, 3.0, -2.0), (2.0, 4.0, 2.0 / 3.0, 1.5)),
]


@pytest.mark.parametrize("args,expected", _FIXTURES)
def test_exponent_fixtures(args, expected):
    # rel 1e-6 absorbs the strict-inequality guard on the beta0 cap.
    rep = exponent_formulas(*args)
    beta0, rho0, delta, alpha = expected
    assert rep.beta0 == pytest.approx(beta0, rel=1e-6)
    assert rep.rho0 == pytest.approx(rho0, rel=1e-6)
    assert rep.delta == pytest.approx(delta, rel=1e-6)
    assert rep.alpha_predicted == pytest.approx(alpha, rel=1e-6)


def test_exponent_hypothesis_errors_are_named():
    with pytest.raises(InfeasibleExponentError, match="Y_inf > 0"):
        exponent_formulas(3, -1.0, -0.5, 0.0)
    with pytest.raises(InfeasibleExponentError, match="Y < Y_inf"):
        exponent_formulas(3, 4.0, 4.0, 0.0)
    with pytest.raises(InfeasibleExponentError, match="rho < rho_0"):
        exponent_formulas(3, 1.0, 4.0, 3.5)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 6), y=st.floats(-5.0, 5.0),
       ratio=st.floats(1.01, 50.0), rho_frac=st.floats(0.0, 0.99))
def test_exponent_invariants(n, y, ratio, rho_frac):
    # Whenever the hypotheses hold the report is internally consistent:
    # beta0 and delta in range, rho < rho0, alpha below (n-2)/2 + the
    # negative-growth correction.
    y_inf = abs(y) * ratio + 0.1
    if y >= y_inf:
        return
    rho0_probe = exponent_formulas(n, y, y_inf, 0.0).rho0
    rho = rho_frac * rho0_probe
    rep = exponent_formulas(n, y, y_inf, rho)
    assert 1.0 < rep.beta0 < n / (n - 2)
    assert 0.0 < rep.delta < 1.0
    assert rep.rho < rep.rho0
    if rho >= 0.0:
        assert rep.alpha_predicted <= (n - 2) / 2.0 + 1e-12


# -- decay fits --------------------------------------------------------------


def _synthetic_trace(alpha=0.5, j=8.0, n=3):
    grid = RadialGrid(j=j, N=512)
    vals = (1.0 + grid.nodes) ** -alpha * (1.0 - grid.nodes / j)
    vals[-1] = 0.0
    field = RadialField(grid, vals, boundary="dirichlet")
    rec = BallRecord(j=j, y=1.0, y_extrapolated=1.0, y_critical=None,
                     field=field, max_value=float(vals.max()),
                     max_radius=0.0, boundary_max=float(vals[-2]))
    return ExhaustionTrace(profile_name="synthetic", n=n, radii=(j,),
                           records=(rec,), tol_mono=0.0)


def test_fit_tail_exponent_exact_power_law():
    grid = RadialGrid(j=8.0, N=512)
    field = RadialField(grid, grid.nodes.clip(1e-9) ** -0.5, boundary="free")
    alpha, rms, count = fit_tail_exponent(field, 2.0, 7.0)
    assert alpha == pytest.approx(0.5, abs=1e-10)
    assert rms < 1e-10
    assert count >= 10


def test_fit_tail_exponent_window_guard():
    grid = RadialGrid(j=8.0, N=512)
    field = RadialField(grid, np.full(513, -1.0), boundary="free")
    with pytest.raises(DomainError):
        fit_tail_exponent(field, 2.0, 7.0)  # no positive nodes


def test_decay_fit_on_synthetic_trace():
    fit = decay_fit(_synthetic_trace(alpha=0.5), window_frac=0.25,
                    window_hi=0.5, alpha_predicted=0.4)
    # The cutoff factor steepens the measured decay slightly; the
    # one-sided comparison passes.
    assert fit.alpha_fitted >= 0.5
    assert fit.passed
    strict = decay_fit(_synthetic_trace(alpha=0.1), window_frac=0.25,
                       window_hi=0.5, alpha_predicted=2.0)
    assert not strict.passed


def test_decay_fit_window_validation():
    with pytest.raises(DomainError):
        decay_fit(_synthetic_trace(), window_frac=0.9, window_hi=0.5)


# -- boundary bound ----------------------------------------------------------


def _trace_with_boundary(values):
    recs = []
    for k, bmax in enumerate(values):
        grid = RadialGrid(j=float(k + 2), N=64)
        vals = np.zeros(65)
        field = RadialField(grid, vals, boundary="dirichlet")
        recs.append(BallRecord(j=float(k + 2), y=1.0, y_extrapolated=1.0,
                               y_critical=None, field=field,
                               max_value=1.0, max_radius=0.0,
                               boundary_max=bmax))
    return ExhaustionTrace(profile_name="synthetic", n=3,
                           radii=tuple(float(k + 2) for k in range(len(values))),
                           records=tuple(recs), tol_mono=0.0)


def test_boundary_bound_floor_pass():
    rep = boundary_bound(_trace_with_boundary([1e-3, 1e-4, 1e-6, 1e-9]))
    assert rep.passed and rep.ratio == 1.0


def test_boundary_bound_ratio_fail():
    rep = boundary_bound(_trace_with_boundary([0.5, 0.5, 0.2, 0.9]))
    assert not rep.passed
    assert rep.ratio == pytest.approx(4.5)


def test_boundary_bound_stable_pass():
    rep = boundary_bound(_trace_with_boundary([0.5, 0.4, 0.35, 0.4]))
    assert rep.passed


# -- verdicts ----------------------------------------------------------------


def _verdict_trace(sups, concentration=False, max_radius=0.0):
    recs = []
    for k, sup in enumerate(sups):
        j = float(2 ** (k + 1))
        grid = RadialGrid(j=j, N=64)
        vals = sup * np.exp(-grid.nodes)
        vals[-1] = 0.0
        field = RadialField(grid, vals, boundary="dirichlet")
        last = k == len(sups) - 1
        recs.append(BallRecord(
            j=j, y=1.0, y_extrapolated=1.0, y_critical=None, field=field,
            max_value=sup, max_radius=max_radius if last else 0.0,
            boundary_max=0.0, concentration=concentration and last,
            concentration_reason="synthetic" if concentration and last
            else ""))
    return ExhaustionTrace(profile_name="synthetic", n=3,
                           radii=tuple(r.j for r in recs),
                           records=tuple(recs), tol_mono=0.0)


def test_verdict_converges_positive():
    v = concentration_verdict(_verdict_trace([1.0, 1.05, 0.98]), R=1.0)
    assert v.kind == "converges-positive"


def test_verdict_escapes_by_trend():
    v = concentration_verdict(_verdict_trace([1.0, 0.2, 0.01]), R=1.0)
    assert v.kind == "escapes"


def test_verdict_concentrates_by_trend():
    v = concentration_verdict(_verdict_trace([1.0, 10.0, 100.0]), R=1.0)
    assert v.kind == "concentrates"


def test_verdict_inconclusive():
    v = concentration_verdict(_verdict_trace([1.0, 20.0, 0.01]), R=1.0)
    assert v.kind == "inconclusive"


def test_verdict_concentration_flag_inside():
    v = concentration_verdict(_verdict_trace([1.0, 1.0, 1.0],
                                             concentration=True,
                                             max_radius=0.5), R=1.0)
    assert v.kind == "concentrates"


def test_verdict_concentration_flag_outside_escapes():
    v = concentration_verdict(_verdict_trace([1.0, 1.0, 1.0],
                                             concentration=True,
                                             max_radius=7.5), R=1.0)
    assert v.kind == "escapes"


def test_verdict_validation():
    with pytest.raises(DomainError):
        concentration_verdict(_verdict_trace([1.0, 1.0, 1.0]), R=3.0)


def test_flat_verdict_concentrates(flat_trace):
    v = concentration_verdict(flat_trace, R=1.0)
    assert v.kind == "concentrates"


# -- serialization and normalization -----------------------------------------


def test_trace_roundtrip(tmp_path, flat_trace):
    path = save_trace(flat_trace, tmp_path)
    back = load_trace(path)
    assert back.radii == flat_trace.radii
    assert back.n == flat_trace.n
    for a, b in zip(back.records, flat_trace.records):
        assert a.j == b.j
        assert a.y == b.y  # exact: repr round-trip via JSON
        assert np.array_equal(a.field.values, b.field.values)
        assert a.lam_schedule == b.lam_schedule
    # loading by directory works too
    assert load_trace(tmp_path).radii == flat_trace.radii


def test_k_normalize_scaling():
    grid = RadialGrid(j=1.0, N=64)
    vals = np.linspace(1.0, 0.0, 65)
    field = RadialField(grid, vals, boundary="free")
    scaled, K = k_normalize(field, 16.0, 3)
    assert K == 1
    # |Y|^{1/(p-2)} with p = 6: 16^{1/4} = 2
    assert np.allclose(scaled.values, 2.0 * vals)
    same, K0 = k_normalize(field, 0.0, 3)
    assert K0 == 0 and same is field
    neg, Km = k_normalize(field, -16.0, 3)
    assert Km == -1 and np.allclose(neg.values, 2.0 * vals)
