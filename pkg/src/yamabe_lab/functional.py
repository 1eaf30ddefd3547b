"""Yamabe quotients: the Sobolev constant, Aubin bubbles, exterior domains.

Bubbles are centered at the pole, where the warped metric is exactly
radial, so every quantity is a one-dimensional quadrature with no
normal-coordinate approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import (area_weight, conformal_coupling, critical_exponent,
                        sphere_volume)
from .errors import DomainError, GridResolutionError, StabilizationError
from .manifold import MetricProfile
from .radial import RadialField, RadialGrid, lp_norm, yamabe_energy


def lambda_constant(n: int) -> float:
    """Best Sobolev constant on R^n: n(n-2)/4 * omega_n^{2/n}."""
    if n < 3:
        raise DomainError(f"dimension must be >= 3, got {n}")
    return n * (n - 2) / 4.0 * sphere_volume(n) ** (2.0 / n)


@dataclass(frozen=True)
class QuotientReport:
    """One evaluated quotient Q_s = E / ||.||_s^2."""

    domain: str
    s: float
    energy: float
    norm: float
    quotient: float

    def to_dict(self):
        return {"domain": self.domain, "s": self.s, "energy": self.energy,
                "norm": self.norm, "quotient": self.quotient}


@dataclass(frozen=True)
class BubbleSpec:
    """Aubin-bubble test function data: scale alpha, cutoff radius eps."""

    alpha: float
    eps: float

    def __post_init__(self):
        if not 0 < self.alpha <= self.eps:
            raise DomainError(
                f"need 0 < alpha <= eps, got alpha={self.alpha}, eps={self.eps}")


def bubble_values(n: int, alpha: float, r) -> np.ndarray:
    """u_alpha(r) = (alpha / (alpha^2 + r^2))^{(n-2)/2}."""
    r = np.asarray(r, dtype=float)
    return (alpha / (alpha**2 + r**2)) ** ((n - 2) / 2.0)


def _cutoff(r, eps):
    """C^1 radial cutoff: 1 on [0, eps], 0 beyond 2 eps."""
    r = np.asarray(r, dtype=float)
    t = np.clip((r - eps) / eps, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(math.pi * t))


# Nodes required inside r <= alpha for the quotient to be trusted.
_MIN_NODES_IN_ALPHA = 16


def bubble_quotient(profile: MetricProfile, spec: BubbleSpec,
                    s: float | None = None, N: int | None = None,
                    oversample: int = 64) -> QuotientReport:
    """Q_s of the cut-off bubble eta u_alpha centered at the pole."""
    if 2.0 * spec.eps > profile.r_max:
        raise DomainError(
            f"cutoff support 2 eps = {2 * spec.eps} exceeds r_max")
    if s is None:
        s = critical_exponent(profile.n)
    r_out = 2.0 * spec.eps
    required = int(math.ceil(_MIN_NODES_IN_ALPHA * r_out / spec.alpha))
    if N is None:
        N = max(4096, int(math.ceil(oversample * r_out / spec.alpha)))
    elif N < required:
        raise GridResolutionError(
            f"N = {N} leaves fewer than {_MIN_NODES_IN_ALPHA} nodes inside "
            f"r <= alpha; need N >= {required}", required_n=required)
    grid = RadialGrid(j=r_out, N=N)
    phi = _cutoff(grid.nodes, spec.eps) * bubble_values(profile.n, spec.alpha,
                                                        grid.nodes)
    phi[-1] = 0.0
    field = RadialField(grid, phi, boundary="dirichlet")
    energy = yamabe_energy(field, profile)
    norm = lp_norm(field, s, profile)
    return QuotientReport(domain=f"ball:{r_out:g}", s=float(s),
                          energy=energy, norm=norm,
                          quotient=energy / norm**2)


@dataclass(frozen=True)
class ExteriorEstimate:
    """Stabilized Y(M \\ B_{r_in}) estimate."""

    value: float
    r_in: float
    r_out: float
    s: float
    stabilized: bool
    history: tuple

    def to_dict(self):
        return {"value": self.value, "r_in": self.r_in, "r_out": self.r_out,
                "s": self.s, "stabilized": self.stabilized,
                "history": list(self.history)}


def cylinder_length(profile: MetricProfile, r_in: float, r_out: float) -> float:
    """Conformal cylinder length of the annulus: S = int_{r_in}^{r_out} dr/f."""
    if not 0 < r_in < r_out <= profile.r_max:
        raise DomainError(
            f"need 0 < r_in < r_out <= r_max, got [{r_in}, {r_out}]")
    from scipy.integrate import quad
    value, _ = quad(lambda t: 1.0 / float(profile.f(t)), r_in, r_out,
                    limit=200)
    return float(value)


# Cylinder-gauge pseudo-profile: f == 1 (round unit cross-section) on the
# working range s >= _CYL_OFFSET; the linear stub near 0 only satisfies
# the profile axioms and is never sampled.
_CYL_OFFSET = 2.0


def _cylinder_profile(n: int, s_max: float) -> MetricProfile:
    return MetricProfile(
        n=n, r_max=s_max, name="cylinder-gauge", params={},
        f=lambda s: np.minimum(np.asarray(s, dtype=float), 1.0),
        f_prime=lambda s: (np.asarray(s, dtype=float) < 1.0).astype(float),
        f_second=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        c3=0.0)


def exterior_quotient(profile: MetricProfile, r_in: float,
                      R_out: float | None = None, tol_out: float = 1e-3,
                      nodes_per_unit: int = 64, growth: float = 1.5,
                      max_steps: int = 48, length_cap: float = 25.0,
                      solver_tol: float = 1e-10) -> ExteriorEstimate:
    """Estimate the Yamabe constant of the annular exterior of B_{r_in}.

    The critical quotient over radial fields on the annulus [r_in, R_out]
    is conformally invariant, and the annulus is conformal to the product
    cylinder segment of length S = int dr/f.  Minimizing in the cylinder
    gauge keeps the optimizer at unit scale regardless of how stretched
    the annulus is in r, which direct r-space grids cannot afford.  Each
    segment runs the warm-started subcritical continuation; R_out grows
    geometrically until the value changes by less than ``tol_out``
    (relative).  Hitting r_max first raises StabilizationError.

    Segments longer than ``length_cap`` are truncated to it: the value is
    monotone decreasing and exponentially converged in the length by
    then, while much longer cylinders make the Newton solve nearly
    translation-degenerate.  Truncation keeps the estimate a rigorous
    upper bound (Dirichlet fields on the truncated segment embed in the
    full one).
    """
    from .subcritical import continue_to_critical

    p = critical_exponent(profile.n)
    if R_out is None:
        R_out = min(profile.r_max, max(2.0 * r_in, r_in + 4.0))
    if not 0 < r_in < R_out <= profile.r_max:
        raise DomainError(
            f"need 0 < r_in < R_out <= r_max, got [{r_in}, {R_out}]")
    history = []
    value = None
    r_out = R_out
    for _ in range(max_steps):
        length = min(cylinder_length(profile, r_in, r_out), length_cap)
        s_hi = _CYL_OFFSET + length
        cyl = _cylinder_profile(profile.n, s_hi)
        N = max(64, int(math.ceil(nodes_per_unit * length)))
        grid = RadialGrid(j=s_hi, N=N, r_lo=_CYL_OFFSET)
        result = continue_to_critical(cyl, grid, tol=solver_tol,
                                      critical_polish=False)
        lam = result.y_best
        history.append((r_out, lam))
        if value is not None and abs(lam - value) <= tol_out * abs(value):
            return ExteriorEstimate(value=lam, r_in=r_in, r_out=r_out,
                                    s=float(p), stabilized=True,
                                    history=tuple(history))
        value = lam
        next_r = r_in + (r_out - r_in) * growth
        if next_r > profile.r_max:
            break
        r_out = next_r
    raise StabilizationError(
        f"exterior quotient did not stabilize before r_max = {profile.r_max} "
        f"(r_in = {r_in}; history = {history})")


class ScalarLowerBound(NamedTuple):
    """-c(n) ||(R_g)_-||_{L^{n/2}} with a divergence flag for infinite tails."""

    value: float | None
    divergent: bool


def scalar_lower_bound(profile: MetricProfile, R_out: float | None = None,
                       samples: int = 16384) -> ScalarLowerBound:
    """Lower bound of Lemma-type: nonpositive, 0 when R_g >= 0."""
    if R_out is None:
        R_out = profile.r_max
    profile.check_radius(R_out)
    n = profile.n
    r = np.linspace(0.0, R_out, samples)
    curvature = np.asarray(profile.scalar_curvature(r), dtype=float)
    negative = np.maximum(-curvature, 0.0)
    fvals = np.asarray(profile.f(r), dtype=float)
    integrand = negative ** (n / 2.0) * fvals ** (n - 1)
    total = area_weight(n) * float(np.trapezoid(integrand, r))
    if total == 0.0:
        return ScalarLowerBound(value=0.0, divergent=False)
    # Tail monitor: the outer decade must decay and contribute little.
    k_tail = int(0.9 * samples)
    tail = area_weight(n) * float(np.trapezoid(integrand[k_tail:], r[k_tail:]))
    growing = integrand[-1] >= integrand[k_tail] and integrand[-1] > 0
    if growing or tail > 0.05 * total:
        return ScalarLowerBound(value=None, divergent=True)
    return ScalarLowerBound(
        value=-conformal_coupling(n) * total ** (2.0 / n), divergent=False)


def quotient_of(field: RadialField, profile: MetricProfile,
                s: float | None = None, domain: str = "") -> QuotientReport:
    """QuotientReport for an explicit dirichlet field."""
    if s is None:
        s = critical_exponent(profile.n)
    energy = yamabe_energy(field, profile)
    norm = lp_norm(field, s, profile)
    return QuotientReport(domain=domain or f"ball:{field.grid.j:g}",
                          s=float(s), energy=energy, norm=norm,
                          quotient=energy / norm**2)
