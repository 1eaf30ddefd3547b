"""Constrained subcritical minimization and continuation toward s = p.

The discrete problem minimizes the quadratic energy u^T A u over the
constraint sum_i W_i |u_i|^s = 1, where A is the tridiagonal matrix of the
midpoint Dirichlet form plus the c(n) R_g mass.  Newton's method runs on
the Euler-Lagrange system with the multiplier appended as an unknown and
the normalization appended as an equation; each accepted step renormalizes
and resets the multiplier to the Rayleigh value, so lambda = Q_s(u) holds
to round-off throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import solve_banded

from .constants import conformal_coupling, critical_exponent
from .errors import ConvergenceError, DomainError
from .manifold import MetricProfile
from .radial import RadialField, RadialGrid, lp_norm, midpoint_weights, node_weights


# -- discrete operator -------------------------------------------------------


class DiscreteOperator:
    """Energy matrix A (tridiagonal, all nodes) and quadrature weights."""

    def __init__(self, profile: MetricProfile, grid: RadialGrid):
        if grid.j > profile.r_max * (1 + 1e-12):
            raise DomainError(
                f"grid radius {grid.j} exceeds r_max {profile.r_max}")
        self.profile = profile
        self.grid = grid
        h = grid.h
        wm = midpoint_weights(grid, profile)
        self.W = node_weights(grid, profile)
        curvature = np.asarray(profile.scalar_curvature(grid.nodes), dtype=float)
        c = conformal_coupling(profile.n)
        diag = np.zeros(grid.N + 1)
        diag[:-1] += wm / h
        diag[1:] += wm / h
        diag += self.W * c * curvature
        off = -wm / h
        self.diag, self.off = diag, off
        # Unknowns: dirichlet at the outer node always; at the inner node
        # only for annulus grids (the pole keeps its natural condition).
        self.lo = 0 if grid.is_ball else 1
        self.hi = grid.N  # exclusive

    @property
    def n_unknowns(self):
        return self.hi - self.lo

    def full_values(self, u_unknown):
        v = np.zeros(self.grid.N + 1)
        v[self.lo:self.hi] = u_unknown
        return v

    def apply(self, u_unknown):
        """A u on the unknown block (dirichlet nodes are zero)."""
        v = self.full_values(u_unknown)
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out[self.lo:self.hi]

    def energy(self, u_unknown) -> float:
        return float(u_unknown @ self.apply(u_unknown))

    def banded(self, shift_diag=None):
        """(3, m) banded form of A (+ optional diagonal shift) for LAPACK."""
        m = self.n_unknowns
        ab = np.zeros((3, m))
        ab[1] = self.diag[self.lo:self.hi]
        if shift_diag is not None:
            ab[1] = ab[1] + shift_diag
        ab[0, 1:] = self.off[self.lo:self.hi - 1]
        ab[2, :-1] = self.off[self.lo:self.hi - 1]
        return ab

    def weights(self):
        return self.W[self.lo:self.hi]

    def strong_norm(self, residual_vector) -> float:
        """Discrete L^2 norm of a residual given in weak (weighted) form.

        Nodes of zero quadrature weight (the pole) enter through the
        half-interval stiffness mass so the pole equation is not dropped.
        """
        w = self.weights().copy()
        zero = w == 0.0
        if np.any(zero):
            w[zero] = midpoint_weights(self.grid, self.profile)[0] * self.grid.h
        return float(np.sqrt(np.sum(residual_vector**2 / w)))


# -- first Dirichlet eigenpair (inverse iteration) ---------------------------


def first_eigenpair(profile: MetricProfile, grid: RadialGrid,
                    max_iters: int = 200, tol: float = 1e-13):
    """Lowest eigenpair of -Delta + c(n) R_g with dirichlet boundary.

    Shifted inverse iteration on the generalized problem A u = lam W u.
    Returns (lam, RadialField) with the eigenfield positive and
    L^2-normalized.
    """
    op = DiscreteOperator(profile, grid)
    c = conformal_coupling(profile.n)
    curvature = np.asarray(profile.scalar_curvature(grid.nodes), dtype=float)
    sigma = min(0.0, c * float(np.min(curvature))) - 1.0
    w = op.weights()
    ab = op.banded(shift_diag=-sigma * w)
    u = np.ones(op.n_unknowns)
    lam_old = np.inf
    for _ in range(max_iters):
        u = solve_banded((1, 1), ab, w * u)
        u /= float(np.sqrt(u @ (w * u))) or 1.0
        lam = op.energy(u) / float(u @ (w * u))
        if abs(lam - lam_old) < tol * max(1.0, abs(lam)):
            break
        lam_old = lam
    u = np.abs(u)
    field = RadialField(grid, op.full_values(u), boundary="dirichlet")
    norm = lp_norm(field, 2.0, profile)
    return lam, field.with_values(field.values / norm)


# -- subcritical Newton solve ------------------------------------------------


@dataclass(frozen=True)
class SubcriticalSolution:
    """Converged minimizer of Q_s on one ball/annulus."""

    field: RadialField
    lam: float
    s: float
    residual: float
    iterations: int


def _odd_power(u, q):
    """|u|^q sign(u): the odd extension of t^q, smooth enough for Newton."""
    return np.sign(u) * np.abs(u) ** q


def _projected_gradient(op: DiscreteOperator, s: float, u0, iters: int = 400):
    """Constrained descent warm-up: minimize u^T A u on the L^s sphere.

    Barzilai-Borwein steps with projection onto the nonnegative cone
    (admissible: the ground state is nonnegative).  Used to relocate a
    stalled Newton iterate, and by tests as an independent oracle.
    """
    w = op.weights()

    def normalize(u):
        norm = float(w @ u**s) ** (1.0 / s)
        return u / norm if norm > 0 and np.isfinite(norm) else None

    u = normalize(np.maximum(u0, 0.0))
    if u is None:
        raise ConvergenceError("projected gradient got a zero start",
                               last_iterate=op.full_values(np.zeros_like(u0)))
    step = 1.0 / max(1.0, float(np.max(np.abs(op.diag))))
    u_old = grad_old = None
    for _ in range(iters):
        lam = op.energy(u)
        grad = op.apply(u) - lam * w * u ** (s - 1.0)
        if u_old is not None:
            du, dg = u - u_old, grad - grad_old
            denom = float(du @ dg)
            if denom > 1e-300:
                step = float(du @ du) / denom
        u_old, grad_old = u, grad
        u_new = normalize(np.maximum(u - step * grad, 0.0))
        if u_new is None:
            return u_old
        u = u_new
    return u


def solve_subcritical(profile: MetricProfile, grid: RadialGrid, s: float,
                      init: RadialField | None = None, tol: float = 1e-10,
                      max_iters: int = 60, max_halvings: int = 20,
                      _allow_critical: bool = False) -> SubcriticalSolution:
    """Newton solve of A u = lam W |u|^{s-2} u with sum W |u|^s = 1."""
    p = critical_exponent(profile.n)
    if not (2.0 < s < p or (_allow_critical and s == p)):
        raise DomainError(f"need 2 < s < p = {p:.4f}, got s = {s}")
    op = DiscreteOperator(profile, grid)
    w = op.weights()

    if init is None:
        _, init = first_eigenpair(profile, grid)
    if init.grid != grid:
        raise DomainError("init field lives on a different grid")
    u = init.values[op.lo:op.hi].copy()
    if np.max(u) <= 0:
        raise DomainError("init must be positive in the interior")

    def normalize(vec):
        norm_s = float(w @ np.abs(vec) ** s) ** (1.0 / s)
        if norm_s == 0.0 or not np.isfinite(norm_s):
            raise ConvergenceError("iterate collapsed to zero",
                                   last_iterate=op.full_values(vec))
        return vec / norm_s

    def residual_of(vec, lam):
        return op.apply(vec) - lam * w * _odd_power(vec, s - 1.0)

    def newton_from(u):
        u = normalize(u)
        lam = op.energy(u)
        res = residual_of(u, lam)
        res_norm = op.strong_norm(res)
        iterations = 0
        for iterations in range(1, max_iters + 1):
            if res_norm <= tol:
                break
            phi = _odd_power(u, s - 1.0)
            dphi = (s - 1.0) * np.abs(u) ** (s - 2.0)
            ab = op.banded(shift_diag=-lam * w * dphi)
            rhs = np.column_stack([res, -w * phi])
            try:
                sol = solve_banded((1, 1), ab, rhs)
            except np.linalg.LinAlgError:
                ab[1] += 1e-10 * (1.0 + np.abs(ab[1]))
                sol = solve_banded((1, 1), ab, rhs)
            x_res, x_lam = sol[:, 0], sol[:, 1]
            # Bordered system: the normalization row fixes dlam.
            g_row = s * w * phi
            denom = float(g_row @ x_lam)
            g_res = float(w @ np.abs(u) ** s) - 1.0
            dlam = ((g_res - float(g_row @ x_res)) / denom) \
                if denom != 0.0 else 0.0
            du = -x_res - dlam * x_lam

            step = 1.0
            for _ in range(max_halvings + 1):
                u_try = normalize(u + step * du)
                lam_try = op.energy(u_try)
                res_try = residual_of(u_try, lam_try)
                norm_try = op.strong_norm(res_try)
                if norm_try < res_norm or step < 2.0**-max_halvings:
                    break
                step /= 2.0
            if norm_try >= res_norm and res_norm <= 1e3 * tol:
                break  # stagnation at near-roundoff residual
            u, lam, res, res_norm = u_try, lam_try, res_try, norm_try
        else:
            if res_norm > tol:
                raise ConvergenceError(
                    f"Newton did not reach tol {tol:.1e} in {max_iters} "
                    f"iterations (residual {res_norm:.3e}, s = {s})",
                    last_iterate=op.full_values(u))
        return u, lam, res_norm, iterations

    def run_restarts(u):
        # Newton may land on a sign-changing critical point (seen on wide
        # annuli); restarting from |u| pushes it toward the ground state.
        for _ in range(3):
            u, lam, res_norm, iterations = newton_from(u)
            if float(np.min(u)) >= -1e-10 * float(np.max(u)):
                return u, lam, res_norm, iterations
            u = np.abs(u)
        raise ConvergenceError(
            "converged iterate has negative nodes (grid too coarse?)",
            last_iterate=op.full_values(u))

    try:
        u, lam, res_norm, iterations = run_restarts(u)
    except ConvergenceError as exc:
        # Newton can stall between energy basins (multi-well profiles);
        # a projected-gradient descent phase relocates the iterate before
        # one retry.  A second failure is reported as-is.
        start = np.maximum(np.asarray(exc.last_iterate)[op.lo:op.hi], 0.0)
        if float(np.max(start)) <= 0.0:
            raise
        u, lam, res_norm, iterations = run_restarts(
            _projected_gradient(op, s, start))
    field = RadialField(grid, op.full_values(np.maximum(u, 0.0)),
                        boundary="dirichlet")
    return SubcriticalSolution(field=field, lam=lam, s=s,
                               residual=res_norm, iterations=iterations)


def el_residual(u: RadialField, profile: MetricProfile, lam: float,
                s: float | None = None) -> float:
    """Discrete L^2 norm of Delta u - c(n) R_g u + lam |u|^{s-2} u.

    Uses the solver's weak tridiagonal operator, so a converged solve
    reports its own Newton residual.
    """
    if u.boundary != "dirichlet":
        raise DomainError("el_residual needs a dirichlet-zero field")
    if s is None:
        s = critical_exponent(profile.n)
    op = DiscreteOperator(profile, u.grid)
    vec = u.values[op.lo:op.hi]
    res = op.apply(vec) - lam * op.weights() * _odd_power(vec, s - 1.0)
    return op.strong_norm(res)


# -- continuation to the critical exponent -----------------------------------


def default_schedule(n: int, s_start: float = 2.5, count: int = 16,
                     eps_s: float = 1e-3) -> list[float]:
    """Geometric schedule s_k -> p (1 - eps_s), increasing."""
    p = critical_exponent(n)
    if not 2.0 < s_start < p * (1 - eps_s):
        raise DomainError(f"bad schedule start {s_start}")
    if count < 3:
        raise DomainError("schedule needs >= 3 points")
    gap0, gap1 = p - s_start, p * eps_s
    ratio = (gap1 / gap0) ** (1.0 / (count - 1))
    return [p - gap0 * ratio**k for k in range(count)]


@dataclass(frozen=True)
class ContinuationResult:
    """Outcome of the schedule s -> p on one ball."""

    schedule: list
    lam_values: list
    solutions: list = dc_field(repr=False)
    y_extrapolated: float = np.nan
    q_p_witness: float = np.nan
    y_critical: float | None = None
    field: RadialField | None = dc_field(repr=False, default=None)
    concentration: bool = False
    concentration_reason: str = ""
    max_values: list = dc_field(default_factory=list)
    critical_residual: float | None = None

    @property
    def y_best(self) -> float:
        """Critical multiplier when attained; else the extrapolation; else
        the critical-quotient witness of the last field (a rigorous upper
        bound, used when the schedule broke off too early to extrapolate)."""
        if self.y_critical is not None:
            return self.y_critical
        if np.isfinite(self.y_extrapolated):
            return self.y_extrapolated
        return self.q_p_witness


def _half_max_width(field: RadialField) -> float:
    """Distance from the peak to where the field first drops below half max."""
    v, r = field.values, field.grid.nodes
    k = int(np.argmax(v))
    below = np.nonzero(v[k:] < 0.5 * v[k])[0]
    if len(below) == 0:
        return r[-1] - r[k]
    return r[k + below[0]] - r[k]


def continue_to_critical(profile: MetricProfile, grid: RadialGrid,
                         schedule: list[float] | None = None,
                         eps_s: float = 1e-3, s_start: float = 2.5,
                         count: int = 16, tol: float = 1e-10,
                         max_iters: int = 60,
                         concentration_cap: float = 1e3,
                         min_halfwidth_nodes: int = 4,
                         critical_polish: bool = True) -> ContinuationResult:
    """Warm-started solves along the schedule, then a critical polish.

    Concentration is declared when the running maximum exceeds
    ``concentration_cap`` times the initial maximum, or when the minimizer
    narrows to a grid-scale spike (half-max width below
    ``min_halfwidth_nodes`` grid cells) that the discretization can no
    longer represent.  On concentration the partial results are returned
    with the flag set; this is the expected exit on flat balls.
    """
    p = critical_exponent(profile.n)
    if schedule is None:
        schedule = default_schedule(profile.n, s_start=s_start, count=count,
                                    eps_s=eps_s)
    if list(schedule) != sorted(schedule) or schedule[-1] >= p:
        raise DomainError("schedule must increase and stay below p")

    _, init = first_eigenpair(profile, grid)
    initial_max = float(np.max(init.values)) / lpn(init, schedule[0], profile)
    solutions, lam_values, max_values = [], [], []
    concentration, reason = False, ""
    current = init
    for s in schedule:
        try:
            sol = solve_subcritical(profile, grid, s, init=current,
                                    tol=tol, max_iters=max_iters)
        except ConvergenceError as exc:
            concentration = True
            reason = f"solver failure at s = {s:.6f}: {exc}"
            break
        solutions.append(sol)
        lam_values.append(sol.lam)
        peak = float(np.max(sol.field.values))
        max_values.append(peak)
        if peak > concentration_cap * initial_max:
            concentration, reason = True, (
                f"max u = {peak:.3g} exceeded cap x initial max at s = {s:.6f}")
            break
        if _half_max_width(sol.field) < min_halfwidth_nodes * grid.h:
            concentration, reason = True, (
                f"minimizer narrowed to a grid-scale spike at s = {s:.6f}")
            break
        current = sol.field

    # Extrapolation is only meaningful when the schedule got close to p;
    # a low-s lambda is a gross underestimate of Y, never a stand-in.
    if len(lam_values) >= 3 and p - solutions[-1].s <= 0.2 * (p - 2.0):
        gaps = p - np.asarray([sol.s for sol in solutions[-3:]])
        coeffs = np.polyfit(gaps, lam_values[-3:], 1)
        y_extrapolated = float(coeffs[1])
    else:
        y_extrapolated = np.nan

    q_p_witness = np.nan
    final_field = None
    y_critical = None
    critical_residual = None
    if solutions:
        from .radial import yamabe_energy  # local to avoid cycle at import
        last = solutions[-1].field
        q_p_witness = yamabe_energy(last, profile) / lpn(last, p, profile) ** 2
        final_field = last.with_values(last.values / lpn(last, p, profile))
    if solutions and not concentration and critical_polish:
        try:
            crit = solve_subcritical(profile, grid, p, init=solutions[-1].field,
                                     tol=tol, max_iters=max_iters,
                                     _allow_critical=True)
            peak = float(np.max(crit.field.values))
            if peak > concentration_cap * initial_max or \
                    _half_max_width(crit.field) < min_halfwidth_nodes * grid.h:
                concentration, reason = True, "critical polish concentrated"
            else:
                y_critical = crit.lam
                final_field = crit.field
                critical_residual = crit.residual
        except ConvergenceError as exc:
            concentration, reason = True, f"critical polish failed: {exc}"

    return ContinuationResult(
        schedule=[float(s) for s in schedule[:len(lam_values)]],
        lam_values=[float(v) for v in lam_values],
        solutions=solutions,
        y_extrapolated=y_extrapolated,
        q_p_witness=float(q_p_witness),
        y_critical=y_critical,
        field=final_field,
        concentration=concentration,
        concentration_reason=reason,
        max_values=[float(m) for m in max_values],
        critical_residual=critical_residual,
    )


def lpn(u: RadialField, s: float, profile: MetricProfile) -> float:
    """Shorthand for lp_norm used by the continuation bookkeeping."""
    return lp_norm(u, s, profile)
