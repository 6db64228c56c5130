"""Minimization of the subcritical functional and blow-up diagnostics.

For rho = rho_bar - eps the functional is coercive and has a minimizer.
The iteration is a damped, spectrally preconditioned fixed point: with the
current normalized iterate u,

    solve  -Delta w = rho (h e^u / int h e^u - 1/4pi)   (spectral inverse),
    step   u <- u + tau (w + mean(u) - u),  backtracking on J,
    renormalize so that int h e^u = 1.

The fixed point solves the Euler-Lagrange equation; the residual used for
the stopping test is the exact gradient of the discrete functional, so the
backtracking line search always finds descent away from the minimizer.

As eps decreases with a singular weight of negative minimal order, the
minimizers concentrate: lambda_eps = max u grows, the concentration scale
t_eps = exp(-lambda_eps/(2(1+alpha))) shrinks, the rescaled profile
collapses onto the planar bubble, and the mass rho_eps h e^u concentrates
at the minimal-order point while u - mean(u) approaches rho_bar G_p away
from it.  ``diagnose`` measures all of this; ``epsilon_sweep`` drives a
warm-started schedule and Richardson-extrapolates the functional values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .sphere_grid import (
    FOUR_PI,
    ProductTransform,
    ScalarField,
    SHCoefficients,
    SphereGrid,
    gradient_at_angles,
    integrate,
    phi_derivative,
    sh_analysis,
    synthesis_at_angles,
)
from .singular_geometry import SingularWeight
from .mt_functional import (
    DEFAULT_CEILING,
    FunctionalParams,
    SingularCapRule,
    UnnormalizedBlowupError,
    cap_radial_rule,
    eval_J_coeffs,
    integrator_for,
    _orthonormal_frame,
)
from .closed_forms import (ConcentrationParams, concentration_field,
                           planar_bubble)


class NonConvergedError(RuntimeError):
    """A sweep entry failed to converge; the whole sweep is flagged."""


class InsufficientAnnulusError(ValueError):
    """The gradient-exponent fit annulus contains no usable radii."""


@dataclass
class SolverConfig:
    epsilon_schedule: tuple = (0.5, 0.2, 0.1, 0.05)
    max_iterations: int = 4000
    damping: float = 0.5
    tol_factor: float = 1.0e-6     # convergence at ||residual|| <= tol_factor*rho
    ceiling: float = DEFAULT_CEILING
    backtrack_max: int = 40
    init: str = "test-function"    # first sweep entry: "zero" | "test-function"
    init_epsilon: float = 0.01     # epsilon of the seeding test function

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_schedule)
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon schedule must be strictly decreasing")
        if any(e <= 0.0 for e in eps):
            raise ValueError("epsilon schedule must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        self.epsilon_schedule = eps


@dataclass
class MinimizerState:
    u: ScalarField
    coeffs: SHCoefficients
    params: FunctionalParams
    epsilon: float
    J: float
    residual_norm: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)

    @property
    def rho(self) -> float:
        return self.params.rho


def _normalize(coeffs: SHCoefficients, integ) -> SHCoefficients:
    """Shift by a constant so that int h e^u = 1."""
    log_e = integ.log_exp_integral(coeffs)
    return coeffs.shifted(-log_e)


def minimize(params: FunctionalParams, config: SolverConfig,
             init: ScalarField, grid: Optional[SphereGrid] = None) -> MinimizerState:
    """Minimize J_rho by preconditioned descent; returns a normalized state."""
    if params.rho > params.weight.rho_bar + 1.0e-12:
        raise ValueError(
            f"rho = {params.rho:.6g} exceeds the critical value "
            f"{params.weight.rho_bar:.6g}; supercritical minimization is "
            "out of scope")
    grid = grid or init.grid
    integ = integrator_for(grid, params.weight, params.rule)
    L = grid.band_limit
    lw = np.arange(L + 1, dtype=float)
    lw = lw * (lw + 1.0)
    tol = config.tol_factor * params.rho

    a = _normalize(sh_analysis(init), integ)
    J = eval_J_coeffs(a, params, grid)
    trace = []
    converged = False
    iterations = 0
    rnorm = np.inf

    tau = config.damping
    for it in range(config.max_iterations):
        iterations = it
        lam = integ.field_peak(a)
        if lam > config.ceiling:
            raise UnnormalizedBlowupError(
                f"max(u) = {lam:.3g} exceeded the ceiling during minimization")
        proj, total, _ = integ.density_projection(a)
        resid = lw[:, None] * a.values - (params.rho / total) * proj.values
        resid[0, :] = 0.0
        rnorm = float(np.sqrt(np.sum(resid * resid)))
        trace.append({"iteration": it, "J": J, "residual": rnorm, "lambda": lam})
        if rnorm <= tol:
            converged = True
            break

        # preconditioned direction: w solves -Delta w = rho(h e^u/E - 1/4pi)
        direction = np.zeros_like(a.values)
        direction[1:] = (params.rho / total) * proj.values[1:] / lw[1:, None] \
            - a.values[1:]
        step = tau
        accepted = False
        for _ in range(config.backtrack_max):
            cand = SHCoefficients(a.values + step * direction)
            cand = _normalize(cand, integ)
            J_cand = eval_J_coeffs(cand, params, grid)
            if J_cand <= J + 1.0e-12:
                a, J = cand, J_cand
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # stalled: J can no longer decrease along the direction
        # adapt the damping: grow on clean acceptance, shrink after backtracks
        tau = min(1.0, 1.25 * step) if step == tau else max(step, 0.05)

    u = ScalarField(grid.transform.synthesis_values(a), grid)
    return MinimizerState(u=u, coeffs=a, params=params,
                          epsilon=params.weight.rho_bar - params.rho,
                          J=J, residual_norm=rnorm, iterations=iterations,
                          converged=converged, trace=trace)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def cap_density_integral(state: MinimizerState, center: np.ndarray,
                         radius: float, n_radial: int | None = None,
                         n_angular: int = 32) -> float:
    """int_{B_radius(center)} h e^u by polar quadrature (u normalized)."""
    w = state.params.weight
    grid = state.u.grid
    if radius >= np.pi - 0.2:
        raise ValueError("cap radius too large for the polar rule")
    alpha_c = w.beta(center)
    n_radial = n_radial or max(48, int(radius * grid.band_limit) + 16)
    r, wr = cap_radial_rule(alpha_c, radius, n_radial)
    psi = 2.0 * np.pi * np.arange(n_angular) / n_angular
    e1, e2 = _orthonormal_frame(np.asarray(center, dtype=float))
    rr, pp = np.meshgrid(r, psi, indexing="ij")
    pts = (np.sin(rr)[..., None] * (np.cos(pp)[..., None] * e1
                                    + np.sin(pp)[..., None] * e2)
           + np.cos(rr)[..., None] * np.asarray(center, dtype=float))
    log_h = np.zeros(rr.shape)
    for sp in w.points:
        d = float(np.arccos(np.clip(sp.position @ np.asarray(center), -1, 1)))
        if d < 1.0e-12:
            one_minus = 2.0 * np.sin(0.5 * rr) ** 2
        else:
            one_minus = 1.0 - pts @ sp.position
        log_h += sp.order * (np.log(one_minus) + 1.0 - np.log(2.0))
    if w.K is not None:
        log_h += np.log(w.smooth_factor(pts))
    t = np.clip(pts[..., 2], -1.0, 1.0).reshape(-1)
    ph = np.arctan2(pts[..., 1], pts[..., 0]).reshape(-1)
    u_vals = synthesis_at_angles(state.coeffs, t, ph).reshape(rr.shape)
    wgt = (wr * 2.0 * np.pi / n_angular)[:, None]
    return float(np.sum(wgt * np.exp(log_h + u_vals)))


@dataclass
class BlowupDiagnostics:
    lambda_eps: float
    p_eps: np.ndarray
    center: np.ndarray
    t_eps: float
    cap_masses: dict
    profile_error: float
    farfield_error: float
    mean_decay: float
    grad_l15: float
    compact_case: bool
    under_resolved: bool

    def cap_mass_fraction(self, radius_key) -> float:
        return self.cap_masses[radius_key]


def gradient_magnitude_grid(coeffs: SHCoefficients, grid: SphereGrid,
                            fd_step: float = 1.0e-5) -> np.ndarray:
    """|grad u| on the grid nodes (spectral phi derivative, FD in theta)."""
    theta = np.arccos(grid.t)
    up = ProductTransform(grid.band_limit, np.cos(theta + fd_step), grid.phi,
                          None).synthesis_values(coeffs)
    dn = ProductTransform(grid.band_limit, np.cos(theta - fd_step), grid.phi,
                          None).synthesis_values(coeffs)
    du_dtheta = (up - dn) / (2.0 * fd_step)
    dphi = grid.transform.synthesis_values(phi_derivative(coeffs))
    sin_theta = np.sqrt(1.0 - grid.t**2)[:, None]
    return np.sqrt(du_dtheta**2 + (dphi / sin_theta) ** 2)


def diagnose(state: MinimizerState, w: SingularWeight,
             profile_R: float = 5.0, farfield_delta: float = 1.0,
             cap_radii: tuple = ()) -> BlowupDiagnostics:
    """Populate the concentration diagnostics of a converged state."""
    grid = state.u.grid
    alpha = w.alpha

    # peak over grid nodes and the singular points themselves
    vals = state.u.values
    idx = np.unravel_index(np.argmax(vals), vals.shape)
    lam = float(vals[idx])
    p_eps = grid.nodes[idx]
    for sp in w.minimal_points():
        v = float(synthesis_at_angles(state.coeffs,
                                      np.array([sp.position[2]]),
                                      np.array([np.arctan2(sp.position[1],
                                                           sp.position[0])]))[0])
        if v > lam:
            lam, p_eps = v, sp.position

    # scaling center: nearest minimal-order singular point when alpha < 0
    if alpha < 0.0:
        minimal = w.minimal_points()
        dists = [np.arccos(np.clip(p_eps @ sp.position, -1, 1))
                 for sp in minimal]
        center = minimal[int(np.argmin(dists))].position
    else:
        center = p_eps

    t_eps = float(np.exp(-lam / (2.0 * (1.0 + alpha))))
    compact = lam < 1.0
    under_resolved = t_eps < 4.0 * np.pi / grid.band_limit

    cap_masses = {}
    for r in tuple(cap_radii) + (10.0 * t_eps,):
        key = float(r)
        if key <= 0.0:
            continue
        if key < np.pi - 0.2:
            cap_masses[key] = state.params.rho * cap_density_integral(
                state, center, key)
        else:
            # the "cap" covers the sphere: mass is rho * int h e^u
            integ = integrator_for(grid, w, state.params.rule)
            cap_masses[key] = state.params.rho * float(
                np.exp(integ.log_exp_integral(state.coeffs)))

    # profile collapse onto the planar bubble
    profile_err = np.nan
    if alpha < 0.0 or not compact:
        c_p = w.bubble_constant(center) if alpha < 0.0 else \
            float(w.weight(center[None, :])[0])
        radii = np.linspace(0.0, profile_R, 25)[1:] * t_eps
        psi = 2.0 * np.pi * np.arange(8) / 8.0
        e1, e2 = _orthonormal_frame(np.asarray(center, dtype=float))
        rr, pp = np.meshgrid(radii, psi, indexing="ij")
        pts = (np.sin(rr)[..., None] * (np.cos(pp)[..., None] * e1
                                        + np.sin(pp)[..., None] * e2)
               + np.cos(rr)[..., None] * center)
        t = np.clip(pts[..., 2], -1.0, 1.0).reshape(-1)
        ph = np.arctan2(pts[..., 1], pts[..., 0]).reshape(-1)
        u_vals = synthesis_at_angles(state.coeffs, t, ph)
        bubble = planar_bubble(rr.reshape(-1) / t_eps, c_p, alpha)
        profile_err = float(np.max(np.abs(u_vals - lam - bubble)))

    # far field against the Green's function of the concentration point
    d = np.arccos(np.clip(grid.nodes @ center, -1.0, 1.0))
    mask = d >= farfield_delta
    gvals = (-np.log(2.0 * np.sin(0.5 * d[mask]) ** 2) / FOUR_PI
             - np.log(np.e / 2.0) / FOUR_PI)
    ubar = state.coeffs.mean
    farfield = float(np.max(np.abs(vals[mask] - ubar - w.rho_bar * gvals)))

    grad = gradient_magnitude_grid(state.coeffs, grid)
    grad_l15 = float(integrate(ScalarField(grad**1.5, grid)) ** (1.0 / 1.5))

    return BlowupDiagnostics(
        lambda_eps=lam, p_eps=np.asarray(p_eps), center=np.asarray(center),
        t_eps=t_eps, cap_masses=cap_masses, profile_error=profile_err,
        farfield_error=farfield, mean_decay=t_eps**2 * ubar,
        grad_l15=grad_l15, compact_case=compact,
        under_resolved=under_resolved)


# ---------------------------------------------------------------------------
# epsilon sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepEntry:
    epsilon: float
    rho: float
    J: float
    residual_norm: float
    iterations: int
    diagnostics: BlowupDiagnostics

    def row(self) -> dict:
        d = self.diagnostics
        return {
            "epsilon": self.epsilon,
            "rho": self.rho,
            "J": self.J,
            "residual": self.residual_norm,
            "iterations": self.iterations,
            "lambda": d.lambda_eps,
            "t_eps": d.t_eps,
            "mean_decay": d.mean_decay,
            "cap_mass_10t": d.cap_masses.get(
                min(d.cap_masses, key=lambda k: abs(k - 10.0 * d.t_eps)),
                np.nan) if d.cap_masses else np.nan,
            "profile_error": d.profile_error,
            "grad_l15": d.grad_l15,
            "under_resolved": d.under_resolved,
        }


@dataclass
class SweepReport:
    entries: list
    extrapolated_J: float
    extrapolation_exponent: float
    states: list = field(default_factory=list)

    def column(self, key: str) -> list:
        return [e.row()[key] for e in self.entries]


def richardson_extrapolate(eps: np.ndarray, J: np.ndarray):
    """Fit J(eps) = J0 + c eps^p on the last three points and return (J0, p)."""
    from scipy.optimize import brentq
    e1, e2, e3 = eps[-3], eps[-2], eps[-1]
    j1, j2, j3 = J[-3], J[-2], J[-1]
    denom = j2 - j3
    if denom == 0.0:
        return float(j3), np.nan

    def mismatch(p):
        return (j1 - j2) / denom - (e1**p - e2**p) / (e2**p - e3**p)

    try:
        p = brentq(mismatch, 0.05, 4.0, xtol=1.0e-10)
        c = (j2 - j3) / (e2**p - e3**p)
        return float(j3 - c * e3**p), float(p)
    except ValueError:
        # no sign change: fall back to linear extrapolation in eps
        slope = (j2 - j3) / (e2 - e3)
        return float(j3 - slope * e3), 1.0


def epsilon_sweep(weight: SingularWeight, grid: SphereGrid,
                  config: SolverConfig,
                  rule: SingularCapRule | None = None,
                  keep_states: bool = False) -> SweepReport:
    """Warm-started minimization along the epsilon schedule."""
    rho_bar = weight.rho_bar
    rule = rule or SingularCapRule()
    entries = []
    states = []
    current: ScalarField | None = None
    for eps in config.epsilon_schedule:
        if eps >= rho_bar:
            raise ValueError(f"epsilon {eps} is not below rho_bar {rho_bar}")
        params = FunctionalParams(rho=rho_bar - eps, weight=weight, rule=rule)
        if current is None:
            if config.init == "test-function" and weight.alpha < 0.0:
                p0 = weight.minimal_points()[0].position
                tf = ConcentrationParams(epsilon=config.init_epsilon,
                                         weight=weight, p=p0)
                current = concentration_field(tf, grid)
            else:
                current = ScalarField.constant(grid, 0.0)
        state = minimize(params, config, current, grid)
        if not state.converged:
            raise NonConvergedError(
                f"entry at epsilon = {eps} did not converge "
                f"(residual {state.residual_norm:.3e} after "
                f"{state.iterations} iterations)")
        diag = diagnose(state, weight)
        entries.append(SweepEntry(epsilon=eps, rho=params.rho, J=state.J,
                                  residual_norm=state.residual_norm,
                                  iterations=state.iterations,
                                  diagnostics=diag))
        if keep_states:
            states.append(state)
        current = state.u
    eps_arr = np.array([e.epsilon for e in entries])
    J_arr = np.array([e.J for e in entries])
    if len(entries) >= 3:
        J0, p = richardson_extrapolate(eps_arr, J_arr)
    else:
        J0, p = float(J_arr[-1]), np.nan
    return SweepReport(entries=entries, extrapolated_J=J0,
                       extrapolation_exponent=p, states=states)


# ---------------------------------------------------------------------------
# gradient exponent near a singular point
# ---------------------------------------------------------------------------

def gradient_singularity_exponent(state: MinimizerState, p_i,
                                  d_max: float = 0.1,
                                  n_radii: int = 12) -> dict:
    """Least-squares slope of log |grad u| vs log d near a singular point.

    The fit annulus is [5 * grid spacing, d_max]; raises when the grid is
    too coarse for the annulus to exist.  The reported bound is the
    gradient-growth exponent min(2 alpha_i + 1, 0).
    """
    grid = state.u.grid
    p_i = np.asarray(p_i, dtype=float)
    alpha_i = state.params.weight.beta(p_i)
    if alpha_i >= 0.0:
        raise ValueError("the exponent fit targets negative-order points")
    d_min = 5.0 * grid.node_spacing()
    if d_min >= d_max:
        raise InsufficientAnnulusError(
            f"fit annulus [{d_min:.3g}, {d_max:.3g}] is empty; "
            "increase the grid resolution")
    radii = np.geomspace(d_min, d_max, n_radii)
    psi = 2.0 * np.pi * np.arange(8) / 8.0
    e1, e2 = _orthonormal_frame(p_i)
    rr, pp = np.meshgrid(radii, psi, indexing="ij")
    pts = (np.sin(rr)[..., None] * (np.cos(pp)[..., None] * e1
                                    + np.sin(pp)[..., None] * e2)
           + np.cos(rr)[..., None] * p_i)
    t = np.clip(pts[..., 2], -1.0, 1.0).reshape(-1)
    ph = np.arctan2(pts[..., 1], pts[..., 0]).reshape(-1)
    gmag = gradient_at_angles(state.coeffs, t, ph).reshape(rr.shape)
    avg = gmag.mean(axis=1)
    slope, intercept = np.polyfit(np.log(radii), np.log(avg), 1)
    return {
        "slope": float(slope),
        "bound": min(2.0 * alpha_i + 1.0, 0.0),
        "radii": radii,
        "mean_gradient": avg,
    }
