"""The singular Moser-Trudinger functional and its discrete calculus.

For a weight h with conical singularities and a parameter rho > 0,

    J_rho(u) = 1/2 int |grad u|^2 + (rho/4pi) int u
               - rho log( (1/4pi) int h e^u ),

with Euler-Lagrange equation -Delta u = rho (h e^u / int h e^u - 1/4pi).

Discretely, u lives in the band-limited space of the grid; the Dirichlet
term and the Laplacian are spectral, while int h e^u needs quadrature that
respects the d^{2 alpha} behaviour of h at each singular point.  The
composite rule used here splits the sphere into

* small geodesic caps around each singular point, integrated in polar
  coordinates with the radial substitution s = r^{2(1+alpha_i)} (the
  substitution absorbs the algebraic singularity), and
* the remainder, integrated with Gauss-Legendre panels in t = cos(theta)
  geometrically graded toward the cap edges (the weight is analytic there
  but its derivatives grow toward the poles), times the uniform phi rule.

For singular points on the grid axis (the default configuration) every
piece is a product rule in (t, phi), so spherical-harmonic analysis of the
density h e^u against the composite rule costs the same O(L^3) as a grid
transform.  Off-axis points fall back to a smooth-cutoff variant whose
accuracy is limited by the grid resolution of the cutoff (roughly 1e-4);
all sharp-constant paths use the axis-aligned configuration.

Everything is evaluated through log h + u, with a global shift before
exponentiation, so strongly concentrated fields cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sphere_grid import (
    FOUR_PI,
    ProductTransform,
    ScalarField,
    SHCoefficients,
    SphereGrid,
    dirichlet_energy,
    sh_analysis,
    synthesis_at_angles,
)
from .singular_geometry import SingularWeight

DEFAULT_CEILING = 700.0


class UnnormalizedBlowupError(RuntimeError):
    """max(u) exceeded the overflow ceiling; the iterate is not normalized."""


@dataclass(frozen=True)
class SingularCapRule:
    """Quadrature layout for the singular caps.

    ``n_angular`` applies to scattered (off-axis) caps and diagnostics; caps
    on the grid axis reuse the grid's full longitude set so that the density
    analysis is alias-free to the same order as the grid itself.
    """

    cap_radius: float = 0.1
    n_radial: int = 32
    n_angular: int = 16

    def __post_init__(self):
        if not (0.0 < self.cap_radius <= 0.3):
            raise ValueError("cap_radius must lie in (0, 0.3]")
        if self.n_radial < 2 or self.n_angular < 4:
            raise ValueError("cap rule too coarse")


@dataclass
class FunctionalParams:
    rho: float
    weight: SingularWeight
    rule: SingularCapRule = field(default_factory=SingularCapRule)

    def __post_init__(self):
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")


def cap_radial_rule(alpha: float, radius: float, n: int):
    """Nodes/weights for int_0^radius f(r) sin(r) dr with f ~ r^{2 alpha}.

    Gauss-Legendre in s = r^{2(1+alpha)}; returns (r_k, w_k) such that the
    integral is sum_k w_k f(r_k) with the sin(r) jacobian already folded in.
    """
    power = 2.0 * (1.0 + alpha)
    s_nodes, s_weights = np.polynomial.legendre.leggauss(n)
    s_hi = radius**power
    s = 0.5 * s_hi * (s_nodes + 1.0)
    w = 0.5 * s_hi * s_weights
    r = s ** (1.0 / power)
    return r, w * r / (power * s) * np.sin(r)


def _graded_edges(dist0: float, dist_max: float, ratio: float = 2.0):
    """Geometric ladder dist0, dist0*ratio, ... capped at dist_max."""
    edges = [dist0]
    while edges[-1] * ratio < dist_max:
        edges.append(edges[-1] * ratio)
    edges.append(dist_max)
    return edges


def band_panels(t_lo: float, t_hi: float, sing_lo: bool, sing_hi: bool,
                band_limit: int):
    """Composite Gauss-Legendre rule on [t_lo, t_hi] in t = cos(theta).

    Panels are geometrically graded toward an endpoint that abuts a singular
    cap (branch point at t = +-1 just outside the interval); per-panel node
    counts resolve band-limited oscillation at the grid's band limit.
    """
    breaks = {t_lo, t_hi}
    if sing_hi:
        for d in _graded_edges(1.0 - t_hi, 1.0 - t_lo):
            breaks.add(1.0 - d)
    if sing_lo:
        for d in _graded_edges(1.0 + t_lo, 1.0 + t_hi):
            breaks.add(d - 1.0)
    edges = sorted(b for b in breaks if t_lo <= b <= t_hi)
    # split any wide middle panel so oscillatory integrands stay resolved
    refined = [edges[0]]
    for b in edges[1:]:
        width = b - refined[-1]
        pieces = max(1, int(np.ceil(width / 0.5)))
        for k in range(1, pieces + 1):
            refined.append(refined[-1] + width / pieces if k < pieces else b)
    nodes, weights = [], []
    base_x, base_w = np.polynomial.legendre.leggauss(12)
    for a, b in zip(refined[:-1], refined[1:]):
        dtheta = abs(np.arccos(np.clip(b, -1, 1)) - np.arccos(np.clip(a, -1, 1)))
        n = max(12, int(np.ceil(0.6 * (band_limit + 1) * dtheta)) + 8)
        if n == 12:
            x, w = base_x, base_w
        else:
            x, w = np.polynomial.legendre.leggauss(n)
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _smooth_cutoff(r: np.ndarray, radius: float) -> np.ndarray:
    """C^2 ramp: 1 for r <= radius/2, 0 for r >= radius."""
    s = np.clip((r - 0.5 * radius) / (0.5 * radius), 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _orthonormal_frame(p: np.ndarray):
    helper = np.eye(3)[np.argmin(np.abs(p))]
    e1 = np.cross(helper, p)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(p, e1)


class _ProductBlock:
    """Product-rule piece (custom t nodes x the grid's phi set).

    ``cap`` marks a polar cap block: (center index into the weight's point
    list, exact radial distances), used to evaluate the cap's own singular
    factor without the catastrophic cancellation of 1 - cos(r) at tiny r.
    """

    def __init__(self, grid: SphereGrid, t: np.ndarray, t_weights: np.ndarray,
                 extra: np.ndarray | None = None, cap: tuple | None = None):
        w2d = (t_weights[:, None] / grid.n_phi * (2.0 * np.pi)
               * np.ones(grid.n_phi))
        if extra is not None:
            w2d = w2d * extra
        self.transform = ProductTransform(grid.band_limit, t, grid.phi, w2d)
        self.weights = w2d
        self.cap = cap
        st = np.sqrt(np.maximum(1.0 - t**2, 0.0))
        self.points = np.stack(
            [st[:, None] * np.cos(grid.phi)[None, :],
             st[:, None] * np.sin(grid.phi)[None, :],
             np.broadcast_to(t[:, None], w2d.shape)], axis=-1)

    def synthesis(self, coeffs: SHCoefficients) -> np.ndarray:
        return self.transform.synthesis_values(coeffs)

    def analysis(self, values: np.ndarray) -> SHCoefficients:
        return self.transform.analysis_coeffs(values)


class _GridBlock(_ProductBlock):
    """The grid itself as a quadrature block (reuses its transform)."""

    def __init__(self, grid: SphereGrid, extra: np.ndarray | None = None):
        self.grid = grid
        self.extra = extra
        self.cap = None
        self.weights = grid.weights if extra is None else grid.weights * extra
        self.points = grid.nodes
        self._scaled: ProductTransform | None = None
        if extra is not None:
            self._scaled = ProductTransform(
                grid.band_limit, grid.t, grid.phi,
                grid.t_weights[:, None] / grid.n_phi * extra)

    def synthesis(self, coeffs: SHCoefficients) -> np.ndarray:
        return self.grid.transform.synthesis_values(coeffs)

    def analysis(self, values: np.ndarray) -> SHCoefficients:
        if self._scaled is not None:
            return self._scaled.analysis_coeffs(values)
        return self.grid.transform.analysis_coeffs(values)


class _ScatterBlock:
    """Scattered polar cap around an off-axis singular point."""

    def __init__(self, grid: SphereGrid, center: np.ndarray, alpha: float,
                 rule: SingularCapRule, cutoff: bool,
                 cap_index: int | None = None):
        r, wr = cap_radial_rule(alpha, rule.cap_radius, rule.n_radial)
        psi = 2.0 * np.pi * np.arange(rule.n_angular) / rule.n_angular
        e1, e2 = _orthonormal_frame(center)
        rr, pp = np.meshgrid(r, psi, indexing="ij")
        pts = (np.sin(rr)[..., None] * (np.cos(pp)[..., None] * e1
                                        + np.sin(pp)[..., None] * e2)
               + np.cos(rr)[..., None] * center)
        w = np.broadcast_to((wr * 2.0 * np.pi / rule.n_angular)[:, None],
                            rr.shape).copy()
        if cutoff:
            w *= _smooth_cutoff(rr, rule.cap_radius)
        self.points = pts.reshape(-1, 3)
        self.weights = w.reshape(-1)
        self.cap = None if cap_index is None else (cap_index, rr.reshape(-1))
        self._t = np.clip(self.points[:, 2], -1.0, 1.0)
        self._phi = np.arctan2(self.points[:, 1], self.points[:, 0])
        self.band_limit = grid.band_limit

    def synthesis(self, coeffs: SHCoefficients) -> np.ndarray:
        return synthesis_at_angles(coeffs, self._t, self._phi)

    def analysis(self, values: np.ndarray) -> SHCoefficients:
        L = self.band_limit
        out = SHCoefficients.zeros(L)
        wv = self.weights * values
        t, phi = self._t, self._phi
        sq = np.sqrt(np.maximum(1.0 - t * t, 0.0))
        pmm = np.full_like(t, 1.0 / np.sqrt(FOUR_PI))
        for m in range(L + 1):
            amp = np.sqrt(2.0) if m > 0 else 1.0
            cosv = np.cos(m * phi) * wv
            sinv = np.sin(m * phi) * wv if m > 0 else None
            p_prev2 = pmm
            rows = [(m, p_prev2)]
            if m < L:
                p_prev = np.sqrt(2 * m + 3.0) * t * pmm
                rows.append((m + 1, p_prev))
                for l in range(m + 2, L + 1):
                    a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                    b = -np.sqrt((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m)
                                 / ((2.0 * l - 3.0) * (l * l - m * m)))
                    p_next = a * t * p_prev + b * p_prev2
                    p_prev2, p_prev = p_prev, p_next
                    rows.append((l, p_prev))
                pmm = np.sqrt((2 * m + 3.0) / (2 * m + 2.0)) * sq * pmm
            for l, pr in rows:
                out.values[l, L + m] = amp * np.dot(pr, cosv)
                if m > 0:
                    out.values[l, L - m] = amp * np.dot(pr, sinv)
        return out


class SingularIntegrator:
    """Composite quadrature for densities h e^u and their SH analysis."""

    def __init__(self, grid: SphereGrid, weight: SingularWeight,
                 rule: SingularCapRule | None = None):
        self.grid = grid
        self.weight = weight
        self.rule = rule or SingularCapRule()
        self._validate_caps()
        self.blocks = self._build_blocks()
        self.log_h = [self._stable_log_h(b) for b in self.blocks]

    def _stable_log_h(self, block) -> np.ndarray:
        """log h at block points; a cap's own factor uses 1 - cos r = 2 sin^2(r/2)."""
        x = block.points
        w = self.weight
        out = np.log(w.smooth_factor(x))
        cap_idx, cap_r = (block.cap if getattr(block, "cap", None) else (None, None))
        for i, sp in enumerate(w.points):
            if i == cap_idx:
                one_minus_dot = 2.0 * np.sin(0.5 * cap_r) ** 2
                if one_minus_dot.shape != x.shape[:-1]:
                    one_minus_dot = np.broadcast_to(
                        one_minus_dot[:, None], x.shape[:-1])
            else:
                one_minus_dot = 1.0 - x @ sp.position
            out = out + sp.order * (np.log(one_minus_dot) + 1.0 - np.log(2.0))
        return out

    def _validate_caps(self):
        pos = self.weight.positions
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                d = np.arccos(np.clip(pos[i] @ pos[j], -1, 1))
                if d <= 2.0 * self.rule.cap_radius:
                    raise ValueError(
                        "singular caps overlap; reduce cap_radius or "
                        "separate the singular points")

    def _build_blocks(self):
        grid, rule, w = self.grid, self.rule, self.weight
        if not w.points:
            return [_GridBlock(grid)]
        if w.is_axis_aligned():
            blocks = []
            north = south = None
            for i, sp in enumerate(w.points):
                if sp.position[2] > 0:
                    north = (i, sp)
                else:
                    south = (i, sp)
            t_hi, t_lo = 1.0, -1.0
            if north is not None:
                r, wr = cap_radial_rule(north[1].order, rule.cap_radius,
                                        rule.n_radial)
                blocks.append(_ProductBlock(grid, np.cos(r), wr,
                                            cap=(north[0], r)))
                t_hi = np.cos(rule.cap_radius)
            if south is not None:
                r, wr = cap_radial_rule(south[1].order, rule.cap_radius,
                                        rule.n_radial)
                blocks.append(_ProductBlock(grid, -np.cos(r), wr,
                                            cap=(south[0], r)))
                t_lo = -np.cos(rule.cap_radius)
            t, tw = band_panels(t_lo, t_hi, south is not None,
                                north is not None, grid.band_limit)
            blocks.append(_ProductBlock(grid, t, tw))
            return blocks
        # general positions: smooth-cutoff splitting (documented lower accuracy)
        extra = np.ones((grid.n_theta, grid.n_phi))
        blocks = []
        for i, sp in enumerate(w.points):
            d = np.arccos(np.clip(grid.nodes @ sp.position, -1.0, 1.0))
            extra *= 1.0 - _smooth_cutoff(d, rule.cap_radius)
            blocks.append(_ScatterBlock(grid, sp.position, sp.order, rule,
                                        cutoff=True, cap_index=i))
        blocks.append(_GridBlock(grid, extra))
        return blocks

    # -- density machinery --------------------------------------------------

    def density_values(self, coeffs: SHCoefficients):
        """(dens_b, shift): dens_b = h e^{u - shift} per block, stable."""
        z = [lh + b.synthesis(coeffs) for lh, b in zip(self.log_h, self.blocks)]
        shift = max(float(np.max(zb)) for zb in z)
        return [np.exp(zb - shift) for zb in z], shift

    def integral_of(self, dens) -> float:
        return float(sum(np.sum(b.weights * d)
                         for b, d in zip(self.blocks, dens)))

    def log_exp_integral(self, coeffs: SHCoefficients) -> float:
        dens, shift = self.density_values(coeffs)
        return shift + float(np.log(self.integral_of(dens)))

    def density_projection(self, coeffs: SHCoefficients):
        """Coefficients of h e^u and its integral, both scaled by e^{-shift}.

        Only the ratio coeffs/integral is meaningful to callers; the common
        scale cancels in the Euler-Lagrange term.
        """
        dens, shift = self.density_values(coeffs)
        total = SHCoefficients.zeros(self.grid.band_limit)
        for b, d in zip(self.blocks, dens):
            total.values += b.analysis(d).values
        return total, self.integral_of(dens), shift

    def field_peak(self, coeffs: SHCoefficients) -> float:
        """max of the synthesized field over all quadrature points."""
        return max(float(np.max(b.synthesis(coeffs))) for b in self.blocks)

    def normalized_moment(self, coeffs: SHCoefficients, fn) -> float:
        """int h e^u fn(x) / int h e^u for a pointwise factor fn."""
        dens, _ = self.density_values(coeffs)
        num = sum(np.sum(b.weights * d * fn(b.points))
                  for b, d in zip(self.blocks, dens))
        return float(num / self.integral_of(dens))

    def smooth_integral(self, values_fn) -> float:
        """Quadrature of a pointwise closed-form integrand (no density)."""
        return float(sum(np.sum(b.weights * values_fn(b.points))
                         for b in self.blocks))


def integrator_for(grid: SphereGrid, weight: SingularWeight,
                   rule: SingularCapRule | None = None) -> SingularIntegrator:
    rule = rule or SingularCapRule()
    key = (weight.cache_key(), rule)
    cached = grid._integrator_cache.get(key)
    if cached is None:
        cached = SingularIntegrator(grid, weight, rule)
        grid._integrator_cache[key] = cached
    return cached


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_ceiling(u_values: np.ndarray, ceiling: float):
    peak = float(np.max(u_values))
    if peak > ceiling:
        raise UnnormalizedBlowupError(
            f"max(u) = {peak:.3g} exceeds the overflow ceiling {ceiling:.3g}; "
            "the iterate has blown up beyond what the evaluation can follow")


def exp_integral(u: ScalarField, w: SingularWeight,
                 rule: SingularCapRule | None = None,
                 ceiling: float = DEFAULT_CEILING) -> float:
    """int_{S^2} h e^u with singular-cap corrected quadrature."""
    _check_ceiling(u.values, ceiling)
    integ = integrator_for(u.grid, w, rule)
    return float(np.exp(integ.log_exp_integral(sh_analysis(u))))


def log_exp_integral(u: ScalarField, w: SingularWeight,
                     rule: SingularCapRule | None = None,
                     ceiling: float = DEFAULT_CEILING) -> float:
    _check_ceiling(u.values, ceiling)
    integ = integrator_for(u.grid, w, rule)
    return integ.log_exp_integral(sh_analysis(u))


def eval_J(u: ScalarField, params: FunctionalParams,
           ceiling: float = DEFAULT_CEILING) -> float:
    """J_rho(u); invariant under u -> u + const."""
    _check_ceiling(u.values, ceiling)
    coeffs = sh_analysis(u)
    return eval_J_coeffs(coeffs, params, u.grid)


def eval_J_coeffs(coeffs: SHCoefficients, params: FunctionalParams,
                  grid: SphereGrid) -> float:
    integ = integrator_for(grid, params.weight, params.rule)
    log_e = integ.log_exp_integral(coeffs)
    return (0.5 * dirichlet_energy(coeffs)
            + params.rho * coeffs.mean
            - params.rho * (log_e - np.log(FOUR_PI)))


def residual_coeffs(coeffs: SHCoefficients, params: FunctionalParams,
                    grid: SphereGrid) -> SHCoefficients:
    """Spectral Euler-Lagrange residual -Delta u - rho(h e^u/E - 1/4pi).

    The density is projected with the same composite rule that defines
    int h e^u, so the result is the exact gradient of the discrete J and is
    mean-free by construction.
    """
    integ = integrator_for(grid, params.weight, params.rule)
    proj, total, _ = integ.density_projection(coeffs)
    L = coeffs.band_limit
    l = np.arange(L + 1, dtype=float)
    out = (l * (l + 1.0))[:, None] * coeffs.values - (params.rho / total) * proj.values
    out[0, :] = 0.0
    return SHCoefficients(out)


def el_residual(u: ScalarField, params: FunctionalParams,
                ceiling: float = DEFAULT_CEILING) -> ScalarField:
    _check_ceiling(u.values, ceiling)
    r = residual_coeffs(sh_analysis(u), params, u.grid)
    return ScalarField(u.grid.transform.synthesis_values(r), u.grid)


def el_residual_norm(u: ScalarField, params: FunctionalParams,
                     ceiling: float = DEFAULT_CEILING) -> float:
    """L^2 norm of the Euler-Lagrange residual (spectral, by Parseval)."""
    _check_ceiling(u.values, ceiling)
    r = residual_coeffs(sh_analysis(u), params, u.grid)
    return float(np.sqrt(np.sum(r.values**2)))


def gradient_pairing(u: ScalarField, params: FunctionalParams,
                     v: ScalarField) -> float:
    """Directional derivative dJ(u)[v] in the discrete setting."""
    r = residual_coeffs(sh_analysis(u), params, u.grid)
    return float(np.sum(r.values * sh_analysis(v).values))


def troyanov_gap(u: ScalarField, w: SingularWeight, C: float,
                 rule: SingularCapRule | None = None) -> float:
    """RHS - LHS of the sharp exponential inequality with constant C.

    Equals J_{rho_bar}(u)/rho_bar + C; nonnegative iff the inequality holds
    at u with this constant.
    """
    coeffs = sh_analysis(u)
    integ = integrator_for(u.grid, w, rule)
    log_e = integ.log_exp_integral(coeffs)
    return (dirichlet_energy(coeffs) / (16.0 * np.pi * (1.0 + w.alpha))
            + C - (log_e - coeffs.mean - np.log(FOUR_PI)))
