"""Closed-form Green's functions and conical singular weights on S^2.

The Laplace Green's function of the round sphere (area 4 pi, mean-zero
normalization) is known in closed form,

    G_p(x) = -(1/4pi) log(1 - <p, x>) - (1/4pi) log(e/2),

with the expansion G_p(x) = -(1/2pi) log d(x,p) + A + O(d^2) near p, where
the regular part A = (2 log 2 - 1) / (4 pi) is the same at every point by
symmetry.

A weight with conical singularities of orders alpha_i at points p_i is

    h = K * prod_i exp(-4 pi alpha_i G_{p_i})
      = K * prod_i (e/2)^{alpha_i} (1 - <p_i, x>)^{alpha_i},

which behaves like d(x, p_i)^{2 alpha_i} near p_i.  The derived quantities
alpha = min(0, min_i alpha_i) and rho_bar = 8 pi (1 + alpha) set the
critical strength of the exponential functional, and

    c(p) = K(p) exp(-4 pi alpha A) prod_{p_i != p} exp(-4 pi alpha_i G_{p_i}(p))

is the density constant seen by the concentration profile at a minimal-order
point p.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .sphere_grid import FOUR_PI, ScalarField, SphereGrid, geodesic_distance, normalized

# Regular part of the sphere Green's function, constant by symmetry.
REGULAR_PART = (2.0 * np.log(2.0) - 1.0) / FOUR_PI

_GREEN_CONST = np.log(np.e / 2.0) / FOUR_PI
_COINCIDENCE_TOL = 1.0e-14


class SingularEvaluationError(ValueError):
    """Evaluation requested at (or too close to) a singular point."""


def green(p, x):
    """Mean-zero Green's function G_p(x) of -Delta on the round sphere.

    Accepts a single point or an array of shape (..., 3) for ``x``.
    """
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    dot = x @ p
    if np.any(dot > 1.0 - _COINCIDENCE_TOL):
        raise SingularEvaluationError("green(p, x) evaluated at x = p")
    val = -np.log(1.0 - dot) / FOUR_PI - _GREEN_CONST
    return float(val) if val.ndim == 0 else val


def regular_part(p=None) -> float:
    """Value A(p) of the regular part of G_p at p (constant on S^2)."""
    return REGULAR_PART


@dataclass(frozen=True)
class SingularPoint:
    position: np.ndarray
    order: float

    def __post_init__(self):
        object.__setattr__(self, "position", normalized(self.position))
        if not (self.order > -1.0):
            raise ValueError(f"singular order must exceed -1, got {self.order}")
        if self.order == 0.0:
            raise ValueError("singular order must be nonzero")


class SingularWeight:
    """Weight h = K prod_i exp(-4 pi alpha_i G_{p_i}) with its bookkeeping.

    ``K`` is an optional smooth positive factor given as a callable on unit
    vectors (shape (..., 3) -> (...)); the default is K == 1.
    """

    def __init__(self, points: Sequence[SingularPoint] = (),
                 K: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.points = list(points)
        self.K = K
        for i, a in enumerate(self.points):
            for b in self.points[i + 1:]:
                if geodesic_distance(a.position, b.position) < 1.0e-12:
                    raise ValueError("singular points must be pairwise distinct")

    @classmethod
    def from_orders(cls, entries: Sequence[tuple], K=None) -> "SingularWeight":
        """Build from (position, order) pairs."""
        return cls([SingularPoint(np.asarray(p), float(a)) for p, a in entries], K)

    @property
    def orders(self) -> np.ndarray:
        return np.array([p.order for p in self.points])

    @property
    def positions(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, 3))
        return np.stack([p.position for p in self.points])

    @property
    def alpha(self) -> float:
        """Minimum singularity order min(0, min_i alpha_i)."""
        if not self.points:
            return 0.0
        return min(0.0, float(self.orders.min()))

    @property
    def rho_bar(self) -> float:
        """Critical parameter 8 pi (1 + alpha)."""
        return 8.0 * np.pi * (1.0 + self.alpha)

    def beta(self, p) -> float:
        """Singularity index: alpha_i at p_i, zero elsewhere."""
        p = normalized(p)
        for sp in self.points:
            if geodesic_distance(p, sp.position) < 1.0e-12:
                return sp.order
        return 0.0

    def minimal_points(self) -> list[SingularPoint]:
        """Singular points of minimal order (empty when alpha = 0 and m > 0... )."""
        a = self.alpha
        return [sp for sp in self.points if sp.order == a]

    def is_axis_aligned(self, tol: float = 1.0e-12) -> bool:
        """True when every singular point sits on the grid axis +-e3."""
        return all(abs(abs(sp.position[2]) - 1.0) <= tol for sp in self.points)

    def smooth_factor(self, x: np.ndarray) -> np.ndarray:
        if self.K is None:
            return np.ones(np.asarray(x).shape[:-1])
        return np.asarray(self.K(x), dtype=float)

    def log_weight(self, x, guard: bool = True):
        """log h(x); accepts (..., 3) arrays.  Stable for strong orders."""
        x = np.asarray(x, dtype=float)
        out = np.log(self.smooth_factor(x))
        for sp in self.points:
            dot = np.clip(x @ sp.position, -1.0, 1.0)
            near = dot > 1.0 - _COINCIDENCE_TOL
            if np.any(near):
                if guard and sp.order < 0.0:
                    raise SingularEvaluationError(
                        "weight evaluated at a negative-order singular point"
                    )
                # positive order: h has a genuine zero, log -> -inf limit
                safe = np.where(near, 0.0, dot)
                out = out + np.where(
                    near, -np.inf, sp.order * (np.log1p(-safe) + 1.0 - np.log(2.0))
                )
            else:
                out = out + sp.order * (np.log1p(-dot) + 1.0 - np.log(2.0))
        return out

    def weight(self, x):
        """h(x) = K(x) prod_i (e/2)^{alpha_i} (1 - <p_i, x>)^{alpha_i}."""
        return np.exp(self.log_weight(x))

    def sample(self, grid: SphereGrid) -> ScalarField:
        return ScalarField(self.weight(grid.nodes), grid)

    def bubble_constant(self, p) -> float:
        """Concentration density constant c(p) at a minimal-order point."""
        p = normalized(p)
        if self.beta(p) != self.alpha:
            raise ValueError(
                "bubble constant is defined only where the singularity index "
                "attains the minimal order"
            )
        log_c = float(np.log(self.smooth_factor(p[None, :])[0]))
        log_c += -FOUR_PI * self.alpha * REGULAR_PART
        for sp in self.points:
            if geodesic_distance(p, sp.position) < 1.0e-12:
                continue
            log_c += -FOUR_PI * sp.order * green(sp.position, p)
        return float(np.exp(log_c))

    def cache_key(self) -> tuple:
        pts = tuple((tuple(sp.position), sp.order) for sp in self.points)
        return (pts, id(self.K))

    def __repr__(self) -> str:
        pts = ", ".join(f"(order={sp.order:+.3g})" for sp in self.points)
        return f"SingularWeight([{pts}], K={'custom' if self.K else '1'})"


def weight_at(w: SingularWeight, x) -> float:
    """Pointwise value h(x); errors at negative-order singular points."""
    val = w.weight(np.asarray(x, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def bubble_constant(w: SingularWeight, p) -> float:
    return w.bubble_constant(p)
