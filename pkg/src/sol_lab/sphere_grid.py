"""Discretization of the unit sphere S^2.

The grid is a tensor product of Gauss-Legendre nodes in t = cos(theta) and
uniformly spaced longitudes.  This combination integrates every spherical
harmonic of degree <= 2L exactly (L the band limit), and none of the nodes
sit on the poles, which is where singular weights will be placed later.

Fields live in two equivalent representations:

* ``ScalarField``   -- values on the (n_theta, n_phi) node array;
* ``SHCoefficients``-- real spherical-harmonic coefficients a_{l,m},
                       0 <= l <= L, -l <= m <= l.

The real harmonic convention is orthonormal on the sphere:

    Y_{l,0}  = Pbar_{l,0}(cos theta)
    Y_{l,m}  = sqrt(2) * Pbar_{l,m}(cos theta) * cos(m phi)   (m > 0)
    Y_{l,-m} = sqrt(2) * Pbar_{l,m}(cos theta) * sin(m phi)   (m > 0)

where Pbar includes the full normalization (Pbar_{0,0} = 1/sqrt(4 pi)).
Transforms are dense per-order matrix products, O(L^3) overall, which is
fine at desk scale (L <= 256).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOUR_PI = 4.0 * np.pi


class BandLimitError(ValueError):
    """Coefficients exceed the band limit a grid can represent."""


def normalized(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def geodesic_distance(p, q) -> float:
    """Great-circle distance arccos<p,q>, clamped against roundoff."""
    dot = float(np.dot(np.asarray(p, dtype=float), np.asarray(q, dtype=float)))
    return float(np.arccos(np.clip(dot, -1.0, 1.0)))


def normalized_legendre(band_limit: int, t: np.ndarray) -> list[np.ndarray]:
    """Fully normalized associated Legendre functions Pbar_{l,m}(t).

    Returns one array per order m (0 <= m <= band_limit) of shape
    (band_limit + 1 - m, len(t)); row k holds degree l = m + k.  The
    normalization is the orthonormal spherical-harmonic one, so values stay
    O(sqrt(l)) and the three-term recurrence is stable far beyond L = 256.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    sq = np.sqrt(np.maximum(1.0 - t * t, 0.0))
    blocks: list[np.ndarray] = []
    pmm = np.full_like(t, 1.0 / np.sqrt(FOUR_PI))
    for m in range(band_limit + 1):
        block = np.empty((band_limit + 1 - m, t.size))
        block[0] = pmm
        if m < band_limit:
            block[1] = np.sqrt(2 * m + 3.0) * t * pmm
        for l in range(m + 2, band_limit + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = -np.sqrt(
                (2.0 * l + 1.0)
                * ((l - 1.0) ** 2 - m * m)
                / ((2.0 * l - 3.0) * (l * l - m * m))
            )
            block[l - m] = a * t * block[l - m - 1] + b * block[l - m - 2]
        blocks.append(block)
        if m < band_limit:
            pmm = np.sqrt((2 * m + 3.0) / (2 * m + 2.0)) * sq * pmm
    return blocks


@dataclass
class SHCoefficients:
    """Real spherical-harmonic coefficients, entry [l, L + m] for a_{l,m}."""

    values: np.ndarray

    @property
    def band_limit(self) -> int:
        return self.values.shape[0] - 1

    def copy(self) -> "SHCoefficients":
        return SHCoefficients(self.values.copy())

    @classmethod
    def zeros(cls, band_limit: int) -> "SHCoefficients":
        return cls(np.zeros((band_limit + 1, 2 * band_limit + 1)))

    @property
    def mean(self) -> float:
        """Mean of the synthesized field: a_{0,0} / sqrt(4 pi)."""
        return float(self.values[0, self.band_limit] / np.sqrt(FOUR_PI))

    def shifted(self, constant: float) -> "SHCoefficients":
        out = self.copy()
        out.values[0, self.band_limit] += constant * np.sqrt(FOUR_PI)
        return out


def _degree_weights(band_limit: int) -> np.ndarray:
    l = np.arange(band_limit + 1, dtype=float)
    return l * (l + 1.0)


class ProductTransform:
    """Spherical-harmonic analysis/synthesis on a product node set.

    The node set is {(t_i, phi_j)} with arbitrary colatitude nodes t and the
    uniform longitude set of the parent grid.  ``weights`` are the full
    steradian weights per node (may include pointwise cutoff factors).
    """

    def __init__(self, band_limit: int, t: np.ndarray, phi: np.ndarray,
                 weights_2d: np.ndarray | None):
        self.band_limit = band_limit
        self.t = np.asarray(t, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.weights = weights_2d
        self.plm = normalized_legendre(band_limit, self.t)
        m = np.arange(band_limit + 1)[:, None]
        self.cos_m = np.cos(m * self.phi[None, :])
        self.sin_m = np.sin(m * self.phi[None, :])

    def synthesis_values(self, coeffs: SHCoefficients) -> np.ndarray:
        L = self.band_limit
        c = coeffs.values
        if coeffs.band_limit != L:
            raise BandLimitError(
                f"coefficients have L={coeffs.band_limit}, transform expects {L}"
            )
        Lc = coeffs.band_limit
        cc = np.zeros((L + 1, self.t.size))
        cs = np.zeros((L + 1, self.t.size))
        for m in range(L + 1):
            block = self.plm[m]
            amp = np.sqrt(2.0) if m > 0 else 1.0
            cc[m] = amp * (c[m:, Lc + m] @ block)
            if m > 0:
                cs[m] = amp * (c[m:, Lc - m] @ block)
        return cc.T @ self.cos_m + cs.T @ self.sin_m

    def analysis_coeffs(self, values: np.ndarray) -> SHCoefficients:
        """<values, Y_{l,m}> under this node set's quadrature weights."""
        if self.weights is None:
            raise ValueError("transform was built without quadrature weights")
        L = self.band_limit
        w = self.weights * values
        fc = w @ self.cos_m.T
        fs = w @ self.sin_m.T
        out = np.zeros((L + 1, 2 * L + 1))
        for m in range(L + 1):
            block = self.plm[m]
            amp = np.sqrt(2.0) if m > 0 else 1.0
            out[m:, L + m] = amp * (block @ fc[:, m])
            if m > 0:
                out[m:, L - m] = amp * (block @ fs[:, m])
        return SHCoefficients(out)


class SphereGrid:
    """Gauss-Legendre x uniform-longitude quadrature grid on S^2."""

    def __init__(self, n_theta: int, n_phi: int):
        if n_theta < 2:
            raise ValueError(f"n_theta must be >= 2, got {n_theta}")
        if n_phi < 4:
            raise ValueError(f"n_phi must be >= 4, got {n_phi}")
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.band_limit = min(n_theta - 1, (n_phi - 1) // 2)
        t, tw = np.polynomial.legendre.leggauss(self.n_theta)
        self.t = t
        self.t_weights = tw * (2.0 * np.pi / self.n_phi) * self.n_phi  # sum 4 pi
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self._transform: ProductTransform | None = None
        self._integrator_cache: dict = {}

    # -- geometry -----------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        """Steradian weight per node, shape (n_theta, n_phi); sums to 4 pi."""
        return np.repeat(self.t_weights[:, None] / self.n_phi, self.n_phi, axis=1)

    @property
    def nodes(self) -> np.ndarray:
        """Unit vectors per node, shape (n_theta, n_phi, 3)."""
        st = np.sqrt(1.0 - self.t**2)
        x = st[:, None] * np.cos(self.phi)[None, :]
        y = st[:, None] * np.sin(self.phi)[None, :]
        z = np.broadcast_to(self.t[:, None], x.shape)
        return np.stack([x, y, z], axis=-1)

    @property
    def axis(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    def node_spacing(self) -> float:
        """Typical colatitude spacing, pi / n_theta."""
        return np.pi / self.n_theta

    # -- transforms ---------------------------------------------------------

    @property
    def transform(self) -> ProductTransform:
        if self._transform is None:
            w2d = self.t_weights[:, None] / self.n_phi * np.ones(self.n_phi)
            self._transform = ProductTransform(
                self.band_limit, self.t, self.phi, w2d
            )
        return self._transform

    def __repr__(self) -> str:
        return (f"SphereGrid(n_theta={self.n_theta}, n_phi={self.n_phi}, "
                f"L={self.band_limit})")


@dataclass
class ScalarField:
    """Real-valued field sampled on the nodes of a SphereGrid."""

    values: np.ndarray
    grid: SphereGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.n_theta, self.grid.n_phi)
        if self.values.shape != expected:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite at every node")

    @classmethod
    def from_function(cls, grid: SphereGrid, fn) -> "ScalarField":
        """Sample ``fn`` (mapping (..., 3) unit vectors to reals) on the grid."""
        return cls(np.asarray(fn(grid.nodes), dtype=float), grid)

    @classmethod
    def constant(cls, grid: SphereGrid, value: float) -> "ScalarField":
        return cls(np.full((grid.n_theta, grid.n_phi), float(value)), grid)

    @property
    def mean(self) -> float:
        return integrate(self) / FOUR_PI

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.values + other.values, self.grid)
        return ScalarField(self.values + other, self.grid)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.values - other.values, self.grid)
        return ScalarField(self.values - other, self.grid)

    def __mul__(self, scalar: float):
        return ScalarField(self.values * scalar, self.grid)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def build_grid(n_theta: int, n_phi: int) -> SphereGrid:
    return SphereGrid(n_theta, n_phi)


def integrate(f: ScalarField) -> float:
    """Quadrature sum sum_i w_i f_i over the whole sphere."""
    return float(np.sum(f.grid.t_weights / f.grid.n_phi * np.sum(f.values, axis=1)))


def sh_analysis(f: ScalarField) -> SHCoefficients:
    return f.grid.transform.analysis_coeffs(f.values)


def sh_synthesis(c: SHCoefficients, grid: SphereGrid) -> ScalarField:
    if c.band_limit > grid.band_limit:
        raise BandLimitError(
            f"coefficients have L={c.band_limit}, grid supports {grid.band_limit}"
        )
    if c.band_limit < grid.band_limit:
        padded = SHCoefficients.zeros(grid.band_limit)
        L, Lc = grid.band_limit, c.band_limit
        padded.values[: Lc + 1, L - Lc : L + Lc + 1] = c.values
        c = padded
    return ScalarField(grid.transform.synthesis_values(c), grid)


def dirichlet_energy(c: SHCoefficients) -> float:
    """int |grad u|^2 = sum_{l,m} l(l+1) a_{l,m}^2 for band-limited u."""
    lw = _degree_weights(c.band_limit)
    return float(np.sum(lw[:, None] * c.values**2))


def dirichlet_pairing(a: SHCoefficients, b: SHCoefficients) -> float:
    """int grad u . grad v in spectral form."""
    if a.band_limit != b.band_limit:
        raise BandLimitError("band limits differ")
    lw = _degree_weights(a.band_limit)
    return float(np.sum(lw[:, None] * a.values * b.values))


def coefficient_pairing(a: SHCoefficients, b: SHCoefficients) -> float:
    """L^2 inner product int u v of two band-limited fields (Parseval)."""
    if a.band_limit != b.band_limit:
        raise BandLimitError("band limits differ")
    return float(np.sum(a.values * b.values))


def laplacian(c: SHCoefficients) -> SHCoefficients:
    lw = _degree_weights(c.band_limit)
    return SHCoefficients(-lw[:, None] * c.values)


def solve_poisson(rhs: SHCoefficients) -> SHCoefficients:
    """Mean-free solution of -Delta w = rhs (the l = 0 mode is dropped)."""
    lw = _degree_weights(rhs.band_limit)
    out = np.zeros_like(rhs.values)
    out[1:] = rhs.values[1:] / lw[1:, None]
    return SHCoefficients(out)


def l2_norm(c: SHCoefficients) -> float:
    return float(np.sqrt(np.sum(c.values**2)))


def phi_derivative(c: SHCoefficients) -> SHCoefficients:
    """Coefficients of du/dphi (cos <-> sin blocks swap, scaled by m)."""
    L = c.band_limit
    out = np.zeros_like(c.values)
    for m in range(1, L + 1):
        out[:, L + m] = m * c.values[:, L - m]
        out[:, L - m] = -m * c.values[:, L + m]
    return SHCoefficients(out)


# ---------------------------------------------------------------------------
# point evaluation away from the grid
# ---------------------------------------------------------------------------

def synthesis_at_points(c: SHCoefficients, points: np.ndarray) -> np.ndarray:
    """Evaluate a band-limited field at arbitrary unit vectors.

    Streams the Legendre recurrence per order, so memory stays O(len(points))
    and no table is stored; exact for band-limited fields.  Accepts any
    leading shape (..., 3).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    t = np.clip(pts[..., 2], -1.0, 1.0)
    phi = np.arctan2(pts[..., 1], pts[..., 0])
    return synthesis_at_angles(c, t, phi)


def synthesis_at_angles(c: SHCoefficients, t: np.ndarray,
                        phi: np.ndarray) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if t.ndim > 1:
        shape = t.shape
        return synthesis_at_angles(c, t.ravel(), phi.ravel()).reshape(shape)
    L = c.band_limit
    cv = c.values
    sq = np.sqrt(np.maximum(1.0 - t * t, 0.0))
    out = np.zeros_like(t)
    pmm = np.full_like(t, 1.0 / np.sqrt(FOUR_PI))
    for m in range(L + 1):
        amp = np.sqrt(2.0) if m > 0 else 1.0
        if m > 0:
            trig = amp * (cv[:, L + m][:, None] * np.cos(m * phi)[None, :]
                          + cv[:, L - m][:, None] * np.sin(m * phi)[None, :])
        else:
            trig = cv[:, L][:, None] * np.ones_like(phi)[None, :]
        p_prev2 = pmm
        out += trig[m] * p_prev2
        if m < L:
            p_prev = np.sqrt(2 * m + 3.0) * t * pmm
            out += trig[m + 1] * p_prev
            for l in range(m + 2, L + 1):
                a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = -np.sqrt((2.0 * l + 1.0) * ((l - 1.0) ** 2 - m * m)
                             / ((2.0 * l - 3.0) * (l * l - m * m)))
                p_next = a * t * p_prev + b * p_prev2
                p_prev2, p_prev = p_prev, p_next
                out += trig[l] * p_prev
            pmm = np.sqrt((2 * m + 3.0) / (2 * m + 2.0)) * sq * pmm
    return out


def gradient_at_angles(c: SHCoefficients, t: np.ndarray, phi: np.ndarray,
                       fd_step: float = 1.0e-5) -> np.ndarray:
    """|grad u| at arbitrary points (t = cos colatitude, longitude phi).

    The longitude derivative is spectral (exact); the colatitude derivative
    uses a central difference of the exact synthesis, which is accurate to
    O(fd_step^2) with no sampling noise.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.arccos(np.clip(t, -1.0, 1.0))
    up = synthesis_at_angles(c, np.cos(theta + fd_step), phi)
    dn = synthesis_at_angles(c, np.cos(theta - fd_step), phi)
    du_dtheta = (up - dn) / (2.0 * fd_step)
    dphi = synthesis_at_angles(phi_derivative(c), t, phi)
    sin_theta = np.sqrt(np.maximum(1.0 - t * t, 1.0e-300))
    return np.sqrt(du_dtheta**2 + (dphi / sin_theta) ** 2)
