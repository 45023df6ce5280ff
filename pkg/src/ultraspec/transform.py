"""Eigenfunction transforms between sampled functions and level-blocked coefficients.

Grid conventions (fixed, "v1"):

* circle: x_i = 2 pi i / N, i = 0..N-1
* torus: the tensor product of the circle grid, axis 0 is x1
* sphere: Gauss-Legendre nodes in cos(theta) (colatitude) times
  phi_j = 2 pi j / n_lon

All three transforms are exact (up to roundoff) for band-limited input when
the grid resolves twice the top frequency.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import legendre_m
from .spectrum import Manifold, level_table

# fold a log-magnitude offset into the stored coefficients only while the
# block stays inside this range
_FOLD_LIMIT = 300.0 * math.log(10.0) / 2.0


class GridError(ValueError):
    """Sampling grid too coarse for the requested truncation."""


# --------------------------------------------------------------------------
# coefficient container
# --------------------------------------------------------------------------


class SpectralVector:
    """Coefficients f^(j, k) for levels j = 0..j_max of ``operator``.

    The effective coefficient of every mode in level j is
    ``coeffs[mode] * exp(log_offset[j])``; offsets carry magnitudes that would
    overflow or underflow double precision.
    """

    def __init__(self, operator, coeffs, j_max, log_offset=None):
        self.operator = operator
        self.table = level_table(operator, j_max)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (self.table.size,):
            raise ValueError(f"expected {self.table.size} coefficients for j_max = {j_max}, got {coeffs.shape}")
        self.coeffs = coeffs
        if log_offset is None:
            log_offset = np.zeros(j_max + 1)
        self.log_offset = np.asarray(log_offset, dtype=np.float64)
        if self.log_offset.shape != (j_max + 1,):
            raise ValueError("log_offset needs one entry per level")

    @classmethod
    def zeros(cls, operator, j_max):
        return cls(operator, np.zeros(level_table(operator, j_max).size, dtype=np.complex128), j_max)

    @property
    def j_max(self):
        return self.table.j_max

    @property
    def lam(self):
        return self.table.lam

    @property
    def d(self):
        return self.table.d

    def block(self, j):
        o = self.table.offsets
        return self.coeffs[o[j] : o[j + 1]]

    @property
    def blocks(self):
        return [self.block(j) for j in range(self.j_max + 1)]

    def copy(self):
        return SpectralVector(self.operator, self.coeffs.copy(), self.j_max, self.log_offset.copy())

    def _mode_offsets(self):
        return np.repeat(self.log_offset, self.table.d)

    def log_hs_norms(self):
        """log ||f^(j)||_HS per level (-inf for zero blocks)."""
        sq = np.add.reduceat(np.abs(self.coeffs) ** 2, self.table.offsets[:-1])
        with np.errstate(divide="ignore"):
            return 0.5 * np.log(sq) + self.log_offset

    def hs_norms(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_hs_norms())

    def effective(self):
        """Coefficients with offsets applied (raises if that overflows)."""
        off = self._mode_offsets()
        if np.any(off > 700.0):
            raise OverflowError("coefficients exceed double range; use log_hs_norms")
        with np.errstate(under="ignore"):
            return self.coeffs * np.exp(off)

    def is_zero(self):
        return not np.any(self.coeffs)

    def normalized(self):
        """Fold offsets into the coefficients wherever the result stays in range."""
        out = self.copy()
        lh = out.log_hs_norms()
        for j in np.flatnonzero(out.log_offset != 0.0):
            if np.isfinite(lh[j]) and abs(lh[j]) < _FOLD_LIMIT:
                o = out.table.offsets
                out.coeffs[o[j] : o[j + 1]] *= math.exp(out.log_offset[j])
                out.log_offset[j] = 0.0
        return out

    def truncated(self, j_max):
        if j_max > self.j_max:
            raise ValueError("cannot extend a truncation")
        n = level_table(self.operator, j_max).size
        return SpectralVector(self.operator, self.coeffs[:n].copy(), j_max, self.log_offset[: j_max + 1].copy())

    def reindexed(self, operator):
        """Same coefficients attached to another operator on the same manifold."""
        if operator.manifold is not self.operator.manifold:
            raise ValueError("re-indexing needs the same manifold")
        return SpectralVector(operator, self.coeffs.copy(), self.j_max, self.log_offset.copy())

    def scaled(self, factor):
        """Multiply every coefficient by ``factor`` > 0 (absorbed into the offsets)."""
        return SpectralVector(self.operator, self.coeffs.copy(), self.j_max, self.log_offset + math.log(factor))

    def __repr__(self):
        return f"SpectralVector({self.operator.manifold.value}, j_max={self.j_max}, modes={self.table.size})"


# --------------------------------------------------------------------------
# grids and samples
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    manifold: Manifold
    n: int = 0
    n_lat: int = 0
    n_lon: int = 0

    @property
    def shape(self):
        if self.manifold is Manifold.CIRCLE:
            return (self.n,)
        if self.manifold is Manifold.TORUS2:
            return (self.n, self.n)
        return (self.n_lat, self.n_lon)

    def coords(self):
        """Coordinate arrays broadcast to the grid shape."""
        if self.manifold is Manifold.CIRCLE:
            return (2.0 * np.pi * np.arange(self.n) / self.n,)
        if self.manifold is Manifold.TORUS2:
            x = 2.0 * np.pi * np.arange(self.n) / self.n
            return tuple(np.meshgrid(x, x, indexing="ij"))
        x, _ = gauss_legendre(self.n_lat)
        theta = np.arccos(x)
        phi = 2.0 * np.pi * np.arange(self.n_lon) / self.n_lon
        return tuple(np.meshgrid(theta, phi, indexing="ij"))

    def quadrature_weights(self):
        if self.manifold is Manifold.CIRCLE:
            return np.full(self.shape, 2.0 * np.pi / self.n)
        if self.manifold is Manifold.TORUS2:
            return np.full(self.shape, (2.0 * np.pi / self.n) ** 2)
        _, w = gauss_legendre(self.n_lat)
        return np.repeat(w[:, None] * (2.0 * np.pi / self.n_lon), self.n_lon, axis=1)


@dataclass
class SampledFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise GridError(f"samples of shape {self.values.shape} do not match grid {self.grid.shape}")

    @property
    def manifold(self):
        return self.grid.manifold

    def l2_norm_squared(self):
        return float(np.sum(self.grid.quadrature_weights() * np.abs(self.values) ** 2))


@lru_cache(maxsize=32)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _top_frequency(op, j_max):
    labels = level_table(op, j_max).labels
    if op.manifold is Manifold.SPHERE2:
        return j_max
    return int(np.max(np.abs(labels))) if labels.size else 0


def default_grid(op, j_max):
    """Grid resolving levels 0..j_max: N = 4 * top frequency on circle/torus."""
    K = max(1, _top_frequency(op, j_max))
    if op.manifold is Manifold.SPHERE2:
        return Grid(Manifold.SPHERE2, n_lat=j_max + 1, n_lon=2 * j_max + 2)
    return Grid(op.manifold, n=4 * K)


def sample(op, func, grid):
    """Evaluate ``func`` on the grid: func(x), func(x1, x2) or func(theta, phi)."""
    if grid.manifold is not op.manifold:
        raise GridError("grid and operator live on different manifolds")
    return SampledFunction(grid, func(*grid.coords()))


def _check_grid(op, grid, j_max):
    if grid.manifold is not op.manifold:
        raise GridError("grid and operator live on different manifolds")
    if op.manifold is Manifold.SPHERE2:
        if grid.n_lat < j_max + 1 or grid.n_lon < 2 * j_max + 1:
            raise GridError(
                f"sphere grid {grid.n_lat}x{grid.n_lon} too coarse for l_max = {j_max} "
                f"(need n_lat >= {j_max + 1}, n_lon >= {2 * j_max + 1})"
            )
        return
    K = _top_frequency(op, j_max)
    if grid.n < 2 * K + 1:
        raise GridError(f"grid of {grid.n} points cannot resolve frequency {K} (need >= {2 * K + 1})")


@lru_cache(maxsize=8)
def _sphere_tables(lmax, n_lat):
    x, _ = gauss_legendre(n_lat)
    tabs = tuple(legendre_m(m, lmax, x) for m in range(lmax + 1))
    for t in tabs:
        t.flags.writeable = False
    return tabs


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------


def forward(op, f, j_max):
    """Coefficients (f, e_j^k) for levels 0..j_max by exact quadrature."""
    grid = f.grid
    _check_grid(op, grid, j_max)
    tab = level_table(op, j_max)
    if op.manifold is Manifold.CIRCLE:
        F = np.fft.fft(f.values)
        k = tab.labels[:, 0] % grid.n
        coeffs = F[k] * (math.sqrt(2.0 * math.pi) / grid.n)
    elif op.manifold is Manifold.TORUS2:
        F = np.fft.fft2(f.values)
        k1 = tab.labels[:, 0] % grid.n
        k2 = tab.labels[:, 1] % grid.n
        coeffs = F[k1, k2] * (2.0 * math.pi / grid.n**2)
    else:
        _, w = gauss_legendre(grid.n_lat)
        F = np.fft.fft(f.values, axis=1) * (2.0 * math.pi / grid.n_lon)
        Fw = F * w[:, None]
        tabs = _sphere_tables(j_max, grid.n_lat)
        coeffs = np.zeros(tab.size, dtype=np.complex128)
        off = tab.offsets
        for m in range(j_max + 1):
            P = tabs[m]
            ls = np.arange(m, j_max + 1)
            pos = np.einsum("li,i->l", P, Fw[:, m])
            coeffs[off[ls] + ls + m] = pos
            if m:
                neg = np.einsum("li,i->l", P, Fw[:, grid.n_lon - m]) * (-1) ** m
                coeffs[off[ls] + ls - m] = neg
    return SpectralVector(op, coeffs, j_max)


def inverse(v, grid=None):
    """Synthesize sum_j sum_k f^(j,k) e_j^k on the grid."""
    op = v.operator
    if grid is None:
        grid = default_grid(op, v.j_max)
    _check_grid(op, grid, v.j_max)
    c = v.effective()
    tab = v.table
    if op.manifold is Manifold.CIRCLE:
        C = np.zeros(grid.n, dtype=np.complex128)
        np.add.at(C, tab.labels[:, 0] % grid.n, c)
        vals = np.fft.ifft(C) * (grid.n / math.sqrt(2.0 * math.pi))
    elif op.manifold is Manifold.TORUS2:
        C = np.zeros((grid.n, grid.n), dtype=np.complex128)
        np.add.at(C, (tab.labels[:, 0] % grid.n, tab.labels[:, 1] % grid.n), c)
        vals = np.fft.ifft2(C) * (grid.n**2 / (2.0 * math.pi))
    else:
        tabs = _sphere_tables(v.j_max, grid.n_lat)
        G = np.zeros((grid.n_lat, grid.n_lon), dtype=np.complex128)
        off = tab.offsets
        for m in range(v.j_max + 1):
            P = tabs[m]
            ls = np.arange(m, v.j_max + 1)
            G[:, m] += np.einsum("li,l->i", P, c[off[ls] + ls + m])
            if m:
                G[:, grid.n_lon - m] += np.einsum("li,l->i", P, c[off[ls] + ls - m]) * (-1) ** m
        vals = np.fft.ifft(G, axis=1) * grid.n_lon
    return SampledFunction(grid, vals)


def plancherel_residual(op, f, j_max):
    """| ||f||^2 - sum_j ||f^(j)||_HS^2 | / ||f||^2 with ||f|| by grid quadrature."""
    norm2 = f.l2_norm_squared()
    if norm2 == 0.0:
        return 0.0
    v = forward(op, f, j_max)
    coeff2 = float(np.sum(np.abs(v.coeffs) ** 2))
    return abs(norm2 - coeff2) / norm2


# --------------------------------------------------------------------------
# spectral operators
# --------------------------------------------------------------------------


def _rebalance(coeffs, log_offset, offsets):
    """Move each block's magnitude into its offset when it drifts out of range."""
    sq = np.add.reduceat(np.abs(coeffs) ** 2, offsets[:-1])
    with np.errstate(divide="ignore"):
        lh = 0.5 * np.log(sq)
    for j in np.flatnonzero(np.isfinite(lh) & (np.abs(lh) > _FOLD_LIMIT)):
        coeffs[offsets[j] : offsets[j + 1]] *= math.exp(-lh[j])
        log_offset[j] += lh[j]


def apply_power(v, m):
    """E^m in the spectral domain: level j is scaled by lambda_j^m (in log-space)."""
    if int(m) != m or m < 0:
        raise ValueError("power must be a non-negative integer")
    if m == 0:
        return v.copy()
    out = v.copy()
    lam = v.lam
    zero = lam == 0.0
    with np.errstate(divide="ignore"):
        out.log_offset = np.where(zero, 0.0, v.log_offset + m * np.log(np.where(zero, 1.0, lam)))
    o = v.table.offsets
    for j in np.flatnonzero(zero):
        out.coeffs[o[j] : o[j + 1]] = 0.0
    return out


def log_power_norm(v, m):
    """log ||E^m f||_{L^2} = 0.5 log sum_j lambda_j^{2m} ||f^(j)||_HS^2."""
    lh = v.log_hs_norms()
    lam = v.lam
    if m == 0:
        terms = 2.0 * lh
    else:
        live = lam > 0
        terms = np.full(lh.shape, -np.inf)
        terms[live] = 2.0 * (lh[live] + m * np.log(lam[live]))
    top = np.max(terms)
    if not np.isfinite(top):
        return -np.inf
    return 0.5 * (top + math.log(np.sum(np.exp(terms - top))))


def apply_derivative(v, alpha):
    """d^alpha on the circle (alpha int) or torus (alpha pair): mode k gets (i k)^alpha."""
    op = v.operator
    if op.manifold is Manifold.SPHERE2:
        raise ValueError("coordinate derivatives are only defined on the circle and torus")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=np.int64))
    if alpha.shape != (op.n,) or np.any(alpha < 0):
        raise ValueError(f"need a multi-index of length {op.n} with non-negative entries")
    if not alpha.any():
        return v.copy()
    labels = v.table.labels
    with np.errstate(divide="ignore"):
        logfac = np.sum(np.where(alpha > 0, alpha * np.log(np.abs(labels).astype(np.float64)), 0.0), axis=1)
    phase = 1j ** int(alpha.sum()) * np.prod(np.sign(labels) ** alpha, axis=1)
    lvl = v.table.level_of_mode()
    finite = np.isfinite(logfac)
    top = np.full(v.j_max + 1, -np.inf)
    np.maximum.at(top, lvl[finite], logfac[finite])
    shift = np.where(np.isfinite(top), top, 0.0)
    fac = np.where(finite, np.exp(np.where(finite, logfac, 0.0) - shift[lvl]), 0.0) * phase
    out = SpectralVector(op, v.coeffs * fac, v.j_max, v.log_offset + shift)
    _rebalance(out.coeffs, out.log_offset, out.table.offsets)
    return out


def random_bandlimited(op, j_max, rng):
    """Standard complex Gaussian coefficients on levels 0..j_max."""
    n = level_table(op, j_max).size
    re = rng.normal(n)
    im = rng.normal(n)
    return SpectralVector(op, (re + 1j * im) / math.sqrt(2.0), j_max)
