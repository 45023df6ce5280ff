"""Model Laplacians on the circle, the flat torus T^2 and the round sphere S^2.

Eigenvalues are grouped into levels j = 0, 1, 2, ... of distinct values with
their full eigenspaces.  Basis conventions ("v1"):

* circle: e_k(x) = (2 pi)^{-1/2} exp(i k x), x in [0, 2 pi); level j holds
  k = -j, +j (in that order), level 0 holds k = 0.
* torus: e_k(x) = (2 pi)^{-1} exp(i k.x); a level holds every lattice point
  with the same |k|^2, sorted lexicographically.
* sphere: complex Y_l^m with the Condon-Shortley phase, orthonormal for the
  area measure (total area 4 pi); level l holds m = -l..l.
"""

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from ._kernels import legendre_m


class Manifold(str, enum.Enum):
    CIRCLE = "circle"
    TORUS2 = "torus2"
    SPHERE2 = "sphere2"


_DIM = {Manifold.CIRCLE: 1, Manifold.TORUS2: 2, Manifold.SPHERE2: 2}


@dataclass(frozen=True)
class ModelOperator:
    """E = -Laplacian + shift on one of the model manifolds (order nu = 2)."""

    manifold: Manifold
    shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold(self.manifold))
        if not self.shift >= 0:
            raise ValueError("shift must be >= 0")
        object.__setattr__(self, "shift", float(self.shift))

    @property
    def n(self):
        return _DIM[self.manifold]

    @property
    def nu(self):
        return 2

    def shifted(self, c):
        return ModelOperator(self.manifold, self.shift + c)


@dataclass(frozen=True)
class SpectrumLevel:
    j: int
    lam: float
    d: int
    labels: np.ndarray = field(compare=False, repr=False)


@dataclass(frozen=True)
class LevelTable:
    """Flat description of levels 0..j_max: eigenvalues, multiplicities, mode labels."""

    lam: np.ndarray
    d: np.ndarray
    offsets: np.ndarray
    labels: np.ndarray

    @property
    def j_max(self):
        return self.lam.shape[0] - 1

    @property
    def size(self):
        return int(self.offsets[-1])

    def level_of_mode(self):
        return np.repeat(np.arange(self.lam.shape[0]), self.d)

    def level(self, j):
        a, b = self.offsets[j], self.offsets[j + 1]
        return SpectrumLevel(j, float(self.lam[j]), int(self.d[j]), self.labels[a:b])


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def _torus_norms(R):
    """Lattice points with k1^2 + k2^2 <= R, grouped by norm."""
    K = int(math.isqrt(int(R)))
    ax = np.arange(-K, K + 1)
    k1, k2 = np.meshgrid(ax, ax, indexing="ij")
    k1 = k1.ravel()
    k2 = k2.ravel()
    nrm = k1 * k1 + k2 * k2
    keep = nrm <= R
    k1, k2, nrm = k1[keep], k2[keep], nrm[keep]
    order = np.lexsort((k2, k1, nrm))
    return nrm[order], np.stack([k1[order], k2[order]], axis=1)


@lru_cache(maxsize=64)
def _table(manifold, shift, j_max):
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    if manifold is Manifold.CIRCLE:
        j = np.arange(j_max + 1)
        lam = j.astype(np.float64) ** 2 + shift
        d = np.where(j == 0, 1, 2)
        labels = np.concatenate([[0], np.stack([-j[1:], j[1:]], axis=1).ravel()]).reshape(-1, 1)
    elif manifold is Manifold.SPHERE2:
        ls = np.arange(j_max + 1)
        lam = (ls * (ls + 1)).astype(np.float64) + shift
        d = 2 * ls + 1
        lab_l = np.repeat(ls, d)
        starts = np.concatenate([[0], np.cumsum(d)[:-1]])
        lab_m = np.arange(d.sum()) - np.repeat(starts, d) - lab_l
        labels = np.stack([lab_l, lab_m], axis=1)
    else:
        R = 4 * (j_max + 1)
        while True:
            nrm, pts = _torus_norms(R)
            uniq, counts = np.unique(nrm, return_counts=True)
            if uniq.size > j_max + 1:
                break
            R *= 2
        d = counts[: j_max + 1]
        lam = uniq[: j_max + 1].astype(np.float64) + shift
        labels = pts[: int(d.sum())]
    offsets = np.concatenate([[0], np.cumsum(d)]).astype(np.int64)
    d = np.asarray(d, dtype=np.int64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    _freeze(lam, d, offsets, labels)
    return LevelTable(lam, d, offsets, labels)


def level_table(op, j_max):
    return _table(op.manifold, op.shift, int(j_max))


def j_max_for(op, lambda_max):
    """Largest level index with eigenvalue <= lambda_max (-1 if none)."""
    top = lambda_max - op.shift
    if top < 0:
        return -1
    if op.manifold is Manifold.CIRCLE:
        return math.isqrt(int(math.floor(top)))
    if op.manifold is Manifold.SPHERE2:
        L = int((math.sqrt(1.0 + 4.0 * top) - 1.0) / 2.0) + 1
        while L * (L + 1) > top:
            L -= 1
        return L
    nrm, _ = _torus_norms(int(math.floor(top)))
    return np.unique(nrm).size - 1


def enumerate_levels(op, lambda_max):
    """All levels with eigenvalue <= lambda_max, in increasing order."""
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    J = j_max_for(op, lambda_max)
    if J < 0:
        return []
    tab = level_table(op, J)
    return [tab.level(j) for j in range(J + 1)]


# --------------------------------------------------------------------------
# basis evaluation
# --------------------------------------------------------------------------


def sphere_harmonics(l, theta, phi):
    """Y_l^m(theta, phi) for m = -l..l; shape (2l+1, npts)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    x = np.cos(theta)
    out = np.empty((2 * l + 1, x.size), dtype=np.complex128)
    for m in range(l + 1):
        lam_m = legendre_m(m, l, x)[-1]
        pos = lam_m * np.exp(1j * m * phi)
        out[l + m] = pos
        if m:
            out[l - m] = (-1) ** m * np.conj(pos)
    return out


def sphere_legendre_table(lmax, x):
    """Lambda_l^m(x) for 0 <= m <= l <= lmax as a list indexed by m of (lmax-m+1, nx) arrays."""
    return [legendre_m(m, lmax, x) for m in range(lmax + 1)]


def basis_eval(op, level, mode_index, x):
    """Value of the mode ``mode_index`` of ``level`` at the point ``x``.

    ``x`` is an angle on the circle, a pair (x1, x2) on the torus and
    (colatitude, longitude) on the sphere.
    """
    if not 0 <= mode_index < level.d:
        raise IndexError(f"mode index {mode_index} outside level of multiplicity {level.d}")
    lab = level.labels[mode_index]
    if op.manifold is Manifold.CIRCLE:
        return complex(np.exp(1j * lab[0] * float(x)) / math.sqrt(2.0 * math.pi))
    if op.manifold is Manifold.TORUS2:
        x1, x2 = x
        return complex(np.exp(1j * (lab[0] * x1 + lab[1] * x2)) / (2.0 * math.pi))
    theta, phi = x
    l, m = int(lab[0]), int(lab[1])
    val = legendre_m(abs(m), l, np.array([math.cos(theta)]))[-1, 0]
    if m < 0:
        val *= (-1) ** m
    return complex(val * np.exp(1j * m * phi))


def basis_values(op, j_max, points):
    """Every mode of levels 0..j_max at the given points; shape (modes, npts)."""
    tab = level_table(op, j_max)
    if op.manifold is Manifold.CIRCLE:
        x = np.atleast_1d(np.asarray(points, dtype=np.float64))
        return np.exp(1j * np.outer(tab.labels[:, 0], x)) / math.sqrt(2.0 * math.pi)
    if op.manifold is Manifold.TORUS2:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.exp(1j * (tab.labels @ p.T)) / (2.0 * math.pi)
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x = np.cos(p[:, 0])
    out = np.empty((tab.size, x.size), dtype=np.complex128)
    for m in range(j_max + 1):
        ls = np.arange(m, j_max + 1)
        pos = legendre_m(m, j_max, x) * np.exp(1j * m * p[:, 1])
        out[ls * ls + ls + m] = pos
        if m:
            out[ls * ls + ls - m] = (-1) ** m * np.conj(pos)
    return out


# --------------------------------------------------------------------------
# multiplicity / Weyl checks
# --------------------------------------------------------------------------

TORUS_SERIES_LIMIT = 1 << 22


def _level_chunks(op, lambda_max, chunk=1 << 20):
    top = lambda_max - op.shift
    if op.manifold is Manifold.TORUS2:
        if top > TORUS_SERIES_LIMIT:
            raise ValueError(f"torus series diagnostics limited to lambda_max <= {TORUS_SERIES_LIMIT}")
        R = int(math.floor(top))
        counts = np.zeros(R + 1, dtype=np.int64)
        K = math.isqrt(R)
        k2 = np.arange(-K, K + 1, dtype=np.int64) ** 2
        for a in range(-K, K + 1, 256):
            k1 = np.arange(a, min(K + 1, a + 256), dtype=np.int64)
            n = (k1 * k1)[:, None] + k2[None, :]
            counts += np.bincount(n[n <= R], minlength=R + 1)
        nz = np.flatnonzero(counts)
        yield nz.astype(np.float64) + op.shift, counts[nz]
        return
    J = j_max_for(op, lambda_max)
    for a in range(0, J + 1, chunk):
        j = np.arange(a, min(J + 1, a + chunk), dtype=np.float64)
        if op.manifold is Manifold.CIRCLE:
            yield j * j + op.shift, np.where(j == 0, 1, 2)
        else:
            yield j * (j + 1) + op.shift, 2 * j + 1


@dataclass
class SeriesDiagnostics:
    q: float
    partial_sum: float
    shell_sums: np.ndarray
    ratio: float
    tail_estimate: float
    verdict: str
    monotone_growth: bool


@dataclass
class WeylReport:
    manifold: str
    lambda_max: float
    n_levels: int
    multiplicity_witness: float
    multiplicity_exponent: float
    series: list
    sup_witness: float
    sup_exponent_expected: float
    sup_exponent_fitted: float
    warnings: list

    def series_for(self, q):
        for s in self.series:
            if abs(s.q - q) < 1e-12:
                return s
        raise KeyError(q)


def series_diagnostics(op, lambda_max, q, window=6):
    """Partial sums of d_j (1 + lambda_j)^(-q), j >= 1, grouped in dyadic shells of 1 + lambda.

    Shell m collects 2^m <= 1 + lambda < 2^(m+1).  The tail estimate beyond
    the last complete shell extrapolates the fitted shell ratio geometrically.
    """
    total = 0.0
    shells = {}
    for lam, d in _level_chunks(op, lambda_max):
        keep = lam > op.shift if op.shift > 0 else lam > 0
        lam, d = lam[keep], d[keep]
        if lam.size == 0:
            continue
        terms = d * np.exp(-q * np.log1p(lam))
        total += float(np.sum(terms))
        _, e = np.frexp(1.0 + lam)
        idx = e - 1
        sums = np.bincount(idx, weights=terms)
        for m in np.flatnonzero(sums):
            shells[int(m)] = shells.get(int(m), 0.0) + float(sums[m])
    # complete shells: every lambda with 1 + lambda < 2^(m+1) is inside the range
    last = int(math.floor(math.log2(1.0 + lambda_max))) - 1
    while last >= 0 and 2.0 ** (last + 1) - 1.0 > lambda_max:
        last -= 1
    ms = sorted(m for m in shells if m <= last)
    sums = np.array([shells[m] for m in ms])
    if sums.size < window:
        return SeriesDiagnostics(q, total, sums, float("nan"), float("nan"), "inconclusive", False)
    tail_m = np.array(ms[-window:], dtype=np.float64)
    tail_s = np.log(sums[-window:])
    slope = stats.theilslopes(tail_s, tail_m)[0]
    ratio = float(math.exp(slope))
    steps = np.diff(sums[-window:])
    growing = bool(np.all(steps >= 0))
    beyond = sum(v for m, v in shells.items() if m > last)
    if ratio < 1.0 and sums[-1] < sums[-window]:
        tail = max(0.0, sums[-1] * ratio / (1.0 - ratio) - beyond)
        verdict = "converges"
    elif ratio >= 1.0 and sums[-1] >= sums[-window]:
        tail = float("inf")
        verdict = "diverges"
    else:
        tail = float("nan")
        verdict = "inconclusive"
    return SeriesDiagnostics(q, total, sums, ratio, tail, verdict, growing)


def _sup_norms(op, J, grid):
    """Grid estimate of max_k sup_x |e_j^k(x)| for levels 1..J."""
    lam = level_table(op, J).lam[1:]
    if op.manifold is Manifold.SPHERE2:
        theta = np.linspace(0.0, math.pi, grid)
        x = np.cos(theta)
        sup = np.zeros(J)
        for m in range(J + 1):
            vals = np.abs(legendre_m(m, J, x))
            rows = vals.max(axis=1)
            ls = np.arange(m, J + 1)
            sel = ls >= 1
            np.maximum.at(sup, ls[sel] - 1, rows[sel])
        return lam, sup
    x = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
    tab = level_table(op, J)
    sup = np.zeros(J)
    for j in range(1, J + 1):
        labs = tab.level(j).labels
        if op.manifold is Manifold.CIRCLE:
            v = np.exp(1j * np.outer(labs[:, 0], x)) / math.sqrt(2.0 * math.pi)
        else:
            v = np.exp(1j * (labs[:, :1] * x[None, :])) / (2.0 * math.pi)
        sup[j - 1] = np.abs(v).max()
    return lam, sup


def weyl_checks(op, lambda_max, sup_levels=64, grid=257):
    """Multiplicity bound, convergence of sum d_j (1+lambda_j)^-q, sup-norm growth."""
    warnings = []
    ratio_n = op.n / op.nu
    n_levels = 0
    witness = 0.0
    for lam, d in _level_chunks(op, lambda_max):
        n_levels += lam.size
        if lam.size:
            witness = max(witness, float(np.max(d / (1.0 + lam) ** ratio_n)))
    J = n_levels - 1
    if n_levels < 20:
        warnings.append(f"insufficient levels: {n_levels} < 20 below lambda_max = {lambda_max:g}")
    Jm = max(J, 0)
    series = [series_diagnostics(op, lambda_max, q) for q in (ratio_n - 0.25, ratio_n + 0.25, ratio_n + 1.0)]
    for s in series:
        if s.verdict == "inconclusive":
            warnings.append(f"series q = {s.q:g}: too few complete dyadic shells for a verdict")
    Js = min(Jm, sup_levels)
    sup_w = float("nan")
    fitted = float("nan")
    expected = (op.n - 1) / (2.0 * op.nu)
    if Js >= 1:
        lam_s, sup = _sup_norms(op, Js, grid)
        sup_w = float(np.max(sup / lam_s**expected))
        if Js >= 4:
            fitted = float(np.polyfit(np.log(lam_s[Js // 2 :]), np.log(sup[Js // 2 :]), 1)[0])
    return WeylReport(
        manifold=op.manifold.value,
        lambda_max=float(lambda_max),
        n_levels=n_levels,
        multiplicity_witness=witness,
        multiplicity_exponent=ratio_n,
        series=series,
        sup_witness=sup_w,
        sup_exponent_expected=expected,
        sup_exponent_fitted=fitted,
        warnings=warnings,
    )
