"""Coefficient vectors with prescribed level norms, plus closed-form references."""

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import SplitMix64
from .spectrum import Manifold, ModelOperator, basis_values, level_table
from .transform import Grid, SampledFunction, SpectralVector
from .weights import AssociatedFunction, WeightError, check_conditions

MODELS = ("exponential", "associated", "polynomial", "custom")
SPLITS = ("first", "equal", "random")


@dataclass
class DecayProfile:
    """Target ||f^(j)||_HS = scale * profile(lambda_j).

    * ``exponential``: exp(-L lambda^{g/nu}); a negative L gives growth
    * ``associated``: exp(-M(L lambda^{1/nu})) for ``weights``
    * ``polynomial``: (1 + lambda)^{-p}
    * ``custom``: ``callback(lam_array)`` returns the log norms

    ``phase`` is ``"zero"`` or ``"random"``; ``split`` distributes the level
    norm over the d_j modes (``"first"``, ``"equal"`` or ``"random"``).
    """

    model: str
    L: float = 1.0
    g: float = 1.0
    p: float = 0.0
    weights: object = None
    callback: object = None
    scale: float = 1.0
    phase: str = "random"
    split: str = "equal"
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown profile model {self.model!r}")
        if self.phase not in ("zero", "random"):
            raise ValueError("phase must be 'zero' or 'random'")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.model == "exponential" and (self.g <= 0 or self.L == 0):
            raise ValueError("exponential profile needs g > 0 and L != 0")
        if self.model == "associated":
            if self.weights is None or self.L <= 0:
                raise ValueError("associated profile needs weights and L > 0")
        if self.model == "polynomial" and not math.isfinite(self.p):
            raise ValueError("polynomial order must be finite")
        if self.model == "custom" and not callable(self.callback):
            raise ValueError("custom profile needs a callback")

    def describe(self):
        d = {"model": self.model, "scale": self.scale, "phase": self.phase, "split": self.split, "seed": self.seed}
        if self.model == "exponential":
            d.update(L=self.L, g=self.g)
        elif self.model == "associated":
            d.update(L=self.L, weights=repr(self.weights))
        elif self.model == "polynomial":
            d.update(p=self.p)
        return d


def profile_log_norms(op, profile, lam):
    """log of the target level norms at eigenvalues ``lam``."""
    lam = np.asarray(lam, dtype=np.float64)
    nu = op.nu
    if profile.model == "exponential":
        out = -profile.L * lam ** (profile.g / nu)
    elif profile.model == "associated":
        w = profile.weights
        check_conditions(w, 64)
        if w.certificate is None:
            raise WeightError(f"{w!r} is not certified for (M.0)-(M.2)")
        out = -AssociatedFunction(w).evaluate(profile.L * lam ** (1.0 / nu))[0]
    elif profile.model == "polynomial":
        out = -profile.p * np.log1p(lam)
    else:
        out = np.asarray(profile.callback(lam), dtype=np.float64)
        if out.shape != lam.shape:
            raise ValueError("custom callback must return one value per level")
    return out + math.log(profile.scale)


def _unit_blocks(d, split, phase, rng):
    """Per-mode coefficients with unit norm inside each level."""
    n = int(d.sum())
    starts = np.concatenate([[0], np.cumsum(d)[:-1]])
    lvl = np.repeat(np.arange(d.size), d)
    if split == "first":
        mag = np.zeros(n)
        mag[starts] = 1.0
    elif split == "equal":
        mag = 1.0 / np.sqrt(d[lvl].astype(np.float64))
    else:
        # exponential spacings give a uniform point on the simplex
        e = -np.log1p(-rng.uniform(n)) + 1e-300
        tot = np.add.reduceat(e, starts)
        mag = np.sqrt(e / tot[lvl])
    if phase == "random":
        return mag * rng.phases(n)
    return mag.astype(np.complex128)


def from_profile(op, profile, j_max):
    """SpectralVector whose level j has HS norm equal to the profile at lambda_j."""
    tab = level_table(op, j_max)
    logs = profile_log_norms(op, profile, tab.lam)
    rng = SplitMix64(profile.seed)
    unit = _unit_blocks(tab.d, profile.split, profile.phase, rng)
    v = SpectralVector(op, unit, j_max, logs)
    return v.normalized()


def poisson_kernel(r, j_max, n=None):
    """Samples of (1-r^2)/(1-2r cos x+r^2) and its exact coefficients sqrt(2 pi) r^|k|."""
    if not 0.0 < r < 1.0:
        raise ValueError("Poisson kernel needs 0 < r < 1")
    op = ModelOperator(Manifold.CIRCLE)
    grid = Grid(Manifold.CIRCLE, n=n or 4 * max(1, j_max))
    (x,) = grid.coords()
    samples = SampledFunction(grid, (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(x) + r * r))
    k = level_table(op, j_max).labels[:, 0]
    exact = SpectralVector(op, math.sqrt(2.0 * math.pi) * r ** np.abs(k).astype(np.float64), j_max)
    return samples, exact


def delta_at(op, x0, j_max):
    """Coefficients conj(e_j^k(x0)) of the point evaluation at x0."""
    pts = np.asarray(x0, dtype=np.float64)
    if op.manifold is Manifold.CIRCLE:
        pts = np.atleast_1d(pts)[:1]
    else:
        pts = pts.reshape(1, 2)
        if op.manifold is Manifold.SPHERE2 and not 0.0 <= pts[0, 0] <= math.pi:
            raise ValueError("sphere points are (theta, phi) with 0 <= theta <= pi")
    return SpectralVector(op, np.conj(basis_values(op, j_max, pts)[:, 0]), j_max)
