"""Regularity classification from the level norms ||f^(j)||_HS.

Every decision works on ``log ||f^(j)||_HS`` so that coefficients far outside
double range (ultradistribution growth, deep decay) are handled exactly.

Quantifier tests use two finite-data criteria:

* grid stability: on the dyadic grid L = 2^t, t = -20..20, the sequence
  F_L(j) = log h_j + M(L x_j) (x_j = lambda_j^{1/nu}) is *stable* when the
  Theil-Sen trend over the top quartile of levels predicts a rise of at most
  ``STABLE_TOL`` across that quartile;
* critical-L trend: for level pairs (a, b) with x_b ~ 2 x_a the neutral L
  solves M(L x_b) - M(L x_a) = log h_a - log h_b.  The Theil-Sen slope of
  log L against log x tells whether the neutral L drifts to 0
  (slope < -TREND_TOL), stays bounded, or grows without bound
  (slope > TREND_TOL).

The grid alone cannot see slow drifts at a finite truncation (for L = 2^-20
the growth of M(L x) only starts far beyond any level we have), which is what
the trend test is for.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .weights import (
    K_MAX,
    AssociatedFunction,
    GrowthError,
    WeightError,
    check_conditions,
    is_log_convex_sequence,
    make_weights,
)

FLOOR = 1e-14
MIN_LEVELS = 12
L_EXPONENTS = tuple(range(-20, 21))
STABLE_TOL = 0.05
TREND_TOL = 0.15
G_RANGE = (0.05, 1.2)
G_GRID = 24
ANALYTIC_TOL = 0.05
AIC_EXTRA = 2
PEAK_FRACTION = 0.75
MIN_VALID_POWERS = 6
SUPERLINEAR_TOL = 0.5
CRIT_EXPONENTS = (-30, 30)
PAIRING_TOL = 1e-6

_TS_POINTS = 512
_MSE_FLOOR = 1e-24


class ClassificationError(ValueError):
    """Input cannot be classified (too few usable levels, wrong model, ...)."""


# --------------------------------------------------------------------------
# small numerical helpers
# --------------------------------------------------------------------------


def theil_sen(x, y):
    """Median pairwise slope; at most 512 evenly spaced points are used."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        return 0.0
    if n > _TS_POINTS:
        idx = np.unique(np.round(np.linspace(0, n - 1, _TS_POINTS)).astype(np.int64))
        x, y = x[idx], y[idx]
    if np.all(x == x[0]):
        return 0.0
    return float(stats.theilslopes(y, x)[0])


def _lstsq(X, y):
    """Least squares by centred normal equations; returns (coef, rss)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mx = X.mean(axis=0)
    my = y.mean()
    Xc = X - mx
    yc = y - my
    G = np.einsum("ij,ik->jk", Xc, Xc)
    b = np.einsum("ij,i->j", Xc, yc)
    try:
        slope = np.linalg.solve(G, b)
    except np.linalg.LinAlgError:
        slope = np.linalg.pinv(G) @ b
    intercept = my - float(mx @ slope)
    res = yc - Xc @ slope
    return intercept, slope, float(np.sum(res * res))


def _logsumexp(a):
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return -np.inf
    top = np.max(a)
    if not np.isfinite(top):
        return top
    return float(top + math.log(np.sum(np.exp(a - top))))


def _clean(x):
    """JSON-friendly float (None for non-finite)."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


# --------------------------------------------------------------------------
# level data
# --------------------------------------------------------------------------


@dataclass
class LevelData:
    lam: np.ndarray
    x: np.ndarray
    logh: np.ndarray
    usable: np.ndarray  # indices above the floor
    finite: np.ndarray  # indices with a nonzero block
    floored: int


def level_data(v, floor=FLOOR):
    logh = v.log_hs_norms()
    fin = np.isfinite(logh)
    top = np.max(logh[fin]) if fin.any() else -np.inf
    keep = fin & (logh >= top + math.log(floor)) if fin.any() else fin
    lam = np.asarray(v.lam, dtype=np.float64)
    return LevelData(
        lam=lam,
        x=lam ** (1.0 / v.operator.nu),
        logh=logh,
        usable=np.flatnonzero(keep),
        finite=np.flatnonzero(fin),
        floored=int(fin.sum() - keep.sum()),
    )


def _assoc(w):
    method = "concave" if is_log_convex_sequence(w) else "scan"
    return AssociatedFunction(w, method=method)


def _require_certified(w):
    if w.certificate is None:
        check_conditions(w, 64)
    if w.certificate is None:
        raise WeightError(f"{w!r} is not certified for (M.0)-(M.2)")


def _r_cap(af):
    """Largest power of two at which M can be evaluated within K_MAX terms."""
    cap = getattr(af, "_r_cap", None)
    if cap is None:
        cap = 1.0
        while cap < 1e300:
            try:
                af.evaluate(2.0 * cap)
            except GrowthError:
                break
            cap *= 2.0
            if cap > 2.0 ** 80:
                break
        af._r_cap = cap
    return cap


def _M(af, r):
    """M at ``r``; NaN where r is beyond the evaluable range."""
    r = np.asarray(r, dtype=np.float64)
    out = np.full(r.shape, np.nan)
    ok = r <= _r_cap(af)
    if ok.any():
        out[ok] = af.evaluate(r[ok])[0]
    return out


# --------------------------------------------------------------------------
# decay fits
# --------------------------------------------------------------------------


@dataclass
class DecayFit:
    """One fitted model; ``log_C`` is the log of the amplitude constant."""

    model: str  # "polynomial" | "exponential" | "associated"
    log_C: float
    residual: float
    levels_used: tuple
    L: float = None
    g: float = None
    p: float = None
    aic: float = None
    g_error: float = None

    @property
    def C(self):
        return math.exp(self.log_C) if self.log_C < 709 else math.inf

    def as_dict(self):
        d = {"model": self.model, "log_C": _clean(self.log_C), "residual": _clean(self.residual)}
        d["levels_used"] = list(self.levels_used)
        for key in ("L", "g", "p", "aic", "g_error"):
            val = getattr(self, key)
            if val is not None:
                d[key] = _clean(val)
        return d


def _aic(rss, n, k):
    return n * math.log(max(rss / n, _MSE_FLOOR)) + 2 * k


def _stretched_rss(x, y):
    def rss(g):
        _, slope, r = _lstsq((x**g)[:, None], y)
        return r

    return rss


def _fit_stretched(x, y):
    rss = _stretched_rss(x, y)
    grid = np.linspace(G_RANGE[0], G_RANGE[1], G_GRID)
    vals = np.array([rss(g) for g in grid])
    i = int(np.argmin(vals))
    if 0 < i < G_GRID - 1 and vals[i] < vals[i - 1] and vals[i] < vals[i + 1]:
        res = optimize.minimize_scalar(
            rss, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", options={"xtol": 1e-12}
        )
        g = float(np.clip(res.x, *G_RANGE))
    else:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, G_GRID - 1)]
        res = optimize.minimize_scalar(rss, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        g = float(res.x)
    c, slope, r = _lstsq((x**g)[:, None], y)
    # curvature of the profile RSS gives the standard error of g
    n = x.size
    h = 1e-4
    d2 = (rss(min(g + h, 2.0)) - 2.0 * r + rss(max(g - h, 1e-3))) / (h * h)
    sigma2 = r / max(n - 3, 1)
    g_err = math.sqrt(2.0 * sigma2 / d2) if d2 > 0 else math.inf
    return g, float(c), float(-slope[0]), r, g_err


def fit_decay(v, weights=None, floor=FLOOR):
    """Polynomial, stretched-exponential and (with ``weights``) associated fits."""
    if v.is_zero():
        return []
    ld = level_data(v, floor)
    idx = ld.usable
    if idx.size < MIN_LEVELS:
        raise ClassificationError(f"only {idx.size} usable levels above the floor (need {MIN_LEVELS})")
    y = ld.logh[idx]
    n = idx.size
    span = (int(idx[0]), int(idx[-1]))

    c, slope, rss = _lstsq(np.log1p(ld.lam[idx])[:, None], y)
    poly = DecayFit("polynomial", float(c), math.sqrt(rss / n), span, p=float(-slope[0]), aic=_aic(rss, n, 2))

    g, c, L, rss, g_err = _fit_stretched(ld.x[idx], y)
    expo = DecayFit(
        "exponential", c, math.sqrt(rss / n), span, L=L, g=g, aic=_aic(rss, n, 2 + AIC_EXTRA), g_error=g_err
    )
    fits = [poly, expo]
    if weights is not None:
        km = komatsu_membership(v, weights, "roumieu", floor)
        if km.L is not None:
            af = _assoc(weights)
            model = km.log_C - _M(af, km.L * ld.x[idx])
            resid = y - model
            fits.append(
                DecayFit("associated", km.log_C, float(np.sqrt(np.mean(resid**2))), span, L=km.L)
            )
    return fits


def best_fit(fits):
    """The polynomial or stretched-exponential fit with the lower AIC."""
    poly, expo = fits[0], fits[1]
    return expo if expo.aic < poly.aic else poly


# --------------------------------------------------------------------------
# Gevrey order and smoothness
# --------------------------------------------------------------------------


@dataclass
class GevreyEstimate:
    s: float
    s_error: float
    g: float
    analytic: bool
    super_analytic: bool
    fit: DecayFit

    def as_dict(self):
        return {
            "s": _clean(self.s),
            "s_error": _clean(self.s_error),
            "g": _clean(self.g),
            "analytic": self.analytic,
            "super_analytic": self.super_analytic,
        }


def gevrey_order(v, floor=FLOOR, fits=None):
    """s = 1/g from the stretched-exponential fit; Analytic when |s - 1| <= 0.05."""
    fits = fits if fits is not None else fit_decay(v, floor=floor)
    if not fits:
        raise ClassificationError("zero vector has no Gevrey order")
    expo = fits[1]
    if best_fit(fits) is not expo or expo.L <= 0:
        raise ClassificationError("decay is not super-polynomial; the polynomial model fits better")
    s = 1.0 / expo.g
    ds = expo.g_error / expo.g**2
    return GevreyEstimate(
        s=s,
        s_error=ds,
        g=expo.g,
        analytic=abs(s - 1.0) <= ANALYTIC_TOL or s < 1.0,
        super_analytic=s < 1.0 - ANALYTIC_TOL,
        fit=expo,
    )


@dataclass
class SmoothnessResult:
    tier: str
    p: float
    sobolev_label: float
    superpolynomial: bool
    square_summable: bool
    level_exponent: float

    def as_dict(self):
        return {
            "tier": self.tier,
            "p": _clean(self.p),
            "sobolev_label": _clean(self.sobolev_label),
            "superpolynomial": self.superpolynomial,
            "square_summable": self.square_summable,
            "level_exponent": _clean(self.level_exponent),
        }


def _local_slopes(u, y, parts=4):
    edges = np.linspace(u[0], u[-1], parts + 1)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (u >= a) & (u <= b)
        out.append(theil_sen(u[m], y[m]) if m.sum() >= 2 else np.nan)
    return np.array(out)


def smoothness_class(v, floor=FLOOR, fits=None):
    """Sobolev / SquareIntegrable / Distribution / Smooth from the log-log profile."""
    fits = fits if fits is not None else fit_decay(v, floor=floor)
    ld = level_data(v, floor)
    idx = ld.usable
    u = np.log1p(ld.lam[idx])
    y = ld.logh[idx]
    p = fits[0].p
    op = v.operator
    label = p * op.nu - op.n / 2.0
    # level counting exponent: #levels up to Lambda ~ Lambda^kappa
    kappa = theil_sen(u[u > 0], np.log1p(idx[u > 0].astype(np.float64)))
    slopes = _local_slopes(u, y)
    steepening = bool(np.all(np.isfinite(slopes)) and slopes[0] - slopes[-1] > 1.0 and np.all(np.diff(slopes) < 0))
    expo = fits[1]
    superpoly = best_fit(fits) is expo and expo.L > 0 and steepening
    summable = 2.0 * p > kappa if not superpoly else True
    if superpoly:
        tier = "Smooth"
    elif not summable:
        tier = "Distribution"
    elif label > 0:
        tier = "Sobolev"
    else:
        tier = "SquareIntegrable"
    return SmoothnessResult(tier, p, label, superpoly, summable, kappa)


# --------------------------------------------------------------------------
# quantifier machinery
# --------------------------------------------------------------------------


def _stability(F, x, quartile):
    """Predicted rise of F across the top quartile (Theil-Sen)."""
    xs, Fs = x[quartile], F[quartile]
    slope = theil_sen(xs, Fs)
    return slope * (xs[-1] - xs[0])


def _critical_L(af, x0, x1, target, strict):
    """L_j = inf{L : M(L x1) - M(L x0) > target} (>= when not strict).

    Returns (L, clamped_low, clamped_high); searched over 2^-30..2^30.
    """
    n = target.size
    lo_e, hi_e = CRIT_EXPONENTS

    def cond(e, sub):
        L = np.exp2(e)
        d = _M(af, L * x1[sub]) - _M(af, L * x0[sub])
        bad = np.isnan(d)
        with np.errstate(invalid="ignore"):
            ok = d > target[sub] if strict else d >= target[sub]
        return ok & ~bad, bad

    lo = np.full(n, float(lo_e))
    hi = np.full(n, float(hi_e))
    clamp_lo = np.zeros(n, dtype=bool)
    clamp_hi = np.zeros(n, dtype=bool)
    all_idx = np.arange(n)
    ok0, bad0 = cond(np.zeros(n), all_idx)
    # bracket downwards
    down = all_idx[ok0]
    hi[down] = 0.0
    e = 0.0
    while down.size:
        e -= 1.0
        if e < lo_e:
            clamp_lo[down] = True
            break
        ok, _ = cond(np.full(down.size, e), down)
        lo[down[~ok]] = e
        hi[down[ok]] = e
        down = down[ok]
    # bracket upwards
    up = all_idx[~ok0]
    lo[up] = 0.0
    e = 0.0
    while up.size:
        e += 1.0
        if e > hi_e:
            clamp_hi[up] = True
            break
        ok, bad = cond(np.full(up.size, e), up)
        clamp_hi[up[bad]] = True
        lo[up[~ok & ~bad]] = e
        hi[up[ok]] = e
        up = up[~ok & ~bad]
    live = all_idx[~clamp_lo & ~clamp_hi]
    for _ in range(40):
        if not live.size:
            break
        mid = 0.5 * (lo[live] + hi[live])
        ok, bad = cond(mid, live)
        hi[live[ok | bad]] = mid[ok | bad]
        lo[live[~ok & ~bad]] = mid[~ok & ~bad]
    L = np.exp2(hi)
    L[clamp_lo] = 2.0**lo_e
    L[clamp_hi] = 2.0**hi_e
    return L, clamp_lo, clamp_hi


def _dyadic_pairs(x, sel):
    """Pairs (a, b) of levels with x_b ~ 2 x_a, anchors a in [x_top/8, x_top/2]."""
    xs = x[sel]
    top = xs[-1]
    anchors = np.flatnonzero((xs >= top / 8.0) & (xs <= top / 2.0) & (xs > 0))
    if anchors.size < 4:
        anchors = np.flatnonzero((xs > 0) & (xs <= top / 2.0))
    partner = np.searchsorted(xs, 2.0 * xs[anchors])
    partner = np.minimum(partner, xs.size - 1)
    lower = np.maximum(partner - 1, 0)
    closer = np.abs(xs[lower] - 2.0 * xs[anchors]) <= np.abs(xs[partner] - 2.0 * xs[anchors])
    partner = np.where(closer, lower, partner)
    keep = partner > anchors
    return sel[anchors[keep]], sel[partner[keep]]


def _trend(af, ld, sel, increments, strict):
    """Theil-Sen slope of log L_j vs log x over level pairs a factor 2 apart.

    A factor-2 gap spans many kinks of the piecewise linear M(e^t), so L_j
    varies smoothly instead of following the integer maximizer.
    """
    if sel.size < 4:
        return 0.0, np.array([]), 0
    a, b = _dyadic_pairs(ld.x, sel)
    if a.size < 2:
        return 0.0, np.array([]), 0
    target = increments(a, b)
    L, clo, chi = _critical_L(af, ld.x[a], ld.x[b], target, strict)
    xm = np.sqrt(ld.x[a] * ld.x[b])
    beta = theil_sen(np.log(xm), np.log(L))
    return beta, L, int(clo.sum() + chi.sum())


@dataclass
class MembershipResult:
    """Outcome of a coefficient-side membership test."""

    member: bool
    regime: str
    L: float  # dyadic witness (largest stable L), None if none
    log_C: float
    first_failing_L: float
    trend: float
    critical_L: float
    stable_exponents: list
    clamped: int = 0
    warnings: list = field(default_factory=list)

    @property
    def C(self):
        return math.exp(self.log_C) if self.log_C is not None and self.log_C < 709 else math.inf

    def as_dict(self):
        return {
            "member": self.member,
            "regime": self.regime,
            "L": _clean(self.L),
            "log_C": _clean(self.log_C),
            "first_failing_L": _clean(self.first_failing_L),
            "trend": _clean(self.trend),
            "critical_L": _clean(self.critical_L),
            "stable_exponents": list(self.stable_exponents),
            "clamped": self.clamped,
            "warnings": list(self.warnings),
        }


def _check_regime(regime):
    regime = regime.lower()
    if regime not in ("roumieu", "beurling"):
        raise ValueError("regime must be 'roumieu' or 'beurling'")
    return regime


def komatsu_membership(v, w, regime="roumieu", floor=FLOOR):
    """Coefficient-side test: sup_j h_j exp(M(L x_j)) finite for some/every L."""
    regime = _check_regime(regime)
    _require_certified(w)
    if v.operator.nu != w.nu:
        raise WeightError("weight sequence and operator disagree on nu")
    if v.is_zero():
        return MembershipResult(True, regime, 2.0 ** L_EXPONENTS[-1], -math.inf, None, math.inf, math.inf, list(L_EXPONENTS))
    ld = level_data(v, floor)
    sel = ld.usable
    if sel.size < MIN_LEVELS:
        raise ClassificationError(f"only {sel.size} usable levels above the floor (need {MIN_LEVELS})")
    af = _assoc(w)
    x = ld.x[sel]
    logh = ld.logh[sel]
    quart = np.arange(sel.size - max(4, -(-sel.size // 4)), sel.size)
    warnings = []
    stable, last_F, failing = [], None, None
    for t in L_EXPONENTS:
        M = _M(af, 2.0**t * x)
        if np.any(np.isnan(M)):
            warnings.append(f"M(L x) beyond evaluable range from L = 2^{t}")
            failing = 2.0**t
            break
        F = logh + M
        if _stability(F, x, quart) <= STABLE_TOL:
            stable.append(t)
            last_F = F
        else:
            # F_L rises faster for larger L, so the remaining grid is unstable too
            failing = 2.0**t
            break
    beta, Ls, clamped = _trend(af, ld, sel, lambda a, b: ld.logh[a] - ld.logh[b], strict=True)
    if clamped:
        warnings.append(f"{clamped} critical L values hit the search bounds")
    crit = float(np.median(Ls)) if Ls.size else None
    witness = 2.0 ** stable[-1] if stable else None
    log_C = float(np.max(last_F)) if last_F is not None else None
    if regime == "roumieu":
        member = bool(stable) and beta >= -TREND_TOL
    else:
        member = beta > TREND_TOL
    return MembershipResult(member, regime, witness, log_C, failing, beta, crit, stable, clamped, warnings)


@dataclass
class DefinitionResult:
    """Outcome of the ||E^m phi|| test."""

    member: bool
    regime: str
    h: float
    log_C: float
    superlinearity: float
    valid_powers: int
    truncation_dominated: bool
    log_norms: list
    komatsu: MembershipResult = None
    agreement: float = None

    @property
    def C(self):
        return math.exp(self.log_C) if self.log_C is not None and self.log_C < 709 else math.inf

    def as_dict(self):
        d = {
            "member": self.member,
            "regime": self.regime,
            "h": _clean(self.h),
            "log_C": _clean(self.log_C),
            "superlinearity": _clean(self.superlinearity),
            "valid_powers": self.valid_powers,
            "truncation_dominated": self.truncation_dominated,
            "log_norms": [_clean(t) for t in self.log_norms],
            "agreement": _clean(self.agreement),
        }
        if self.komatsu is not None:
            d["komatsu"] = self.komatsu.as_dict()
        return d


def power_log_norms(v, m_max, floor=FLOOR):
    """log ||E^m phi||_{L^2} for m = 0..m_max over the levels above the floor,
    and the eigenvalue carrying the largest term for each m."""
    ld = level_data(v, floor)
    sel = ld.usable
    lam = ld.lam[sel]
    logh = ld.logh[sel]
    out = np.empty(m_max + 1)
    peak = np.empty(m_max + 1)
    pos = lam > 0
    with np.errstate(divide="ignore"):
        loglam = np.where(pos, np.log(np.where(pos, lam, 1.0)), -np.inf)
    for m in range(m_max + 1):
        terms = 2.0 * logh if m == 0 else np.where(pos, 2.0 * (logh + m * loglam), -np.inf)
        out[m] = 0.5 * _logsumexp(terms)
        peak[m] = ld.x[sel][int(np.argmax(terms))]
    return out, peak


def definition_membership(op, v, w, m_max=40, regime="roumieu", floor=FLOOR):
    """Test ||E^m phi|| <= C h^{nu m} M_{nu m} from spectrally computed norms."""
    regime = _check_regime(regime)
    if m_max < 10:
        raise ValueError("m_max must be at least 10")
    if op.manifold is not v.operator.manifold:
        raise ValueError("operator and coefficients live on different manifolds")
    _require_certified(w)
    if v.is_zero():
        return DefinitionResult(True, regime, 0.0, -math.inf, 0.0, m_max + 1, False, [-math.inf] * (m_max + 1))
    nu = w.nu
    logn, peak = power_log_norms(v, m_max, floor)
    ms = np.arange(m_max + 1, dtype=np.float64)
    y = logn - w.log_values(nu * m_max)[nu * np.arange(m_max + 1)]
    ld = level_data(v, floor)
    x_top = float(np.max(ld.x[ld.usable]))
    valid = np.flatnonzero(peak <= PEAK_FRACTION * x_top)
    # keep the leading run of valid powers
    run = valid[: np.argmax(np.diff(np.append(valid, -2)) != 1) + 1] if valid.size else valid
    komatsu = komatsu_membership(v, w, regime, floor)
    if run.size < MIN_VALID_POWERS:
        return DefinitionResult(
            komatsu.member, regime, None, None, None, int(run.size), True, [float(t) for t in logn], komatsu
        )
    mv = ms[run]
    yv = y[run]
    mlogm = np.where(mv > 0, mv * np.log(np.maximum(mv, 1.0)), 0.0)
    _, coef, _ = _lstsq(np.column_stack([mv, mlogm]), yv)
    c = float(coef[1])
    _, b, _ = _lstsq(mv[:, None], yv)
    b = float(b[0])
    log_C = float(np.max(yv - b * mv))
    h = math.exp(b / nu)
    if regime == "roumieu":
        member = c <= SUPERLINEAR_TOL
    else:
        member = c < -SUPERLINEAR_TOL
    agreement = h * komatsu.L if komatsu.L is not None else None
    return DefinitionResult(member, regime, h, log_C, c, int(run.size), False, [float(t) for t in logn], komatsu, agreement)


# --------------------------------------------------------------------------
# duals and pairing
# --------------------------------------------------------------------------


@dataclass
class DualResult:
    verdict: str  # "RoumieuDual" | "BeurlingDual" | "neither"
    roumieu: bool
    beurling: bool
    L: float  # smallest stable dyadic L
    log_K: float
    trend: float
    stable_exponents: list
    clamped: int = 0
    warnings: list = field(default_factory=list)

    @property
    def K(self):
        return math.exp(self.log_K) if self.log_K is not None and self.log_K < 709 else math.inf

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "roumieu": self.roumieu,
            "beurling": self.beurling,
            "L": _clean(self.L),
            "log_K": _clean(self.log_K),
            "trend": _clean(self.trend),
            "stable_exponents": list(self.stable_exponents),
            "clamped": self.clamped,
            "warnings": list(self.warnings),
        }


def dual_growth(v, w):
    """Is ||u^(j)||_HS <= K exp(M(L x_j)) for every L (Roumieu) or some L (Beurling)?"""
    _require_certified(w)
    if v.is_zero():
        return DualResult("RoumieuDual", True, True, 2.0 ** L_EXPONENTS[0], -math.inf, -math.inf, list(L_EXPONENTS))
    ld = level_data(v)
    sel = ld.finite
    if sel.size < MIN_LEVELS:
        raise ClassificationError(f"only {sel.size} nonzero levels (need {MIN_LEVELS})")
    af = _assoc(w)
    x = ld.x[sel]
    logh = ld.logh[sel]
    quart = np.arange(sel.size - max(4, -(-sel.size // 4)), sel.size)
    warnings = []
    stable, first_F = [], None
    for t in L_EXPONENTS:
        M = _M(af, 2.0**t * x)
        if np.any(np.isnan(M)):
            warnings.append(f"M(L x) beyond evaluable range from L = 2^{t}")
            break
        G = logh - M
        if _stability(G, x, quart) <= STABLE_TOL:
            # larger L only flattens G further
            stable = [u for u in L_EXPONENTS if u >= t]
            first_F = G
            break
    beta, Ls, clamped = _trend(af, ld, sel, lambda a, b: ld.logh[b] - ld.logh[a], strict=False)
    if clamped and not np.all(Ls == 2.0 ** CRIT_EXPONENTS[0]):
        warnings.append(f"{clamped} critical L values hit the search bounds")
    every = bool(stable) and stable[0] == L_EXPONENTS[0]
    roumieu = every or beta < -TREND_TOL
    beurling = bool(stable) and (beta <= TREND_TOL or roumieu)
    verdict = "RoumieuDual" if roumieu else ("BeurlingDual" if beurling else "neither")
    L = 2.0 ** stable[0] if stable else None
    log_K = float(np.max(first_F)) if first_F is not None else None
    return DualResult(verdict, roumieu, beurling, L, log_K, beta, stable, clamped, warnings)


@dataclass
class PairingResult:
    status: str  # "converged" | "diverged" | "inconclusive"
    log_partial_sum: float
    tail_estimate: float
    model: str
    decay_rate: float
    log_terms: list

    @property
    def partial_sum(self):
        return math.exp(self.log_partial_sum) if self.log_partial_sum < 709 else math.inf

    def as_dict(self):
        return {
            "status": self.status,
            "log_partial_sum": _clean(self.log_partial_sum),
            "tail_estimate": _clean(self.tail_estimate),
            "model": self.model,
            "decay_rate": _clean(self.decay_rate),
        }


def pairing_converges(u, phi, tol=PAIRING_TOL):
    """Partial sums of sum_j sum_k |u(j,k)| |phi(j,k)| with a Cauchy-tail estimate."""
    if u.operator != phi.operator or u.j_max != phi.j_max:
        raise ValueError("pairing needs the same operator and truncation")
    with np.errstate(divide="ignore"):
        lt = (
            np.log(np.abs(u.coeffs))
            + np.log(np.abs(phi.coeffs))
            + np.repeat(u.log_offset + phi.log_offset, u.table.d)
        )
    starts = u.table.offsets[:-1]
    level_terms = np.array([_logsumexp(lt[a:b]) for a, b in zip(starts, u.table.offsets[1:])])
    fin = np.flatnonzero(np.isfinite(level_terms))
    if not fin.size:
        return PairingResult("converged", -math.inf, 0.0, "zero", math.inf, [])
    log_S = _logsumexp(level_terms[fin])
    tail_idx = fin[fin.size - max(4, -(-fin.size // 4)) :]
    if tail_idx.size < 4:
        return PairingResult("inconclusive", log_S, math.inf, "none", 0.0, level_terms.tolist())
    jj = tail_idx.astype(np.float64)
    yt = level_terms[tail_idx]
    a_geo = theil_sen(jj, yt)
    a_pow = theil_sen(np.log1p(jj), yt)
    res_geo = float(np.median(np.abs(yt - yt[-1] - a_geo * (jj - jj[-1]))))
    res_pow = float(np.median(np.abs(yt - yt[-1] - a_pow * (np.log1p(jj) - np.log1p(jj[-1])))))
    last = yt[-1]
    if res_geo <= res_pow:
        model, rate = "geometric", -a_geo
        if a_geo < 0:
            rho = math.exp(a_geo)
            log_tail = last + math.log(rho / (1.0 - rho))
        else:
            log_tail = math.inf
        diverging = a_geo >= 0
    else:
        model, rate = "power", -a_pow
        if -a_pow > 1.0:
            log_tail = last + math.log((jj[-1] + 1.0) / (-a_pow - 1.0))
        else:
            log_tail = math.inf
        diverging = -a_pow <= 1.0
    tail = math.exp(log_tail) if log_tail < 709 else math.inf
    if diverging:
        status = "diverged"
    elif log_tail <= math.log(tol) + max(0.0, log_S):
        status = "converged"
    else:
        status = "inconclusive"
    return PairingResult(status, log_S, tail, model, rate, level_terms.tolist())


# --------------------------------------------------------------------------
# full report
# --------------------------------------------------------------------------

TIERS = (
    "UltradistributionRoumieu",
    "UltradistributionBeurling",
    "Distribution",
    "SquareIntegrable",
    "Sobolev",
    "Smooth",
    "Gevrey",
    "Analytic",
)


@dataclass
class ClassificationReport:
    status: str  # "ok" | "exact_zero" | "inconclusive"
    tier: str
    tier_value: float
    flags: dict
    fits: list
    evidence: dict
    warnings: list

    def label(self):
        if self.tier is None:
            return "inconclusive"
        if self.tier_value is None:
            return self.tier
        return f"{self.tier}({self.tier_value:.4g})"

    def as_dict(self):
        return {
            "status": self.status,
            "tier": self.tier,
            "tier_value": _clean(self.tier_value),
            "label": self.label(),
            "flags": dict(self.flags),
            "fits": [f.as_dict() for f in self.fits],
            "evidence": self.evidence,
            "warnings": list(self.warnings),
        }


def _flags(tier, s=None):
    analytic = tier == "Analytic"
    gevrey = tier in ("Analytic", "Gevrey")
    smooth = gevrey or tier == "Smooth"
    return {
        "analytic": analytic,
        "gevrey": gevrey,
        "gevrey_min_s": _clean(1.0 if analytic else s) if gevrey else None,
        "smooth": smooth,
        "square_integrable": smooth or tier in ("Sobolev", "SquareIntegrable"),
    }


def classify(v, weights=None, regime="roumieu", floor=FLOOR, m_max=40):
    """Run every test and assemble a :class:`ClassificationReport`."""
    regime = _check_regime(regime)
    if v.is_zero():
        return ClassificationReport("exact_zero", "Analytic", None, _flags("Analytic"), [], {"exact_zero": True}, [])
    warnings = []
    ld = level_data(v, floor)
    if ld.floored:
        warnings.append(f"{ld.floored} levels below the floor {floor:g} x max were excluded from fits")
    try:
        fits = fit_decay(v, floor=floor)
    except ClassificationError as exc:
        return ClassificationReport("inconclusive", None, None, _flags(None), [], {}, warnings + [str(exc)])
    best = best_fit(fits)
    evidence = {"best_model": best.model}
    status = "ok"
    tier, value = None, None
    w = weights

    if best.model == "exponential" and best.L < 0:
        w = w if w is not None else make_weights("factorial", v.operator.nu)
        dual = dual_growth(v, w)
        evidence["dual"] = dual.as_dict()
        evidence["dual_weights"] = repr(w)
        if dual.roumieu:
            tier = "UltradistributionRoumieu"
        elif dual.beurling:
            tier = "UltradistributionBeurling"
        else:
            status = "inconclusive"
            warnings.append("growth exceeds exp(M(L x)) for every grid L")
    else:
        sm = smoothness_class(v, floor, fits)
        evidence["smoothness"] = sm.as_dict()
        if best.model == "exponential" and best.L > 0:
            ge = gevrey_order(v, floor, fits)
            evidence["gevrey"] = ge.as_dict()
            if ge.g <= G_RANGE[0] * (1.0 + 1e-6):
                tier = "Smooth"
                warnings.append("Gevrey exponent at the lower search bound; order unresolved")
            elif ge.analytic:
                tier = "Analytic"
                if ge.super_analytic:
                    warnings.append("super-analytic decay, outside the s >= 1 regime")
            else:
                tier, value = "Gevrey", ge.s
        else:
            tier = sm.tier
            if tier == "Smooth":
                pass
            elif tier == "Sobolev":
                value = sm.sobolev_label
            elif tier == "Distribution":
                value = -sm.sobolev_label
                if w is not None:
                    evidence["dual"] = dual_growth(v, w).as_dict()
        if w is not None and tier not in ("Distribution", None):
            fits = fit_decay(v, w, floor)
            km = komatsu_membership(v, w, regime, floor)
            dm = definition_membership(v.operator, v, w, m_max, regime, floor)
            evidence["komatsu"] = km.as_dict()
            evidence["definition"] = {k: val for k, val in dm.as_dict().items() if k != "komatsu"}
            evidence["weights"] = repr(w)
            if km.member != dm.member:
                status = "inconclusive"
                warnings.append("coefficient-side and definition-side membership disagree")
    s_val = value if tier == "Gevrey" else None
    return ClassificationReport(status, tier, value, _flags(tier, s_val), fits, evidence, warnings)
