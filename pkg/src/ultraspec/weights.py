"""Weight sequences {M_k}, their structural conditions, and the associated function.

Sequences are stored in log-space.  Tables grow on demand; call
:meth:`WeightSequence.ensure` before sharing a sequence between threads so
that later reads never mutate it.

Custom finite tables are continued past their last entry with the
log-convex rule::

    M_{k+1} = M_k * (M_k / M_{k-1}) * (k + 1) / k

so the successive ratios M_k / M_{k-1} keep growing like k and the associated
function stays finite for every r.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import SCAN_LIMIT, SCAN_OK, SCAN_TABLE_END, assoc_concave, assoc_scan

K_MAX = 1 << 22
STOP_RUN = 8
A_CAP = 1.0e6
GROWTH_BASES = (1, 2, 4, 8)


class WeightError(ValueError):
    """Invalid weight-sequence input."""


class GrowthError(ArithmeticError):
    """The sequence grows too slowly for the requested evaluation."""


@dataclass
class ConditionCertificate:
    A: float
    H: float
    k_max_checked: int


class WeightSequence:
    """A sequence M_0, M_1, ... kept as a lazily extended table of log M_k.

    ``kind`` is ``"gevrey"`` (M_k = (k!)^s), ``"factorial"`` (s = 1) or
    ``"custom"`` (finite table plus the log-convex continuation).
    """

    def __init__(self, kind, nu, *, s=None, log_table=None):
        if int(nu) != nu or nu < 1:
            raise WeightError(f"nu must be a positive integer, got {nu!r}")
        self.kind = kind
        self.nu = int(nu)
        self.s = None if s is None else float(s)
        self.certificate = None
        if kind == "custom":
            base = np.asarray(log_table, dtype=np.float64)
            if base.ndim != 1 or base.size < 2:
                raise WeightError("custom tables need at least two entries")
            if not np.all(np.isfinite(base)):
                raise WeightError("custom table entries must be positive and finite")
            self._base = base.copy()
            self._log = base.copy()
        else:
            self._base = None
            self._log = np.zeros(1)
        self.ensure(64)

    # -- table management -------------------------------------------------

    def __len__(self):
        return self._log.shape[0]

    def ensure(self, k_max):
        """Make log M_k available for k = 0..k_max."""
        n = int(k_max) + 1
        if n <= self._log.shape[0]:
            return
        n = max(n, 2 * self._log.shape[0])
        if self.kind == "custom":
            self._log = _continue_log_convex(self._base, n)
        else:
            logs = np.log(np.arange(1, n, dtype=np.float64))
            lf = np.empty(n)
            lf[0] = 0.0
            np.cumsum(logs, out=lf[1:])
            self._log = self.s * lf if self.s != 1.0 else lf

    def log_values(self, k_max):
        self.ensure(k_max)
        return self._log[: k_max + 1]

    def log_m(self, k):
        self.ensure(k)
        return float(self._log[k])

    def values(self, k_max):
        return np.exp(self.log_values(k_max))

    @property
    def table(self):
        return self._log

    # -- serialization ----------------------------------------------------

    def to_record(self, k_max=None):
        if k_max is None:
            k_max = len(self._base) - 1 if self.kind == "custom" else 32
        rec = {"kind": self.kind, "nu": self.nu}
        if self.s is not None:
            rec["s"] = self.s
        rec["table"] = [float(v) for v in self.log_values(k_max)]
        return rec

    def to_json(self, k_max=None):
        rec = self.to_record(k_max)
        parts = [f'"kind": {json.dumps(rec["kind"])}', f'"nu": {rec["nu"]}']
        if "s" in rec:
            parts.append(f'"s": {rec["s"]:.17g}')
        parts.append('"table": [' + ", ".join(f"{v:.17g}" for v in rec["table"]) + "]")
        return "{" + ", ".join(parts) + "}\n"

    def __repr__(self):
        tag = f"s={self.s:g}" if self.s is not None else f"{len(self._base)} entries"
        return f"WeightSequence({self.kind}, {tag}, nu={self.nu})"


def _continue_log_convex(base, n):
    if n <= base.size:
        return base[:n].copy()
    K = base.size - 1
    d_K = base[K] - base[K - 1]
    ks = np.arange(K + 1, n, dtype=np.float64)
    # increments d_k = d_K + log(k/K), so l_k = l_K + sum_{i=K+1}^{k} d_i
    incr = d_K + np.log(ks / K)
    out = np.empty(n)
    out[: K + 1] = base
    out[K + 1 :] = base[K] + np.cumsum(incr)
    return out


def make_weights(kind, nu=2, *, s=None, table=None):
    """Build a weight sequence.

    ``kind`` is ``"gevrey"`` (needs ``s >= 1``), ``"factorial"`` or
    ``"custom"`` (``table`` holds M_0, M_1, ... as plain positive values).
    """
    kind = kind.lower()
    if kind == "factorial":
        return WeightSequence("factorial", nu, s=1.0)
    if kind == "gevrey":
        if s is None or not s >= 1.0:
            raise WeightError(f"Gevrey weights need s >= 1, got {s!r}")
        return WeightSequence("gevrey", nu, s=s)
    if kind == "custom":
        vals = np.asarray(table, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2:
            raise WeightError("custom tables need at least two entries")
        if not np.all(vals > 0) or not np.all(np.isfinite(vals)):
            raise WeightError("custom table entries must be positive and finite")
        if vals[0] != 1.0:
            raise WeightError(f"(M.0) requires M_0 = 1, got {vals[0]!r}")
        return WeightSequence("custom", nu, log_table=np.log(vals))
    raise WeightError(f"unknown weight kind {kind!r}")


def parse_weights(spec, nu=2):
    """Parse ``gevrey:S``, ``factorial`` or ``file:PATH``."""
    if spec.startswith("file:"):
        return load_weights(spec[5:])
    if spec == "factorial":
        return make_weights("factorial", nu)
    if spec.startswith("gevrey:"):
        return make_weights("gevrey", nu, s=float(spec[7:]))
    raise WeightError(f"cannot parse weight spec {spec!r}")


def weights_from_record(rec, validate=True):
    """Rebuild a sequence from its structured record.

    With ``validate=False`` a table violating (M.0) is loaded as-is so that
    :func:`check_conditions` can report it.
    """
    try:
        kind = rec["kind"]
        nu = rec["nu"]
    except KeyError as exc:
        raise WeightError(f"weight record missing field {exc}") from None
    s = rec.get("s")
    if kind in ("gevrey", "factorial") and "table" not in rec:
        return make_weights(kind, nu, s=s)
    table = np.asarray(rec["table"], dtype=np.float64)
    if kind in ("gevrey", "factorial"):
        w = make_weights(kind, nu, s=s)
        ref = w.log_values(table.size - 1)
        if validate and not np.allclose(ref, table, rtol=1e-12, atol=1e-12):
            raise WeightError("stored table does not match the declared Gevrey kind")
        if np.array_equal(ref, table):
            return w
        kind = "custom"
    if validate and table[0] != 0.0:
        raise WeightError(f"(M.0) requires log M_0 = 0, got {table[0]!r}")
    return WeightSequence("custom", nu, log_table=table)


def load_weights(path, validate=True):
    with open(path) as fh:
        text = fh.read()
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightError(f"{path}:{exc.lineno}: malformed weight record ({exc.msg})") from None
    return weights_from_record(rec, validate=validate)


def save_weights(w, path, k_max=None):
    with open(path, "w") as fh:
        fh.write(w.to_json(k_max))


# --------------------------------------------------------------------------
# structural conditions
# --------------------------------------------------------------------------


@dataclass
class DyadicWitness:
    A: float
    H: float
    log2_H: int


@dataclass
class ConditionReport:
    k_max: int
    m0: bool
    m1: "DyadicWitness | None"
    m2: "DyadicWitness | None"
    log_convex: bool
    log_convex_failure: "int | None"
    growth: bool
    growth_constants: dict = field(default_factory=dict)

    def as_dict(self):
        def wit(w):
            return None if w is None else {"A": w.A, "H": w.H}

        return {
            "k_max": self.k_max,
            "m0": self.m0,
            "m1": wit(self.m1),
            "m2": wit(self.m2),
            "log_convex": self.log_convex,
            "log_convex_failure": self.log_convex_failure,
            "growth": self.growth,
            "growth_constants": {str(k): v for k, v in self.growth_constants.items()},
        }


def _dyadic_search(slack0, slack, ks):
    """Smallest H = 2^m reaching the least attainable A.

    The required log A at H is max(slack0, max_k slack_k - k log H), where
    ``slack0`` collects the H-independent terms.  As H grows the bound falls
    to ``max(0, slack0)``; the first dyadic H that attains it is returned.
    """
    floor = max(0.0, slack0)
    if floor > math.log(A_CAP):
        return None
    pos = ks > 0
    for m in range(-20, 61):
        logH = m * math.log(2.0)
        req = np.max(slack[pos] - ks[pos] * logH) if pos.any() else -np.inf
        need = max(floor, req)
        if need <= floor + 1e-12 * max(1.0, abs(floor)):
            return DyadicWitness(A=math.exp(floor), H=2.0**m, log2_H=m)
    return None


def check_conditions(w, k_max):
    """Check (M.0), (M.1), (M.2), log-convexity and k! <= C_l l^k M_k up to k_max.

    When both (M.1) and (M.2) admit witnesses the sequence's
    ``certificate`` is set with the larger A and H.
    """
    if k_max < 4:
        raise WeightError("k_max must be at least 4")
    lm = w.log_values(2 * k_max)
    m0 = lm[0] == 0.0

    # (M.1): log M_{k+1} - log M_k <= log A + k log H, k = 0..k_max-1
    ks = np.arange(0, k_max, dtype=np.float64)
    s1 = lm[1 : k_max + 1] - lm[:k_max]
    m1 = _dyadic_search(s1[0], s1, ks)

    # (M.2): log M_{2k} - 2 log M_k <= log A + 2k log H, k = 0..k_max
    kk = np.arange(0, k_max + 1)
    s2 = lm[2 * kk] - 2.0 * lm[kk]
    m2 = _dyadic_search(s2[0], s2, 2.0 * kk.astype(np.float64))

    mid = lm[1:k_max]
    excess = 2.0 * mid - lm[: k_max - 1] - lm[2 : k_max + 1]
    tol = 1e-12 * np.maximum(1.0, np.abs(mid))
    bad = np.flatnonzero(excess > tol)
    log_convex = bad.size == 0
    failure = int(bad[0]) + 1 if bad.size else None

    lf = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, k_max + 1)))])
    consts = {}
    ok_any = False
    tail = max(2, (k_max + 1) // 4)
    for base in GROWTH_BASES:
        g = lf - np.arange(k_max + 1) * math.log(base) - lm[: k_max + 1]
        consts[base] = float(math.exp(min(np.max(g), 700.0)))
        if np.all(np.diff(g[-tail:]) <= 1e-12 * np.maximum(1.0, np.abs(g[-tail + 1 :]))):
            ok_any = True
    report = ConditionReport(
        k_max=k_max,
        m0=bool(m0),
        m1=m1,
        m2=m2,
        log_convex=log_convex,
        log_convex_failure=failure,
        growth=ok_any,
        growth_constants=consts,
    )
    if m0 and m1 is not None and m2 is not None:
        w.certificate = ConditionCertificate(A=max(m1.A, m2.A), H=max(m1.H, m2.H), k_max_checked=k_max)
    return report


def certify(w, k_max=64):
    """Run :func:`check_conditions` and raise unless (M.0)-(M.2) and growth hold."""
    rep = check_conditions(w, k_max)
    if w.certificate is None or not rep.growth:
        raise WeightError(f"{w!r} fails the structural conditions up to k = {k_max}")
    return rep


def lower_convex_envelope(y):
    """Largest convex minorant of the points (k, y_k), k = 0..len(y)-1."""
    y = np.asarray(y, dtype=np.float64)
    hull = []
    for k in range(y.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j when it lies on or above the chord i -> k
            if (y[j] - y[i]) * (k - i) >= (y[k] - y[i]) * (j - i):
                hull.pop()
            else:
                break
        hull.append(k)
    return np.interp(np.arange(y.size), hull, y[hull]), hull


def log_convex_regularize(w, k_max):
    """Replace log M_k (k <= k_max) by its lower convex envelope."""
    lm = w.log_values(k_max)
    env, hull = lower_convex_envelope(lm)
    # keep exact values on hull vertices, so convex input is returned unchanged
    env[hull] = lm[hull]
    out = WeightSequence("custom", w.nu, log_table=env)
    return out


# --------------------------------------------------------------------------
# associated function
# --------------------------------------------------------------------------


def is_log_convex_sequence(w):
    """True when the whole (continued) table of ``w`` is log-convex."""
    if w.kind != "custom":
        return True
    base = w._base
    mid = base[1:-1]
    return bool(np.all(2.0 * mid - base[:-2] - base[2:] <= 1e-12 * np.maximum(1.0, np.abs(mid))))


class AssociatedFunction:
    """M(r) = sup_{k>=0} (nu k log r - log M_{nu k}) with M(0) = 0.

    ``method="scan"`` walks k upward and stops after ``stop_run`` consecutive
    decreases.  ``method="concave"`` bisects on the term increments, which is
    exact for log-convex sequences and costs O(log k*) per point.
    """

    def __init__(self, weights, k_max=K_MAX, stop_run=STOP_RUN, method="scan"):
        if method not in ("scan", "concave"):
            raise ValueError("method must be 'scan' or 'concave'")
        if method == "concave" and not is_log_convex_sequence(weights):
            raise WeightError(f"{weights!r} is not log-convex; use method='scan'")
        self.source = weights
        self.nu = weights.nu
        self.k_max = int(k_max)
        self.stop_run = int(stop_run)
        self.method = method
        self.cache = {}

    def _guess_k(self, r):
        s = self.source.s if self.source.s is not None else 1.0
        return int(min(self.k_max, 2.0 * r ** (1.0 / s) / self.nu + 64))

    def evaluate(self, r):
        """Vectorized evaluation; returns ``(values, kstar)`` arrays."""
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        if np.any(r < 0) or np.any(~np.isfinite(r)):
            raise ValueError("associated function needs finite r >= 0")
        vals = np.zeros(r.shape)
        kst = np.zeros(r.shape, dtype=np.int64)
        live = np.flatnonzero(r > 0)
        if live.size:
            rl = r[live]
            self.source.ensure(self.nu * min(self.k_max, self._guess_k(float(rl.max()))))
            todo = np.arange(live.size)
            while todo.size:
                if self.method == "scan":
                    v, k, st = assoc_scan(np.log(rl[todo]), self.nu, self.source.table, self.k_max, self.stop_run)
                else:
                    v, k, st = assoc_concave(np.log(rl[todo]), self.nu, self.source.table, self.k_max)
                done = st == SCAN_OK
                vals[live[todo[done]]] = v[done]
                kst[live[todo[done]]] = k[done]
                if np.any(st == SCAN_LIMIT):
                    bad = rl[todo[st == SCAN_LIMIT]][0]
                    raise GrowthError(
                        f"sequence grows too slowly for r = {bad:g}: no decrease within {self.k_max} terms"
                    )
                todo = todo[st == SCAN_TABLE_END]
                if todo.size:
                    self.source.ensure(min(self.nu * self.k_max, 2 * len(self.source)))
        return vals, kst

    def __call__(self, r):
        if np.ndim(r) == 0:
            r = float(r)
            hit = self.cache.get(r)
            if hit is None:
                v, k = self.evaluate(r)
                hit = (float(v[0]), int(k[0]))
                self.cache[r] = hit
            return hit[0]
        return self.evaluate(r)[0]

    def kstar(self, r):
        if np.ndim(r) == 0:
            self(r)
            return self.cache[float(r)][1]
        return self.evaluate(r)[1]


def assoc_fn(af, r):
    return af(r)


# --------------------------------------------------------------------------
# bound checks
# --------------------------------------------------------------------------


@dataclass
class GevreyBoundsReport:
    s: float
    nu: int
    r: np.ndarray
    M: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    lower_violations: list
    upper_violations: list
    aux_violations: list

    @property
    def violations(self):
        return sorted(set(self.lower_violations) | set(self.upper_violations))

    @property
    def ok(self):
        return not self.lower_violations and not self.upper_violations


def gevrey_bounds_check(s, nu, r_grid, p_max=None):
    """Check (s/(4 nu e)) r^{1/s} <= M(r) <= s r^{1/s} for Gevrey(s) weights.

    Also checks inf_p (nu p)^{nu p s} r^{-nu p} <= exp(-(s/(4 nu e)) r^{1/s})
    by brute force over p = 1..p_max.  Violations are grid points r.
    """
    r = np.asarray(r_grid, dtype=np.float64)
    af = AssociatedFunction(make_weights("gevrey", nu, s=s))
    M, _ = af.evaluate(r)
    root = r ** (1.0 / s)
    lower = s / (4.0 * nu * math.e) * root
    upper = s * root
    rel = 1e-12 * np.maximum(1.0, np.abs(M))
    low_bad = [float(x) for x in r[M < lower - rel]]
    up_bad = [float(x) for x in r[M > upper + rel]]
    aux_bad = []
    for ri, lo in zip(r, lower):
        if ri <= 0:
            continue
        P = p_max or int(max(64, 4.0 * ri ** (1.0 / s) / nu))
        p = np.arange(1, P + 1, dtype=np.float64)
        lg = nu * p * s * np.log(nu * p) - nu * p * math.log(ri)
        if lg.min() > -lo + 1e-12 * max(1.0, abs(lo)):
            aux_bad.append(float(ri))
    return GevreyBoundsReport(s, nu, r, M, lower, upper, low_bad, up_bad, aux_bad)


def ev_suppression_values(af, q, L, delta, levels):
    if L <= 0 or delta <= 0 or q < 0:
        raise ValueError("need q >= 0, L > 0 and delta > 0")
    lam = np.asarray(levels, dtype=np.float64)
    if np.any(lam <= 0):
        raise ValueError("levels must be positive")
    _require_growth(af.source)
    M, _ = af.evaluate(L * lam ** (1.0 / af.nu))
    return np.exp(q * np.log(lam) - delta * M)


def ev_suppression_check(af, q, L, delta, levels):
    """max over levels of lambda^q exp(-delta M(L lambda^{1/nu}))."""
    return float(np.max(ev_suppression_values(af, q, L, delta, levels)))


def _require_growth(w, k_max=64):
    ok = getattr(w, "_growth_ok", None)
    if ok is None:
        ok = check_conditions(w, k_max).growth
        w._growth_ok = ok
    if not ok:
        raise GrowthError(f"{w!r} violates k! <= C_l l^k M_k for every l in {GROWTH_BASES}")
