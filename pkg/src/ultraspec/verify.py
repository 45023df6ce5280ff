"""User-facing self-test: the bound checks of every module on fixed fixtures."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .spectrum import Manifold, ModelOperator, TORUS_SERIES_LIMIT, weyl_checks
from .synth import poisson_kernel
from .transform import forward, inverse, plancherel_residual, random_bandlimited
from .rng import SplitMix64
from .weights import AssociatedFunction, check_conditions, gevrey_bounds_check, make_weights

GEVREY_S = (1.0, 1.5, 2.0, 3.0)
DEFAULT_LAMBDA_MAX = 1.0e8


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "warnings": self.warnings}


def brute_force_log_inf(s, nu, r):
    """log inf_k r^{-nu k} ((nu k)!)^s by direct minimization over k."""
    K = int(2.0 * r ** (1.0 / s) / nu) + 64
    k = np.arange(0, K + 1, dtype=np.float64)
    return float(np.min(s * gammaln(nu * k + 1.0) - nu * k * math.log(r)))


def check_identity(nu=2, r_grid=None):
    r_grid = np.logspace(-2, 6, 100) if r_grid is None else r_grid
    worst = 0.0
    for s in GEVREY_S:
        M, _ = AssociatedFunction(make_weights("gevrey", nu, s=s)).evaluate(r_grid)
        for r, m in zip(r_grid, M):
            err = abs(-m - brute_force_log_inf(s, nu, float(r))) / max(1.0, abs(m))
            worst = max(worst, err)
    return Check("weights.identity_est3i", worst <= 1e-12, {"max_scaled_error": worst, "tolerance": 1e-12})


def check_gevrey_bounds(nu=2):
    r = np.logspace(1, 6, 100)
    detail, ok = {}, True
    for s in GEVREY_S:
        rep = gevrey_bounds_check(s, nu, r)
        detail[f"s={s:g}"] = {"lower_violations": len(rep.lower_violations), "upper_violations": len(rep.upper_violations)}
        ok &= rep.ok
    detail["r_range"] = [10.0, 1.0e6]
    return Check("weights.gevrey_bounds", ok, detail)


def check_m2(nu=2):
    detail, ok = {}, True
    for s in (1, 2, 3):
        rep = check_conditions(make_weights("gevrey", nu, s=s), 50)
        good = rep.m2 is not None and rep.m2.A == 1.0 and rep.m2.H == 2.0**s
        detail[f"s={s}"] = None if rep.m2 is None else {"A": rep.m2.A, "H": rep.m2.H}
        ok &= good
    return Check("weights.m2_certificate", ok, detail)


def check_weights(w, label):
    rep = check_conditions(w, 64)
    ok = rep.m0 and rep.m1 is not None and rep.m2 is not None and rep.growth
    failed = [n for n, good in (("M.0", rep.m0), ("M.1", rep.m1), ("M.2", rep.m2), ("growth", rep.growth)) if not good]
    d = rep.as_dict()
    d["weights"] = label
    d["failed"] = failed
    return Check("weights.conditions", bool(ok), d)


def check_weyl(lambda_max):
    checks = []
    for m in Manifold:
        op = ModelOperator(m)
        lm = min(lambda_max, TORUS_SERIES_LIMIT) if m is Manifold.TORUS2 else lambda_max
        rep = weyl_checks(op, lm)
        q_lo, q_hi, q_top = rep.series
        ok_mult = rep.multiplicity_witness <= 3.0
        checks.append(
            Check(
                f"spectrum.multiplicity_dl1.{m.value}",
                ok_mult,
                {"witness_C": rep.multiplicity_witness, "bound": 3.0, "levels": rep.n_levels},
                [w for w in rep.warnings if w.startswith("insufficient")],
            )
        )
        wrong = [s.q for s in (q_hi, q_top) if s.verdict == "diverges"] + ([q_lo.q] if q_lo.verdict == "converges" else [])
        checks.append(
            Check(
                f"spectrum.series_dl2.{m.value}",
                not wrong,
                {
                    "lambda_max": lm,
                    "verdicts": {f"{s.q:g}": s.verdict for s in rep.series},
                    "tails": {f"{s.q:g}": s.tail_estimate for s in rep.series},
                },
                [w for w in rep.warnings if not w.startswith("insufficient")],
            )
        )
        if m is Manifold.SPHERE2 and rep.n_levels >= 8:
            fitted = rep.sup_exponent_fitted
            ok = abs(fitted - rep.sup_exponent_expected) <= 0.05 and math.isfinite(rep.sup_witness)
            checks.append(
                Check(
                    "spectrum.sup_norm_weyl",
                    ok,
                    {"expected_exponent": rep.sup_exponent_expected, "fitted_exponent": fitted, "witness_C": rep.sup_witness},
                )
            )
    return checks


def check_plancherel(seed):
    rng = SplitMix64(seed)
    worst, round_trip = 0.0, 0.0
    for m, J in ((Manifold.CIRCLE, 128), (Manifold.TORUS2, 128), (Manifold.SPHERE2, 64)):
        op = ModelOperator(m)
        for _ in range(3):
            v = random_bandlimited(op, J, rng)
            f = inverse(v)
            worst = max(worst, plancherel_residual(op, f, J))
            back = forward(op, f, J)
            round_trip = max(round_trip, float(np.max(np.abs(back.coeffs - v.coeffs)) / np.max(np.abs(v.coeffs))))
    return Check(
        "transform.plancherel",
        worst < 1e-10 and round_trip < 1e-12,
        {"max_residual": worst, "max_round_trip_error": round_trip, "tolerances": [1e-10, 1e-12]},
    )


def check_poisson():
    worst = 0.0
    op = ModelOperator(Manifold.CIRCLE)
    for r in (0.3, 0.5, 0.9):
        f, exact = poisson_kernel(r, 128, n=512)
        got = forward(op, f, 64)
        worst = max(worst, float(np.max(np.abs(got.coeffs - exact.truncated(64).coeffs))))
    return Check("transform.poisson_oracle", worst <= 1e-12, {"max_abs_error": worst, "tolerance": 1e-12})


def run_verify(lambda_max=DEFAULT_LAMBDA_MAX, weights=None, weights_label="factorial", seed=0, nu=2):
    w = weights if weights is not None else make_weights("factorial", nu)
    checks = [
        check_weights(w, weights_label),
        check_m2(nu),
        check_identity(nu),
        check_gevrey_bounds(nu),
    ]
    checks += check_weyl(lambda_max)
    checks += [check_plancherel(seed), check_poisson()]
    return checks
