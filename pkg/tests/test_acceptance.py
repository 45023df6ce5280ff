"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one PASS/FAIL line (also collected in the pytest terminal
summary).  ``python3 tests/test_acceptance.py`` runs them without pytest.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
from scipy.special import gammaln

from ultraspec.classify import (
    classify,
    definition_membership,
    dual_growth,
    komatsu_membership,
    pairing_converges,
)
from ultraspec.rng import SplitMix64
from ultraspec.spectrum import TORUS_SERIES_LIMIT, Manifold, ModelOperator, level_table, series_diagnostics
from ultraspec.synth import DecayProfile, delta_at, from_profile, poisson_kernel
from ultraspec.transform import forward, inverse, plancherel_residual, random_bandlimited
from ultraspec.weights import AssociatedFunction, check_conditions, gevrey_bounds_check, make_weights

CIRCLE = ModelOperator(Manifold.CIRCLE)
TORUS = ModelOperator(Manifold.TORUS2)
SPHERE = ModelOperator(Manifold.SPHERE2)
GEVREY_S = (1.0, 1.5, 2.0, 3.0)
R_GRID = np.logspace(-2, 6, 100)


def oracle_log_inf(s, nu, r):
    """log inf_k r^{-nu k} ((nu k)!)^s by exhaustive minimization over k."""
    K = int(2.0 * r ** (1.0 / s) / nu) + 64
    k = np.arange(0, K + 1, dtype=np.float64)
    return float(np.min(s * gammaln(nu * k + 1.0) - nu * k * math.log(r)))


def test_criterion_01_plancherel(acceptance):
    t0 = time.perf_counter()
    rng = SplitMix64(20240601)
    worst = {}
    for op, J in ((CIRCLE, 128), (TORUS, 128), (SPHERE, 128)):
        res = 0.0
        for _ in range(50):
            f = inverse(random_bandlimited(op, J, rng))
            res = max(res, plancherel_residual(op, f, J))
        worst[op.manifold.value] = res
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-10 and elapsed < 30.0
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + f" (< 1e-10); {elapsed:.1f} s (< 30 s)"
    assert acceptance(1, "Plancherel", ok, detail)


def test_criterion_02_poisson_oracle(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for r in (0.3, 0.5, 0.9):
        f, _ = poisson_kernel(r, 128, n=512)
        got = forward(CIRCLE, f, 64)
        k = level_table(CIRCLE, 64).labels[:, 0]
        exact = math.sqrt(2.0 * math.pi) * r ** np.abs(k).astype(np.float64)
        worst = max(worst, float(np.max(np.abs(got.coeffs - exact))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    assert acceptance(2, "Poisson oracle", ok, f"max abs error {worst:.2e} (<= 1e-12); {elapsed:.2f} s (< 1 s)")


def test_criterion_03_associated_identity(acceptance):
    worst = 0.0
    for s in GEVREY_S:
        M, _ = AssociatedFunction(make_weights("gevrey", 2, s=s)).evaluate(R_GRID)
        for r, m in zip(R_GRID, M):
            # exp(-M) = inf_k ..., compared in log space (exp(-M) underflows for large r)
            worst = max(worst, abs(-m - oracle_log_inf(s, 2, float(r))) / max(1.0, abs(m)))
    assert acceptance(3, "associated-function identity", worst <= 1e-12, f"max scaled log error {worst:.2e} (<= 1e-12)")


def test_criterion_04_gevrey_bounds(acceptance):
    low = up = 0
    first_low = []
    for s in GEVREY_S:
        rep = gevrey_bounds_check(s, 2, R_GRID)
        low += len(rep.lower_violations)
        up += len(rep.upper_violations)
        if rep.lower_violations:
            first_low.append(f"s={s:g}: r <= {max(rep.lower_violations):.3g}")
    ok = low == 0 and up == 0
    detail = f"{low} lower / {up} upper violations on [1e-2, 1e6]"
    if first_low:
        detail += " (lower bound fails for small r: " + "; ".join(first_low) + ")"
    assert acceptance(4, "Gevrey bounds", ok, detail)


def test_criterion_05_gevrey_recovery(acceptance):
    t0 = time.perf_counter()
    worst, tier_errors = 0.0, []
    for s in GEVREY_S:
        for seed in range(20):
            v = from_profile(CIRCLE, DecayProfile("exponential", L=1.0, g=1.0 / s, seed=seed), 600)
            rep = classify(v)
            est = rep.evidence["gevrey"]["s"]
            worst = max(worst, abs(est - s) / s)
            if (rep.tier == "Analytic") != (s == 1.0):
                tier_errors.append((s, seed, rep.label()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.05 and not tier_errors and elapsed < 10.0
    detail = f"max relative error in s {worst:.2e} (<= 5%), {len(tier_errors)} tier errors; {elapsed:.1f} s (< 10 s)"
    assert acceptance(5, "Gevrey order recovery", ok, detail)


def test_criterion_06_main_theorem(acceptance):
    J = 1500
    ops = (CIRCLE, SPHERE)
    disagreements, member_errors = [], []
    for s in (1, 2):
        w = make_weights("gevrey", 2, s=s)
        for L in (0.5, 1.0, 2.0):
            for op in ops:
                v = from_profile(op, DecayProfile("associated", L=L, weights=w), J)
                km = komatsu_membership(v, w)
                dm = definition_membership(op, v, w)
                if km.member != dm.member:
                    disagreements.append(("member", s, L, op.manifold.value))
                if not km.member:
                    member_errors.append(("member", s, L, op.manifold.value))
    # Gevrey(2) members are not Gevrey(1) functions
    fac = make_weights("factorial", 2)
    g2 = make_weights("gevrey", 2, s=2)
    for L in (0.5, 1.0, 2.0):
        for op in ops:
            v = from_profile(op, DecayProfile("associated", L=L, weights=g2), J)
            km = komatsu_membership(v, fac)
            dm = definition_membership(op, v, fac)
            if km.member or dm.member:
                disagreements.append(("non-member", L, op.manifold.value, km.member, dm.member))
    ok = not disagreements and not member_errors
    detail = f"12 members: {12 - len(member_errors)} accepted by both tests; 6 non-members: disagreements {disagreements or 'none'}"
    assert acceptance(6, "main-theorem equivalence", ok, detail)


def test_criterion_07_m2_certificate(acceptance):
    k = np.arange(0, 51, dtype=np.float64)
    # direct log-space oracle: (2k)! <= 4^k (k!)^2
    oracle = bool(np.all(gammaln(2 * k + 1) <= k * math.log(4.0) + 2 * gammaln(k + 1) + 1e-12))
    found = {}
    for s in (1, 2, 3):
        rep = check_conditions(make_weights("gevrey", 2, s=s), 50)
        found[s] = None if rep.m2 is None else (rep.m2.A, rep.m2.H)
    ok = oracle and all(found[s] == (1.0, 2.0**s) for s in (1, 2, 3))
    detail = "oracle " + ("holds" if oracle else "FAILS") + "; " + ", ".join(f"s={s}: A,H={found[s]}" for s in found)
    assert acceptance(7, "(M.2) certificate", ok, detail)


def test_criterion_08_weyl(acceptance):
    l = np.arange(0, 201, dtype=np.float64)
    mult_ok = bool(np.all(2 * l + 1 <= 3.0 * (1.0 + l * (l + 1))))
    tab = level_table(SPHERE, 200)
    mult_ok &= bool(np.all(tab.d <= 3.0 * (1.0 + tab.lam)))
    parts, ok = [f"sphere d_l bound {'ok' if mult_ok else 'FAILS'}"], mult_ok
    for op, lm in ((CIRCLE, 2.0**50), (SPHERE, 2.0**50), (TORUS, float(TORUS_SERIES_LIMIT))):
        q0 = op.n / op.nu
        conv = series_diagnostics(op, lm, q0 + 0.25)
        div = series_diagnostics(op, lm, q0 - 0.25)
        good_tail = conv.verdict == "converges" and conv.tail_estimate < 1e-3
        good_div = div.verdict == "diverges" and div.monotone_growth
        ok &= good_tail and good_div
        parts.append(
            f"{op.manifold.value} tail {conv.tail_estimate:.2e} at lambda_max {lm:.3g}, divergence marker {'ok' if good_div else 'missing'}"
        )
    assert acceptance(8, "Weyl/multiplicity", ok, "; ".join(parts))


def test_criterion_09_dual_quantifiers(acceptance):
    g1 = make_weights("gevrey", 2, s=1)
    g2 = make_weights("gevrey", 2, s=2)
    u1 = from_profile(CIRCLE, DecayProfile("exponential", L=-0.5, g=1.0), 1000)
    u2 = from_profile(CIRCLE, DecayProfile("exponential", L=-1.0, g=0.5), 1000)
    d1 = dual_growth(u1, g1)
    d2 = dual_growth(u2, g1)
    delta = delta_at(SPHERE, (0.7, 0.3), 400)
    dd = [dual_growth(delta, w) for w in (g1, g2)]
    results = {
        "exp(0.5|k|) BeurlingDual-not-RoumieuDual": d1.beurling and not d1.roumieu,
        "exp(|k|^1/2) RoumieuDual": d2.roumieu,
        "sphere delta RoumieuDual s=1": dd[0].roumieu,
        "sphere delta RoumieuDual s=2": dd[1].roumieu,
    }
    ok = all(results.values())
    assert acceptance(9, "dual quantifiers", ok, ", ".join(f"{k}: {v}" for k, v in results.items()))


def test_criterion_10_dual_coincidence(acceptance):
    g1 = make_weights("gevrey", 2, s=1)
    g2 = make_weights("gevrey", 2, s=2)
    Jc, Js = 1000, 400
    duals = [
        ("exp(|k|^1/2)", CIRCLE, g1, from_profile(CIRCLE, DecayProfile("exponential", L=-1.0, g=0.5), Jc)),
        ("sphere delta", SPHERE, g1, delta_at(SPHERE, (0.7, 0.3), Js)),
        ("sphere delta", SPHERE, g2, delta_at(SPHERE, (0.7, 0.3), Js)),
    ]
    duals = [(n, op, w, u) for n, op, w, u in duals if dual_growth(u, w).roumieu]
    pairings = []
    for name, op, w, u in duals:
        for L in (0.5, 1.0, 2.0):
            phi = from_profile(op, DecayProfile("associated", L=L, weights=w), u.j_max)
            member = komatsu_membership(phi, w).member
            pairings.append((f"{name} x member(L={L:g}, {w!r})", True, member, pairing_converges(u, phi)))
    # divergence examples
    u_beur = from_profile(CIRCLE, DecayProfile("exponential", L=-0.5, g=1.0), Jc)
    phi_an = from_profile(CIRCLE, DecayProfile("associated", L=0.5, weights=g1), Jc)
    phi_g3 = from_profile(CIRCLE, DecayProfile("exponential", L=1.0, g=1.0 / 3.0), Jc)
    u_root = duals[0][3] if duals and duals[0][0] == "exp(|k|^1/2)" else None
    extra = [("exp(0.5|k|) x member(L=0.5)", u_beur, phi_an)]
    if u_root is not None:
        extra.append(("exp(|k|^1/2) x Gevrey-3 function", u_root, phi_g3))
    for name, u, phi in extra:
        pairings.append((name, dual_growth(u, g1).roumieu, komatsu_membership(phi, g1).member, pairing_converges(u, phi)))

    failures = []
    diverged = 0
    for name, is_dual, is_member, res in pairings:
        if is_dual and is_member and not (res.status == "converged" and res.tail_estimate < 1e-6 * max(1.0, res.partial_sum)):
            failures.append(f"{name}: {res.status} tail {res.tail_estimate:.2e}")
        if res.status == "diverged":
            diverged += 1
            if is_dual and is_member:
                failures.append(f"{name}: divergence with dual x member")
    n_pos = sum(1 for _, d, m, _ in pairings if d and m)
    ok = len(duals) == 3 and n_pos == 9 and not failures and diverged >= 1
    detail = f"{n_pos} dual x member pairings converged, {diverged} divergences all non-member pairings"
    if failures or len(duals) != 3:
        detail = f"{len(duals)} RoumieuDual vectors; problems: {failures}"
    assert acceptance(10, "dual coincidence", ok, detail)


def _run_cli(args, threads):
    env = dict(os.environ)
    for var in ("NUMBA_NUM_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = str(threads)
    proc = subprocess.run(
        [sys.executable, "-m", "ultraspec.cli", *args], env=env, capture_output=True, timeout=600, check=False
    )
    return proc.returncode, proc.stdout


def test_criterion_11_determinism(acceptance, tmp_path):
    coef = tmp_path / "gevrey2_sphere.jsonl"
    code, _ = _run_cli(
        ["synth", "--manifold", "sphere2", "--profile", "associated", "--weights", "gevrey:2", "--L", "1", "--jmax", "200",
         "--seed", "7", "--out", str(coef)],
        1,
    )
    assert code == 0
    jobs = {
        "analyze": ["analyze", str(coef), "--weights", "gevrey:2", "--json"],
        "verify": ["verify", "--json"],
    }
    same = {}
    for name, args in jobs.items():
        outputs = [_run_cli(args, t) for t in (1, 1, 8)]
        same[name] = all(o == outputs[0] for o in outputs) and outputs[0][1].strip().startswith(b"{")
        json.loads(outputs[0][1])
    ok = all(same.values())
    detail = ", ".join(f"{k} {'byte-identical' if v else 'DIFFERS'}" for k, v in same.items()) + " (2 runs at 1 thread, 1 at 8)"
    assert acceptance(11, "determinism", ok, detail)


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    def record(number, title, passed, detail):
        print(f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}  {title}: {detail}", flush=True)
        return True

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(record, Path(d))
            else:
                fn(record)
