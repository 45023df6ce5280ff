"""Command-line entry point: ``ultraspec {analyze,synth,weights,spectrum,verify}``.

Exit codes: 0 success, 1 input or validation error, 2 inconclusive result.
Reports go to stdout as text; ``--out PATH`` writes the text report to PATH
and its structured (JSON) twin next to it with a ``.json`` suffix.
"""

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .classify import FLOOR, ClassificationError, classify, level_data
from .coeffio import CoefficientFileError, read_coefficients, write_coefficients
from .spectrum import Manifold, ModelOperator, enumerate_levels, weyl_checks
from .synth import DecayProfile, delta_at, from_profile, poisson_kernel
from .verify import DEFAULT_LAMBDA_MAX, run_verify
from .weights import (
    AssociatedFunction,
    WeightError,
    check_conditions,
    load_weights,
    log_convex_regularize,
    parse_weights,
    save_weights,
)

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


@dataclasses.dataclass
class RunConfig:
    """Every option with its default; round-trips through ``as_dict``/``from_dict``."""

    subcommand: str = "verify"
    input: str = None
    out: str = None
    plot: str = None
    manifold: str = "circle"
    nu: int = 2
    shift: float = 0.0
    weights: str = None
    jmax: int = None
    floor: float = FLOOR
    regime: str = "roumieu"
    seed: int = 0
    lambda_max: float = None
    m_max: int = 40
    profile: str = "exponential"
    L: float = 1.0
    g: float = 1.0
    p: float = 3.0
    s: float = None
    r: float = 0.5
    x0: list = None
    phase: str = "random"
    split: str = "equal"
    scale: float = 1.0
    kmax: int = 64
    eval_r: list = None
    regularize: bool = False
    json: bool = False

    def as_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _operator(cfg):
    if cfg.nu != 2:
        raise CliError("only nu = 2 (Laplacians) is supported")
    if cfg.shift < 0:
        raise CliError("--shift must be non-negative")
    return ModelOperator(Manifold(cfg.manifold), cfg.shift)


def _weights(cfg, default="factorial"):
    spec = cfg.weights or default
    if spec is None:
        return None, None
    try:
        if spec.startswith("file:"):
            return load_weights(spec[5:], validate=False), spec
        return parse_weights(spec, cfg.nu), spec
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot use weights {spec!r}: {exc}") from None


def _emit(cfg, text, structured, stdout):
    if cfg.json:
        stdout.write(report.dumps(structured))
    else:
        stdout.write(text)
    if cfg.out:
        path = Path(cfg.out)
        twin = path.with_suffix(".json") if path.suffix != ".json" else path.with_suffix(".txt")
        text_path, json_path = (twin, path) if path.suffix == ".json" else (path, twin)
        text_path.write_text(text, encoding="utf-8")
        json_path.write_text(report.dumps(structured), encoding="utf-8")


def _config_record(cfg):
    d = cfg.as_dict()
    return {k: v for k, v in d.items() if v is not None}


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------


def _plot(path, v, rep):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "ultraspec"
    ld = level_data(v)
    fin = ld.finite
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    axes[0].plot(ld.x[fin], ld.logh[fin], ".", ms=3)
    axes[0].set_xlabel(r"$\lambda^{1/\nu}$")
    axes[0].set_ylabel(r"$\log\|\hat f(j)\|_{HS}$")
    pos = fin[ld.lam[fin] > 0]
    axes[1].plot(np.log(ld.lam[pos]), ld.logh[pos], ".", ms=3)
    axes[1].set_xlabel(r"$\log\lambda$")
    fig.suptitle(rep.label())
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "ultraspec"})
    plt.close(fig)


def _analyze_text(cfg, v, rep):
    op = v.operator
    lines = [
        f"input      {cfg.input}",
        f"operator   {op.manifold.value}, nu = {op.nu}, shift = {report.fmt(op.shift)}, j_max = {v.j_max}",
        f"status     {rep.status}",
        f"tier       {rep.label()}",
        "flags      " + ", ".join(f"{k}={report.fmt(val) if isinstance(val, float) else val}" for k, val in rep.flags.items()),
    ]
    for f in rep.fits:
        parts = [f"fit {f.model:<11}", f"residual {report.fmt(f.residual)}"]
        for key in ("p", "L", "g", "aic"):
            val = getattr(f, key)
            if val is not None:
                parts.append(f"{key} {report.fmt(val)}")
        lines.append("  ".join(parts))
    ev = rep.evidence
    if "gevrey" in ev:
        g = ev["gevrey"]
        lines.append(f"gevrey     s = {report.fmt(g['s'])} +- {report.fmt(g['s_error'])}")
    if "komatsu" in ev:
        k = ev["komatsu"]
        lines.append(
            f"komatsu    {cfg.regime}: member = {k['member']}, L = {report.fmt(k['L'])}, "
            f"log C = {report.fmt(k['log_C'])}, trend = {report.fmt(k['trend'])}"
        )
    if "definition" in ev:
        d = ev["definition"]
        lines.append(
            f"definition {cfg.regime}: member = {d['member']}, h = {report.fmt(d['h'])}, "
            f"truncation dominated = {d['truncation_dominated']}"
        )
    if "dual" in ev:
        d = ev["dual"]
        lines.append(f"dual       {d['verdict']} (L = {report.fmt(d['L'])}, trend = {report.fmt(d['trend'])})")
    for w in rep.warnings:
        lines.append(f"warning    {w}")
    return "\n".join(lines) + "\n"


def cmd_analyze(cfg, stdout=sys.stdout):
    if not cfg.input:
        raise CliError("analyze needs an input coefficient file")
    v, provenance = read_coefficients(cfg.input)
    w, wlabel = _weights(cfg, default=None)
    if w is not None:
        check_conditions(w, 64)
        if w.certificate is None:
            raise CliError(f"weights {wlabel} fail (M.0)-(M.2)")
    rep = classify(v, w, cfg.regime, cfg.floor, cfg.m_max)
    text = _analyze_text(cfg, v, rep)
    structured = {
        "command": "analyze",
        "config": _config_record(cfg),
        "operator": {"manifold": v.operator.manifold.value, "nu": v.operator.nu, "shift": v.operator.shift, "j_max": v.j_max},
        "provenance": provenance,
        "report": rep.as_dict(),
    }
    _emit(cfg, text, structured, stdout)
    if cfg.plot:
        _plot(cfg.plot, v, rep)
    return EXIT_OK if rep.status in ("ok", "exact_zero") else EXIT_INCONCLUSIVE


# --------------------------------------------------------------------------
# synth
# --------------------------------------------------------------------------


def cmd_synth(cfg, stdout=sys.stdout):
    op = _operator(cfg)
    J = cfg.jmax if cfg.jmax is not None else 256
    if J < 0:
        raise CliError("--jmax must be non-negative")
    prov = {"profile": cfg.profile, "seed": cfg.seed}
    if cfg.profile == "poisson":
        if op.manifold is not Manifold.CIRCLE:
            raise CliError("the Poisson kernel lives on the circle")
        _, v = poisson_kernel(cfg.r, J)
        v = v.reindexed(op)
        prov["r"] = cfg.r
    elif cfg.profile == "delta":
        x0 = cfg.x0 or ([0.0] if op.manifold is Manifold.CIRCLE else [0.0, 0.0])
        v = delta_at(op, x0 if op.manifold is not Manifold.CIRCLE else x0[0], J)
        prov["x0"] = list(x0)
    else:
        w = None
        if cfg.profile == "associated":
            w, wlabel = _weights(cfg)
            prov["weights"] = wlabel
        g = cfg.g if cfg.s is None else 1.0 / cfg.s
        profile = DecayProfile(
            cfg.profile, L=cfg.L, g=g, p=cfg.p, weights=w, scale=cfg.scale, phase=cfg.phase, split=cfg.split, seed=cfg.seed
        )
        v = from_profile(op, profile, J)
        prov.update({k: val for k, val in profile.describe().items() if k not in ("weights",)})
    text_header = f"synthesized {cfg.profile} on {op.manifold.value}, j_max = {J}, seed = {cfg.seed}\n"
    if cfg.out:
        write_coefficients(cfg.out, v, prov)
        stdout.write(text_header + f"wrote {cfg.out}\n")
    else:
        from .coeffio import dumps

        stdout.write(dumps(v, prov))
    return EXIT_OK


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


def cmd_weights(cfg, stdout=sys.stdout):
    w, wlabel = _weights(cfg)
    if cfg.kmax < 4:
        raise CliError("--kmax must be at least 4")
    if cfg.regularize:
        w = log_convex_regularize(w, cfg.kmax)
        wlabel += " (log-convex regularized)"
    rep = check_conditions(w, cfg.kmax)
    d = rep.as_dict()
    lines = [f"weights    {wlabel}", f"k_max      {cfg.kmax}", f"(M.0)      {'ok' if rep.m0 else 'FAIL'}"]
    for name, wit in (("(M.1)", rep.m1), ("(M.2)", rep.m2)):
        lines.append(f"{name}      " + (f"A = {report.fmt(wit.A)}, H = {report.fmt(wit.H)}" if wit else "FAIL"))
    lines.append(f"log-convex {'yes' if rep.log_convex else f'no (first failure at k = {rep.log_convex_failure})'}")
    lines.append(f"growth     {'ok' if rep.growth else 'FAIL'}")
    values = {}
    if cfg.eval_r:
        af = AssociatedFunction(w, method="scan")
        for r in cfg.eval_r:
            values[report.fmt(r, 12)] = af(float(r))
            lines.append(f"M({report.fmt(r)}) = {report.fmt(values[report.fmt(r, 12)], 15)}")
    structured = {"command": "weights", "config": _config_record(cfg), "conditions": d, "M": values}
    _emit(cfg, "\n".join(lines) + "\n", structured, stdout)
    ok = rep.m0 and rep.m1 is not None and rep.m2 is not None and rep.growth
    return EXIT_OK if ok else EXIT_ERROR


# --------------------------------------------------------------------------
# spectrum
# --------------------------------------------------------------------------


def cmd_spectrum(cfg, stdout=sys.stdout):
    op = _operator(cfg)
    lm = cfg.lambda_max if cfg.lambda_max is not None else 50.0
    if lm <= 0:
        raise CliError("--lambda-max must be positive")
    if lm > 1e7:
        raise CliError("level listing is limited to --lambda-max <= 1e7")
    lines = ["j\tlambda\td\tlabels"]
    rows = []
    for lev in enumerate_levels(op, lm):
        labels = ";".join(",".join(str(int(c)) for c in lab) for lab in lev.labels)
        lines.append(f"{lev.j}\t{report.fmt(lev.lam, 17)}\t{lev.d}\t{labels}")
        rows.append({"j": lev.j, "lambda": lev.lam, "d": lev.d})
    structured = {"command": "spectrum", "config": _config_record(cfg), "levels": rows}
    _emit(cfg, "\n".join(lines) + "\n", structured, stdout)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------


def cmd_verify(cfg, stdout=sys.stdout):
    w, wlabel = _weights(cfg)
    lm = cfg.lambda_max if cfg.lambda_max is not None else DEFAULT_LAMBDA_MAX
    if lm <= 0:
        raise CliError("--lambda-max must be positive")
    checks = run_verify(lm, w, wlabel, cfg.seed, cfg.nu)
    lines = []
    for c in checks:
        lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
        if not c.passed and c.name == "weights.conditions":
            lines.append(f"      failed: {', '.join(c.detail['failed'])}")
        for warn in c.warnings:
            lines.append(f"      warning: {warn}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    structured = {
        "command": "verify",
        "config": _config_record(cfg),
        "checks": [c.as_dict() for c in checks],
        "passed": n_fail == 0,
    }
    _emit(cfg, "\n".join(lines) + "\n", structured, stdout)
    return EXIT_OK if n_fail == 0 else EXIT_ERROR


COMMANDS = {
    "analyze": cmd_analyze,
    "synth": cmd_synth,
    "weights": cmd_weights,
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _common(p):
    p.add_argument("--manifold", choices=[m.value for m in Manifold], default="circle")
    p.add_argument("--nu", type=int, default=2, help="operator order (only 2 is supported)")
    p.add_argument("--shift", type=float, default=0.0, help="spectral shift c in E = -Laplacian + c")
    p.add_argument("--weights", help="gevrey:S | factorial | file:PATH")
    p.add_argument("--weights-file", help="weight table file (same as --weights file:PATH)")
    p.add_argument("--jmax", type=int, help="truncation level")
    p.add_argument("--floor", type=float, default=FLOOR, help="relative coefficient floor for fits")
    p.add_argument("--regime", choices=["roumieu", "beurling"], default="roumieu")
    p.add_argument("--seed", type=int, default=0, help="seed for the SplitMix64 stream (default 0)")
    p.add_argument("--lambda-max", type=float, help="largest eigenvalue considered")
    p.add_argument("--out", help="write the text report here and its JSON twin beside it")
    p.add_argument("--plot", help="SVG decay plot (analyze)")
    p.add_argument("--json", action="store_true", help="print the structured report instead of text")


def build_parser():
    parser = argparse.ArgumentParser(prog="ultraspec", description="Regularity analysis from eigenfunction expansions.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("analyze", help="classify a coefficient file")
    p.add_argument("input")
    p.add_argument("--m-max", type=int, default=40, help="largest power of E in the definition-side test")
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic coefficient file")
    p.add_argument("--profile", choices=["exponential", "associated", "polynomial", "poisson", "delta"], default="exponential")
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--g", type=float, default=1.0, help="exponent g in exp(-L lambda^{g/nu})")
    p.add_argument("--s", type=float, help="Gevrey order, sets g = 1/s")
    p.add_argument("--p", type=float, default=3.0, help="polynomial order")
    p.add_argument("--r", type=float, default=0.5, help="Poisson kernel radius")
    p.add_argument("--x0", type=float, nargs="+", help="delta location")
    p.add_argument("--phase", choices=["zero", "random"], default="random")
    p.add_argument("--split", choices=["first", "equal", "random"], default="equal")
    p.add_argument("--scale", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("weights", help="check (M.0)-(M.2) and evaluate M(r)")
    p.add_argument("--kmax", type=int, default=64)
    p.add_argument("--eval-r", type=float, nargs="+", help="evaluate the associated function here")
    p.add_argument("--regularize", action="store_true", help="replace the table by its log-convex minorant")
    _common(p)

    p = sub.add_parser("spectrum", help="list eigenvalue levels as TSV")
    _common(p)

    p = sub.add_parser("verify", help="run the built-in bound checks")
    _common(p)
    return parser


def config_from_args(ns):
    d = vars(ns).copy()
    wf = d.pop("weights_file", None)
    if wf:
        if d.get("weights"):
            raise CliError("give either --weights or --weights-file")
        d["weights"] = f"file:{wf}"
    return RunConfig.from_dict(d)


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
        if not math.isfinite(cfg.floor) or not 0 < cfg.floor < 1:
            raise CliError("--floor must lie in (0, 1)")
        return COMMANDS[cfg.subcommand](cfg, stdout)
    except (CliError, CoefficientFileError, WeightError, ClassificationError, ValueError, OSError) as exc:
        stderr.write(f"ultraspec {ns.subcommand}: error: {exc}\n")
        return EXIT_ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
