"""Command line front end.

Subcommands ``timemap``, ``scan-phi``, ``diagram``, ``verify`` and
``asymptotics``.  Exit status is 0 on success, 1 when a numerical check
fails and 2 on usage or domain errors.  Settings come from flags, then a
``--config`` file of ``key=value`` lines, then built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import analysis
from . import timemaps as tm
from .errors import DomainError
from .shooting import TOL_RANGE, verify_branch_point
from .timemaps import BranchId

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

DIAGRAM_HEADER = ["family", "k", "phi", "z", "signed_z", "T"]
SCAN_HEADER = ["z", "phi", "Phi", "in_omega"]
TIMEMAP_HEADER = ["family", "k", "phi", "z", "alpha", "T", "dT_dz"]
ROUND_TRIP_TOL = 1e-9
Y_RESIDUAL_TOL = 1e-6
V_DRIFT_TOL = 1e-8


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    phi: float = math.pi / 4
    k_max: int = 2
    L_max: float | None = None  # 4 T_star when unset
    phi_count: int = 200
    z_count: int = 200
    margin: float = 0.005
    tol: float = 1e-10
    pts: int = 64
    n: int = 10
    threads: int = 0
    families: str = "I,A,B,C,D,Dprime"
    phis: str = ""
    out: str = ""
    json: str = ""
    svg: str = ""
    format: str = "csv"


def fmt(x) -> str:
    """17 significant digits, independent of locale."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def parse_phi_frac(text: str) -> float:
    try:
        frac = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--phi-frac expects p/q, got {text!r}") from exc
    return math.pi * frac.numerator / frac.denominator


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc.strerror}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _convert(name: str, value: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if "int" in kind:
            return int(value)
        if "float" in kind:
            return float(value)
    except ValueError as exc:
        raise UsageError(f"bad value for {name}: {value!r}") from exc
    return value


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over the config file over the defaults."""
    file_values = read_config_file(args.config) if args.config else {}
    known = {f.name for f in fields(RunConfig)} | {"phi_frac"}
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig()
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            setattr(cfg, f.name, flag)
        elif f.name in file_values:
            setattr(cfg, f.name, _convert(f.name, file_values[f.name]))
    if getattr(args, "phi", None) is not None and getattr(args, "phi_frac", None) is not None:
        raise UsageError("give either --phi or --phi-frac, not both")
    if getattr(args, "phi_frac", None) is not None:
        cfg.phi = parse_phi_frac(args.phi_frac)
    elif getattr(args, "phi", None) is None and "phi_frac" in file_values:
        cfg.phi = parse_phi_frac(file_values["phi_frac"])
    lo, hi = TOL_RANGE
    if not (lo < cfg.tol < hi):
        raise UsageError(f"tolerance {cfg.tol:g} out of accepted range ({lo:g}, {hi:g})")
    return cfg


def metadata_line(command: str, cfg: RunConfig, **extra) -> str:
    parts = [f"# pendulum_bvp {__version__}", command, f"phi={fmt(cfg.phi)}"]
    parts += [f"{k}={fmt(v) if isinstance(v, float) else v}" for k, v in extra.items()]
    return " ".join(parts) + "\n"


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def _csv_text(header, rows, meta: str = "") -> str:
    buf = io.StringIO()
    buf.write(meta)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    return json.dumps(clean(obj), indent=2) + "\n"


# -- timemap ---------------------------------------------------------------


def cmd_timemap(args, cfg: RunConfig) -> int:
    phi = cfg.phi
    fam = args.family
    rows = []
    if fam in ("T", "T1"):
        if args.alpha is None:
            raise UsageError(f"--family {fam} needs --alpha")
        for alpha in args.alpha:
            if fam == "T":
                T = tm.time_T(alpha)
            else:
                if args.nu is None:
                    raise UsageError("--family T1 needs --nu")
                T = tm.time_T1(alpha, args.nu)
            z = fmt(tm.z_from_alpha(alpha, phi)) if phi <= alpha < tm.HALF_PI else ""
            rows.append([fam, 0, fmt(phi), z, fmt(alpha), fmt(T), ""])
    else:
        branch = BranchId.parse(fam)
        if args.k is not None:
            branch = BranchId(branch.family, branch.winding + args.k)
        bcfg = tm.make_config(phi)
        if args.z is not None:
            zs = list(args.z)
        elif args.alpha is not None:
            zs = [tm.z_from_alpha(a, phi) for a in args.alpha]
        else:
            raise UsageError("give --z or --alpha")
        for z in zs:
            T = tm.branch_time(branch, z, bcfg)
            try:
                d = fmt(tm.branch_dT_dz(branch, z, bcfg))
            except DomainError:
                d = ""
            alpha = fmt(tm.alpha_from_z(z, phi)) if 0.0 <= z < bcfg.z_star else ""
            rows.append([branch.label, branch.winding, fmt(phi), fmt(z), alpha, fmt(T), d])
    sys.stdout.write(_csv_text(TIMEMAP_HEADER, rows))
    return EXIT_OK


# -- scan-phi --------------------------------------------------------------


def scan_rows(report: analysis.ScanReport):
    for i, phi in enumerate(report.phi_grid):
        for j, z in enumerate(report.z_grid):
            yield [fmt(z), fmt(phi), fmt(report.values[i, j]), fmt(bool(report.omega_mask[i, j]))]


def cmd_scan_phi(args, cfg: RunConfig) -> int:
    report = analysis.scan_Phi(cfg.phi_count, cfg.z_count, cfg.margin, threads=cfg.threads or None)
    out = cfg.out or "phi_scan.csv"
    meta = metadata_line("scan-phi", cfg, phi_count=cfg.phi_count, z_count=cfg.z_count, margin=cfg.margin)
    _write(out, _csv_text(SCAN_HEADER, scan_rows(report), meta))
    exceptions = report.omega_exceptions
    summary = {
        "min_Phi": report.min_Phi,
        "argmin_z": report.argmin[0],
        "argmin_phi": report.argmin[1],
        "violations": [list(v) for v in report.violations],
        "violation_count": len(report.violations),
        "omega_exception_count": len(exceptions),
        "failure_count": len(report.failures),
        "failures": [f"z={z!r} phi={p!r}: {msg}" for z, p, msg in report.failures],
        "phi_count": cfg.phi_count,
        "z_count": cfg.z_count,
        "margin": cfg.margin,
    }
    _write(cfg.json or "phi_scan.json", _json_text(summary))
    ok = not report.violations and not report.failures and not exceptions
    print(
        f"points={cfg.phi_count * cfg.z_count} min_Phi={fmt(report.min_Phi)} "
        f"at z={fmt(report.argmin[0])} phi={fmt(report.argmin[1])} "
        f"violations={len(report.violations)} failures={len(report.failures)}"
    )
    return EXIT_OK if ok else EXIT_FAILED


# -- diagram ---------------------------------------------------------------


def diagram_rows(diagram: analysis.Diagram):
    phi = diagram.config.phi
    for branch, pts in diagram.branches:
        for p in pts:
            yield [branch.label, branch.winding, fmt(phi), fmt(p.z), fmt(p.signed_z), fmt(p.T)]


def read_diagram_csv(path: str) -> tuple[str, list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    meta = "".join(line + "\n" for line in text.splitlines() if line.startswith("#"))
    body = [line for line in text.splitlines() if not line.startswith("#")]
    reader = csv.reader(body)
    header = next(reader, None)
    if header != DIAGRAM_HEADER:
        raise UsageError(f"{path}: header must be {','.join(DIAGRAM_HEADER)}")
    return meta, list(reader)


def round_trip_errors(rows: list[list[str]]) -> list[str]:
    """Rows whose stored T differs from a fresh branch_time by 1e-9 or more."""
    bad = []
    configs = {}
    for row in rows:
        label, _, phi, z, _, T = row
        phi = float(phi)
        if phi not in configs:
            configs[phi] = tm.make_config(phi)
        fresh = tm.branch_time(BranchId.parse(label), float(z), configs[phi])
        if not abs(fresh - float(T)) < ROUND_TRIP_TOL:
            bad.append(f"{label} z={z}: stored {T}, recomputed {fmt(fresh)}")
    return bad


_PALETTE = {"I": "#1f77b4", "A": "#2ca02c", "B": "#d62728", "C": "#9467bd", "D": "#ff7f0e", "Dprime": "#8c564b"}


def render_svg(rows: list[list[str]], T_max: float, T_star: float, width: int = 800, height: int = 500) -> str:
    """Polylines with T across and signed z up, one per branch label."""
    pad = 50
    sx = (width - 2 * pad) / T_max
    sy = (height - 2 * pad) / 4.0

    def px(T, s):
        return f"{pad + T * sx:.2f},{height / 2 - s * sy:.2f}"

    groups: dict[str, list[tuple[float, float]]] = {}
    for label, _, _, _, s, T in rows:
        groups.setdefault(label, []).append((float(T), float(s)))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height / 2}" x2="{width - pad}" y2="{height / 2}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad + T_star * sx:.2f}" y1="{pad}" x2="{pad + T_star * sx:.2f}" y2="{height - pad}" '
        'stroke="gray" stroke-dasharray="4 4"/>',
        f'<text x="{pad + T_star * sx:.2f}" y="{height - pad + 16}" font-size="12">T*</text>',
        f'<text x="{width - pad}" y="{height / 2 + 16}" font-size="12">2L</text>',
        f'<text x="{pad - 40}" y="{pad - 10}" font-size="12">sgn(y(-L)) z</text>',
    ]
    for label, pts in groups.items():
        pts.sort(key=lambda p: p[1])
        fam = BranchId.parse(label).family
        path = " ".join(px(T, s) for T, s in pts)
        out.append(f'<polyline fill="none" stroke="{_PALETTE[fam]}" stroke-width="1.5" points="{path}"/>')
        T, s = max(pts, key=lambda p: p[0])
        out.append(f'<text x="{pad + T * sx + 3:.2f}" y="{height / 2 - s * sy:.2f}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_diagram(args, cfg: RunConfig) -> int:
    if args.check:
        meta, rows = read_diagram_csv(args.check)
        bad = round_trip_errors(rows)
        for line in bad:
            print(line, file=sys.stderr)
        rewritten = _csv_text(DIAGRAM_HEADER, rows, meta)
        identical = rewritten == Path(args.check).read_text(encoding="utf-8")
        print(f"rows={len(rows)} round_trip_failures={len(bad)} byte_identical={identical}")
        return EXIT_OK if not bad and identical else EXIT_FAILED

    bcfg = tm.make_config(cfg.phi)
    L_max = cfg.L_max if cfg.L_max is not None else 4.0 * bcfg.T_star
    diagram = analysis.trace_diagram(bcfg, cfg.k_max, L_max, cfg.pts)
    rows = list(diagram_rows(diagram))
    meta = metadata_line("diagram", cfg, k_max=cfg.k_max, L_max=L_max, pts=cfg.pts)
    if cfg.format == "csv":
        _write(cfg.out or "diagram.csv", _csv_text(DIAGRAM_HEADER, rows, meta))
    elif cfg.format == "json":
        obj = {
            "phi": bcfg.phi,
            "T_star": bcfg.T_star,
            "z_star": bcfg.z_star,
            "L_max": L_max,
            "k_max": cfg.k_max,
            "rows": [dict(zip(DIAGRAM_HEADER, r)) for r in rows],
        }
        _write(cfg.out or "diagram.json", _json_text(obj))
    if cfg.format == "svg" or cfg.svg:
        _write(cfg.svg or cfg.out or "diagram.svg", render_svg(rows, 2.0 * L_max, bcfg.T_star))
    counts = ", ".join(f"{b.label}:{len(p)}" for b, p in diagram.branches)
    print(f"branches={len(diagram.branches)} rows={len(rows)} [{counts}]")
    return EXIT_OK


# -- verify ----------------------------------------------------------------


def _verify_branches(cfg: RunConfig) -> list[BranchId]:
    out = []
    for name in (s.strip() for s in cfg.families.split(",") if s.strip()):
        if name in ("Bprime", "B'"):
            out.append(BranchId("Dprime", 0))
            continue
        try:
            probe = BranchId(name)
        except DomainError as exc:
            raise UsageError(str(exc)) from exc
        out += [BranchId(probe.family, k) for k in range(cfg.k_max + 1)]
    return out


def cmd_verify(args, cfg: RunConfig) -> int:
    bcfg = tm.make_config(cfg.phi)
    points = []
    for branch in _verify_branches(cfg):
        dom = tm.branch_domain(branch, bcfg)
        worst = 0.0
        for z in analysis.mirrored_grid(dom.lo, dom.hi, cfg.n):
            r = verify_branch_point(branch, float(z), bcfg, cfg.tol)
            ok = r.passed and r.V_drift < V_DRIFT_TOL
            points.append(
                {
                    "branch": branch.label,
                    "z": float(z),
                    "T": r.duration,
                    "y_residual": r.y_residual,
                    "V_drift": r.V_drift,
                    "crossings": r.crossings,
                    "expected_crossings": r.expected_crossings,
                    "passed": ok,
                }
            )
            worst = max(worst, r.y_residual)
        print(f"{branch.label}: n={cfg.n} max_y_residual={worst:.3e}")
    failed = [p for p in points if not p["passed"]]
    report = {
        "phi": bcfg.phi,
        "tol": cfg.tol,
        "checked": len(points),
        "failed": len(failed),
        "max_y_residual": max((p["y_residual"] for p in points), default=0.0),
        "max_V_drift": max((p["V_drift"] for p in points), default=0.0),
        "points": points,
    }
    _write(cfg.json or "verify.json", _json_text(report))
    return EXIT_OK if not failed else EXIT_FAILED


# -- asymptotics -----------------------------------------------------------

ASYMPTOTIC_HEADER = ["phi", "check", "z", "value", "target", "residual", "threshold", "passed"]


def cmd_asymptotics(args, cfg: RunConfig) -> int:
    if cfg.phis:
        try:
            phis = [float(s) for s in cfg.phis.split(",") if s.strip()]
        except ValueError as exc:
            raise UsageError(f"--phis expects comma separated radians, got {cfg.phis!r}") from exc
    elif getattr(args, "phi", None) is not None or getattr(args, "phi_frac", None) is not None:
        phis = [cfg.phi]
    else:
        phis = [0.4, math.pi / 4, 1.1]
    rows = []
    ok = True
    for phi in phis:
        report = analysis.asymptotic_suite(phi)
        ok = ok and report.passed
        for c in report.checks:
            rows.append([fmt(phi), c.name, fmt(c.z), fmt(c.value), fmt(c.target), fmt(c.residual), fmt(c.threshold), fmt(c.passed)])
    text = _csv_text(ASYMPTOTIC_HEADER, rows)
    if cfg.out:
        _write(cfg.out, text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAILED


# -- parser ----------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--phi", type=float, help="Dirichlet angle in radians (default pi/4)")
    common.add_argument("--phi-frac", help="Dirichlet angle as a fraction p/q of pi")
    common.add_argument("--tol", type=float, help="integration tolerance in (1e-14, 1e-3)")

    parser = argparse.ArgumentParser(prog="pendulum-bvp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("timemap", parents=[common], help="evaluate time maps")
    p.add_argument("--family", required=True, help="T, T1, I, A, B, C, D, Dprime, Bprime or a label such as I1, D2'")
    p.add_argument("--k", type=int, help="winding added to the family")
    p.add_argument("--z", type=_floats, help="comma separated z values")
    p.add_argument("--alpha", type=_floats, help="comma separated alpha values")
    p.add_argument("--nu", type=float, help="upper limit for T1")
    p.set_defaults(func=cmd_timemap)

    p = sub.add_parser("scan-phi", parents=[common], help="scan Phi over (z, phi)")
    p.add_argument("--phi-count", type=int)
    p.add_argument("--z-count", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--threads", type=int, help="worker processes (0 = TIMEMAP_THREADS or all CPUs)")
    p.add_argument("--out", help="CSV grid (default phi_scan.csv)")
    p.add_argument("--json", help="JSON summary (default phi_scan.json)")
    p.set_defaults(func=cmd_scan_phi)

    p = sub.add_parser("diagram", parents=[common], help="trace the bifurcation diagram")
    p.add_argument("--k-max", type=int)
    p.add_argument("--L-max", type=float, help="largest half width L (default 4 T*)")
    p.add_argument("--pts", type=int, help="grid points per branch")
    p.add_argument("--format", choices=("csv", "json", "svg"))
    p.add_argument("--out", help="output path (default diagram.<format>)")
    p.add_argument("--svg", help="also render an SVG here")
    p.add_argument("--check", metavar="CSV", help="re-evaluate a written diagram.csv instead of tracing")
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("verify", parents=[common], help="cross-check branches by shooting")
    p.add_argument("--families", help="comma separated families (default I,A,B,C,D,Dprime)")
    p.add_argument("--k-max", type=int)
    p.add_argument("--n", type=int, help="samples per branch")
    p.add_argument("--json", help="JSON report (default verify.json)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("asymptotics", parents=[common], help="small-z asymptotic checks")
    p.add_argument("--phis", help="comma separated angles (default 0.4, pi/4, 1.1)")
    p.add_argument("--out", help="also write the table here")
    p.set_defaults(func=cmd_asymptotics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        return args.func(args, cfg)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
