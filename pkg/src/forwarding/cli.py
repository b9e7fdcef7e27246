"""Command-line front end: design, verify, simulate, sweep.

Exit codes: 0 success, 2 config error, 3 assumption failure,
4 certificate violation, 5 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys as _sys
from pathlib import Path

import numpy as np

from .cascade import CheckReport, _json_value, check_detectability, run_assumption_checks
from .certify import verify_certificate
from .config import DESIGN_SIGNS, ScenarioConfig
from .design import DesignCertificate, compute_rho, design, gain_H, k_star
from .errors import (
    AssumptionViolation,
    ConditioningError,
    ConfigError,
    DegenerateGainError,
    ForwardingError,
    GainTooLargeError,
    NumericError,
    StepSizeError,
)
from .simulate import (
    assemble_closed_loop,
    estimate_decay_rate,
    integrate,
    lyapunov_trace,
    sign_diagnostic,
    spectral_abscissa,
    sweep_k,
    with_traces,
    write_full_state_csv,
    write_sweep_csv,
    write_trajectory_csv,
)
from .sylvester import save_solution, solve_sylvester

log = logging.getLogger("forwarding")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_CERTIFICATE = 4
EXIT_NUMERIC = 5


class CliFailure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _dump(path: Path, payload) -> None:
    path.write_text(json.dumps(_json_value(payload), indent=2, sort_keys=True) + "\n")


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir
    if not out.is_absolute() and not args.out:
        out = cfg.base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_k(text):
    if text is None or text == "auto":
        return text
    try:
        k = float(text)
    except ValueError:
        raise ConfigError(f"--k: expected a number or 'auto', got {text!r}") from None
    if not np.isfinite(k) or k < 0:
        raise ConfigError("--k: must be a non-negative finite number")
    return k


def _parse_sweep(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--sweep: expected MIN:MAX:COUNT")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--sweep: cannot parse {text!r}") from None
    if not (0 < lo < hi) or count < 1:
        raise ConfigError("--sweep: need 0 < MIN < MAX and COUNT >= 1")
    return np.linspace(lo, hi, count)


def _load_certificate(path: Path, cfg: ScenarioConfig, system) -> DesignCertificate:
    if not path.exists():
        raise ConfigError(f"certificate not found: {path} (run 'design' first)")
    try:
        cert = DesignCertificate.from_json(path.read_text())
    except (KeyError, ValueError, TypeError) as exc:
        raise CliFailure(EXIT_CERTIFICATE, f"certificate_format: {exc}") from None
    expected = {"H": (system.m, system.r), "L": (system.r, system.p), "Pi": (system.r, system.r)}
    bad = [f"{name} is {getattr(cert, name).shape}, expected {shape}"
           for name, shape in expected.items() if getattr(cert, name).shape != shape]
    if cert.meta.get("n_interior", system.n) != system.n:
        bad.append(f"n_interior {cert.meta['n_interior']} != {system.n}")
    if bad:
        raise CliFailure(EXIT_CERTIFICATE, "certificate_dimensions: " + "; ".join(bad))
    return cert


def _pipeline_front(cfg: ScenarioConfig):
    """System, assumption reports, Sylvester solution and H (or failure)."""
    system = cfg.build_system()
    reports = run_assumption_checks(system)
    if not all(r.passed for r in reports if r.required):
        return system, reports, None, None
    try:
        sol = solve_sylvester(system)
    except ConditioningError as exc:
        raise CliFailure(EXIT_NUMERIC, f"sylvester: {exc}") from exc
    H = gain_H(sol, system.B)
    det = check_detectability(system.S, H @ system.Q)
    reports.append(CheckReport("detectability", det.passed, det.witness))
    return system, reports, sol, H


def _resolve_sign(cfg, args, system, H, k):
    sign = args.sign or cfg.sign
    diag = sign_diagnostic(system, H, k)
    if sign == "auto":
        sign = diag["stabilizing"][0] if len(diag["stabilizing"]) == 1 else "plus"
    return sign, diag


def cmd_design(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    out = _out_dir(args, cfg)
    system, reports, sol, H = _pipeline_front(cfg)
    assumptions = out / "assumptions.json"
    failed = [r.name for r in reports if r.required and not r.passed]
    if failed:
        _dump(assumptions, {"assumptions": [r.to_dict() for r in reports], "failed": failed})
        print(f"assumption failure: {', '.join(failed)}", file=_sys.stderr)
        return EXIT_ASSUMPTION

    k = _parse_k(args.k) if args.k is not None else cfg.k
    if k == 0:
        raise ConfigError("--k: the design needs k > 0")
    try:
        ks = k_star(compute_rho(system, sol, H))
        k_val = 0.5 * ks if k == "auto" else float(k)
        sign, diag = _resolve_sign(cfg, args, system, H, k_val)
        cert = design(system, sol, k=k_val, epsilon=cfg.epsilon, sign=sign)
    except (GainTooLargeError, DegenerateGainError) as exc:
        reports.append(CheckReport("gain_bound", False, {"error": str(exc)}))
        _dump(assumptions, {"assumptions": [r.to_dict() for r in reports], "failed": ["gain_bound"]})
        print(f"certificate violation: {exc}", file=_sys.stderr)
        return EXIT_CERTIFICATE
    cert.meta["sign_diagnostic"] = diag
    _dump(assumptions, {"assumptions": [r.to_dict() for r in reports], "failed": []})
    save_solution(sol, out / "sylvester.json", out / "sylvester.csv")
    (out / "certificate.json").write_text(cert.to_json() + "\n")
    print(f"k_star = {cert.k_star:.10g}, k = {cert.k:.10g}, sign = {sign}, a = {cert.a:.6g}")
    return EXIT_OK


def _verify_reports(cert, system, sol):
    reports = verify_certificate(cert, system, sol)
    sign = cert.meta.get("sign", "plus")
    reports.append(CheckReport("feedback_sign", sign == "plus",
                               {"sign": sign, "certified_sign": "plus"}))
    return reports


def cmd_verify(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    out = _out_dir(args, cfg)
    system, reports, sol, H = _pipeline_front(cfg)
    failed = [r.name for r in reports if r.required and not r.passed]
    if failed:
        print(f"assumption failure: {', '.join(failed)}", file=_sys.stderr)
        return EXIT_ASSUMPTION
    cert = _load_certificate(Path(args.certificate or out / "certificate.json"), cfg, system)
    checks = _verify_reports(cert, system, sol)
    bad = [r for r in checks if not r.passed]
    _dump(out / "verification.json", {"checks": [r.to_dict() for r in checks],
                                      "failed": [r.name for r in bad]})
    for r in checks:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
    for r in bad:
        detail = r.witness.get("error")
        if detail:
            print(f"{r.name}: {detail}", file=_sys.stderr)
    return EXIT_CERTIFICATE if bad else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    out = _out_dir(args, cfg)
    system, reports, sol, H = _pipeline_front(cfg)
    if not all(r.passed for r in reports if r.required):
        print("assumption failure", file=_sys.stderr)
        return EXIT_ASSUMPTION
    cert = _load_certificate(Path(args.certificate or out / "certificate.json"), cfg, system)
    k = cert.k if args.k is None else _parse_k(args.k)
    if k == "auto":
        k = cert.k
    sign = args.sign or cert.meta.get("sign", "plus")
    if sign == "auto":
        sign = "plus"
    cl = assemble_closed_loop(system, cert.H, k, sign)
    w0 = cfg.initial_state(system)
    try:
        traj = integrate(cl, w0, cfg.T, cfg.dt, scheme=cfg.scheme)
    except (StepSizeError, NumericError) as exc:
        raise CliFailure(EXIT_NUMERIC, f"integrator ({cl.n + cl.r} states, dt = {cfg.dt}): {exc}") from exc
    v, w, report = lyapunov_trace(traj, cert, sol, system)
    traj = with_traces(traj, v, w)
    try:
        rate = estimate_decay_rate(w, traj.times)
    except ValueError:
        rate = None
    summary = {
        "k": k,
        "sign": sign,
        "scheme": traj.scheme,
        "T": cfg.T,
        "dt": cfg.dt,
        "abscissa": spectral_abscissa(cl),
        "decay_rate_W": rate,
        "W_initial": float(w[0]),
        "W_final": float(w[-1]),
        "z_norm_initial": float(np.linalg.norm(traj.z[0])),
        "z_norm_final": float(np.linalg.norm(traj.z[-1])),
        "lyapunov": report,
        "sign_diagnostic": sign_diagnostic(system, cert.H, k) if k > 0 else None,
    }
    fmt = args.format or "csv"
    if fmt == "csv":
        write_trajectory_csv(out / "trajectory.csv", traj, system.h)
        if args.full_state:
            write_full_state_csv(out / "trajectory_phi.csv", traj)
    else:
        payload = {"t": traj.times, "z": traj.z, "V": v, "W": w,
                   "phi_norm": np.sqrt(system.h * np.sum(traj.phi**2, axis=1))}
        if args.full_state:
            payload["phi"] = traj.phi
        _dump(out / "trajectory.json", payload)
    _dump(out / "summary.json", summary)
    print(f"abscissa = {summary['abscissa']:.6g}, W decreasing = {report['w_monotone']}")
    if report["consistent"] and not (report["w_strictly_decreasing"] or w[0] == 0.0):
        return EXIT_CERTIFICATE
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    if not args.sweep:
        raise ConfigError("sweep needs --sweep MIN:MAX:COUNT")
    ks = _parse_sweep(args.sweep)
    out = _out_dir(args, cfg)
    system, reports, sol, H = _pipeline_front(cfg)
    if not all(r.passed for r in reports if r.required):
        print("assumption failure", file=_sys.stderr)
        return EXIT_ASSUMPTION
    try:
        kstar = k_star(compute_rho(system, sol, H))
    except DegenerateGainError as exc:
        print(str(exc), file=_sys.stderr)
        return EXIT_ASSUMPTION
    sign = args.sign or cfg.sign
    signs = ("plus", "minus") if sign == "auto" else (sign,)
    rows = sweep_k(system, H, ks, signs=signs, k_star=kstar)
    if (args.format or "csv") == "csv":
        write_sweep_csv(out / "sweep.csv", rows)
    else:
        _dump(out / "sweep.json", {"k_star": kstar, "rows": [
            {"k": r.k, "sign": r.sign, "abscissa": r.abscissa, "stable": r.stable} for r in rows]})
    certified = [r for r in rows if r.sign == "plus" and 0 < r.k < kstar]
    print(f"k_star = {kstar:.10g}; {sum(r.stable for r in certified)}/{len(certified)} "
          "certified gains stable")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forwarding", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
        p.add_argument("--sign", choices=DESIGN_SIGNS)
        p.add_argument("--format", choices=("csv", "json"))
        return p

    p = common(sub.add_parser("design", help="solve Sylvester, build certificate"))
    p.add_argument("--k", metavar="VALUE", help="gain, or 'auto' for k_star/2")
    p.set_defaults(func=cmd_design)

    p = common(sub.add_parser("verify", help="re-check a certificate"))
    p.add_argument("--certificate", metavar="PATH")
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("simulate", help="integrate the closed loop"))
    p.add_argument("--certificate", metavar="PATH")
    p.add_argument("--k", metavar="VALUE", help="override the certificate gain")
    p.add_argument("--full-state", action="store_true", help="also export phi at every node")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("sweep", help="spectral abscissa over a gain grid"))
    p.add_argument("--sweep", metavar="MIN:MAX:COUNT")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        print(f"assumption failure: {exc}", file=_sys.stderr)
        return EXIT_ASSUMPTION
    except CliFailure as exc:
        print(str(exc), file=_sys.stderr)
        return exc.code
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    except ForwardingError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CERTIFICATE


if __name__ == "__main__":
    raise SystemExit(main())
