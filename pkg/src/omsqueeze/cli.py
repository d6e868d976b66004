"""
Command-line entry point.

    omsqueeze COMMAND --config run.toml --out DIR [options]

Every successful run writes its CSV/JSON outputs and ``run_manifest.json``
into DIR. Exit codes: 0 success, 2 no stationary state, 3 fit did not
converge, 4 bad input. Failed runs write nothing.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np
import scipy

from . import __version__
from .inference import (NonConvergence, UnstableFitRegion, bae_sideband_to_variance,
                        compare_hypotheses, fit_linear_calibration, fit_output_spectrum,
                        fit_parametric_drive, output_spectrum_model, subtract_background_quadratic,
                        thermal_calibration)
from .integrate import IntegrationFailure
from .io import (ParseError, RunConfig, cavity_frame_offset_hz, load_config,
                 mechanical_frame_offset_hz, read_spectrum_csv, read_table, write_complex_csv,
                 write_spectrum_csv, write_table)
from .params import TWO_PI, UnstableParameters, ValidationError
from .quadrature import (UnstableAtPhase, phase_scan, quadrature_spectrum, quadrature_variance,
                         ratio_scan)
from .response import (DEFAULT_GRID_POINTS, SingularMatrix, default_grid, output_noise_spectrum,
                       transmission)
from .sde import (StepTooLarge, estimate_variance_from_trajectories, max_time_step,
                  simulate_trajectories, steady_state_covariance)
from .spectrum import Spectrum

EXIT_OK, EXIT_UNSTABLE, EXIT_NONCONVERGENCE, EXIT_BAD_INPUT = 0, 2, 3, 4
COMMANDS = ("spectrum", "quadrature", "phase-scan", "ratio-scan", "fit-spectrum", "calibrate",
            "bae", "fit-parametric", "sde-check")
DEFAULT_PHASES_DEG = tuple(float(x) for x in range(0, 181, 5))


class Outputs:
    """Collects files in memory so nothing is written unless the run succeeds."""

    def __init__(self):
        self.tables: Dict[str, Callable[[Path], Path]] = {}
        self.summary: dict = {}

    def table(self, name, columns):
        self.tables[name] = lambda d: write_table(d / name, columns)

    def spectrum(self, name, spec, offset=0.0):
        self.tables[name] = lambda d: write_spectrum_csv(d / name, spec, offset)

    def complex_spectrum(self, name, spec, offset=0.0):
        self.tables[name] = lambda d: write_complex_csv(d / name, spec, offset)


def _grid(cfg: RunConfig, args):
    g = cfg.grid
    points = args.grid_points or g.get("points") or DEFAULT_GRID_POINTS
    if points < 2:
        raise ParseError("grid needs at least two points", None, "points")
    if "span_hz" in g:
        half = TWO_PI * g["span_hz"] / 2.0
        return np.linspace(-half, half, points)
    return default_grid(cfg.bundle, points)


def _phases(cfg, args):
    if args.phases:
        try:
            vals = [float(x) for x in args.phases.split(",") if x.strip()]
        except ValueError:
            raise ParseError(f"cannot parse --phases {args.phases!r}", None, "phases") from None
        return np.radians(vals)
    scan = cfg.section("scan")
    return np.radians(scan["phases"]) if "phases" in scan else np.radians(DEFAULT_PHASES_DEG)


def _need_data(args, n=1):
    if not args.data or len(args.data) < n:
        raise ParseError(f"this command needs {n} --data file(s)", None, "data")
    return args.data


def cmd_spectrum(cfg, args, out: Outputs):
    b = cfg.bundle
    w = _grid(cfg, args)
    noise = output_noise_spectrum(b, w)
    off = cavity_frame_offset_hz(b)
    out.spectrum("output_noise.csv", noise.symmetrized, off)
    out.spectrum("device_noise.csv", noise.device, off)
    out.complex_spectrum("transmission.csv", transmission(b, w), off)
    out.summary.update(frame_offset_hz=off, points=len(w))


def cmd_quadrature(cfg, args, out):
    b = cfg.bundle
    phis = _phases(cfg, args) if args.phases else [b.drive.phi]
    off = mechanical_frame_offset_hz(b)
    res = []
    for phi in phis:
        spec = quadrature_spectrum(b, phi, _grid(cfg, args) if args.grid_points or cfg.grid
                                   else None)
        var = quadrature_variance(b, phi)
        name = f"quadrature_phi{math.degrees(phi):+.6g}.csv" if len(phis) > 1 else "quadrature.csv"
        out.spectrum(name, spec, off)
        res.append({"phi_deg": math.degrees(phi), "variance": var, "file": name})
    out.summary.update(results=res, frame_offset_hz=off, units="x_zp^2 per Hz")


def cmd_phase_scan(cfg, args, out):
    phis = _phases(cfg, args)
    scan = cfg.section("scan")
    res = phase_scan(cfg.bundle, phis, psi_offset=scan.get("psi_offset"))
    out.table("phase_scan.csv", {
        "phi_deg": np.degrees(phis),
        "variance": [r.variance for r in res],
        "linewidth_hz": [r.linewidth / TWO_PI for r in res],
    })


def cmd_ratio_scan(cfg, args, out):
    scan = cfg.section("scan")
    b = cfg.bundle
    ratios = np.asarray(scan.get("ratios", np.linspace(0.0, 0.9, 91)))
    np_total = scan.get("np_total", b.drive.np_minus + b.drive.np_plus)
    heating = cfg.heating if cfg.heating is not None else b.baths.n_c_th
    rs = ratio_scan(b.params, np_total, ratios, b.baths.n_m_th, heating)
    out.table("ratio_scan.csv", {"ratio": rs.ratio, "n_c_th": rs.n_c_th,
                                 "var_x1": rs.var_x1, "var_x2": rs.var_x2})
    out.summary.update(argmin_ratio=float(rs.ratio[rs.argmin()]),
                       min_var_x1=float(rs.var_x1[rs.argmin()]))


def cmd_fit_spectrum(cfg, args, out):
    if cfg.calibration is None:
        raise ParseError("fit-spectrum needs a [calibration] section", None, "calibration")
    (path,) = _need_data(args)[:1]
    b = cfg.bundle
    off = cavity_frame_offset_hz(b)
    measured = read_spectrum_csv(path, off)
    gain = cfg.calibration.gain_product
    fit = fit_output_spectrum(measured, b, gain)
    model = output_spectrum_model(fit.extra["bundle"], gain, measured.omega)
    out.spectrum("fit_model.csv", Spectrum(measured.omega, model), off)
    out.summary.update(fit=_fit_json(fit, angular=("Delta", "delta", "kappa", "gamma_m")),
                       Gamma_eff_hz=fit.extra["Gamma_eff"] / TWO_PI,
                       Gamma_eff_stderr_hz=fit.extra["Gamma_eff_stderr"] / TWO_PI,
                       gain_product=gain)


def cmd_calibrate(cfg, args, out):
    results = []
    for path in _need_data(args):
        cols = read_table(path)
        if {"power_w", "g_squared"} <= set(cols):
            pts = [cols["power_w"], cols["g_squared"]] + ([cols["sigma"]] if "sigma" in cols else [])
            fit = fit_linear_calibration(np.column_stack(pts), intercept=False)
            results.append({"file": str(path), "kind": "pump", "a": fit["slope"],
                            "a_stderr": fit.stderr["slope"]})
        elif {"temperature_k", "sideband_ratio", "kappa_hz"} <= set(cols):
            Delta = cfg.bundle.drive.Delta
            b_m, b_se, fit = thermal_calibration(cols["temperature_k"], cols["sideband_ratio"],
                                                 TWO_PI * cols["kappa_hz"],
                                                 cfg.bundle.params.omega_m, Delta,
                                                 sigma=cols.get("sigma"))
            results.append({"file": str(path), "kind": "thermal", "b_minus": b_m,
                            "b_minus_stderr": b_se, "intercept": fit["intercept"]})
        else:
            raise ParseError("calibration data needs columns power_w,g_squared or "
                             "temperature_k,sideband_ratio,kappa_hz", 1, str(path))
    out.summary.update(calibrations=results)
    pumps = [r for r in results if r["kind"] == "pump"]
    thermal = [r for r in results if r["kind"] == "thermal"]
    if pumps and thermal:
        out.summary["gain_product"] = thermal[0]["b_minus"] / pumps[0]["a"]


def cmd_bae(cfg, args, out):
    bae = cfg.section("bae")
    for k in ("b_minus", "Delta"):
        if k not in bae:
            raise ParseError("missing key in [bae]", None, k)
    kappa = bae.get("kappa", cfg.bundle.params.kappa)
    rows = []
    for path in _need_data(args):
        cols = read_table(path)
        if "sideband_ratio" in cols:
            ratios = cols["sideband_ratio"]
            phis = cols.get("phi_deg", np.full_like(ratios, math.degrees(bae.get("phi", 0.0))))
            for phi, r in zip(phis, ratios):
                rows.append((phi, r, bae_sideband_to_variance(r, bae["b_minus"], bae["Delta"],
                                                              kappa)))
        else:
            if "exclude_band_hz" not in bae or "P_minus" not in bae:
                raise ParseError("spectrum input needs exclude_band_hz and P_minus in [bae]",
                                 None, "exclude_band_hz")
            spec = read_spectrum_csv(path)
            lo, hi = bae["exclude_band_hz"]
            sub = subtract_background_quadratic(spec, (TWO_PI * lo, TWO_PI * hi))
            band = sub.spectrum.window(TWO_PI * lo, TWO_PI * hi)
            # power spectral density per Hz, integrated over ordinary frequency
            p_m = band.integral() / TWO_PI
            ratio = max(p_m, 0.0) / bae["P_minus"]
            var = bae_sideband_to_variance(ratio, bae["b_minus"], bae["Delta"], kappa)
            rows.append((math.degrees(bae.get("phi", 0.0)), ratio, var))
            name = Path(path).stem + "_background_subtracted.csv"
            out.spectrum(name, sub.spectrum)
    rows = np.array(rows, dtype=float).reshape(-1, 3)
    out.table("bae_variance.csv", {"phi_deg": rows[:, 0], "sideband_ratio": rows[:, 1],
                                   "variance": rows[:, 2]})


def cmd_fit_parametric(cfg, args, out):
    (path,) = _need_data(args)[:1]
    cols = read_table(path, required=("phi_deg", "linewidth_hz", "sigma_hz"))
    data = np.column_stack([np.radians(cols["phi_deg"]), TWO_PI * cols["linewidth_hz"],
                            TWO_PI * cols["sigma_hz"]])
    hyp = args.hypothesis or cfg.section("scan").get("hypothesis")
    if hyp is None:
        fits = compare_hypotheses(data, cfg.bundle)
    else:
        fits = {hyp: fit_parametric_drive(data, cfg.bundle, hyp)}
    out.summary["fits"] = {
        h: {**_fit_json(f, angular=("lambda_par",), angles=("psi0",))} for h, f in fits.items()}
    out.summary["preferred"] = next(iter(fits))


def cmd_sde_check(cfg, args, out):
    s = cfg.sde
    if not s:
        raise ParseError("sde-check needs an [sde] section", None, "sde")
    b = cfg.bundle
    V = steady_state_covariance(b)
    seed = args.seed if args.seed is not None else s.get("seed", 0)
    dt = s.get("dt", max_time_step(b))
    for k in ("n_steps", "n_traj"):
        if k not in s:
            raise ParseError("missing key in [sde]", None, k)
    ens = simulate_trajectories(b, seed, dt, s["n_steps"], s["n_traj"],
                                method=s.get("method", "exact"), burn_in=s.get("burn_in"),
                                batch_steps=s.get("batch_steps"))
    phis = _phases(cfg, args) if args.phases else np.radians([0.0, 90.0])
    rows = {"phi_deg": [], "var_sde": [], "sigma": [], "var_lyapunov": [], "var_frequency": []}
    for phi in phis:
        est = estimate_variance_from_trajectories(ens, phi)
        c = np.array([math.cos(phi), -math.sin(phi)])
        rows["phi_deg"].append(math.degrees(phi))
        rows["var_sde"].append(est.variance)
        rows["sigma"].append(est.sigma)
        rows["var_lyapunov"].append(float(c @ V[2:, 2:] @ c))
        rows["var_frequency"].append(quadrature_variance(b, phi))
    out.table("sde_check.csv", rows)
    out.summary.update(seed=seed, dt=dt, n_steps=ens.n_steps, n_traj=ens.n_traj,
                       burn_in_steps=ens.burn_in_steps, batch_steps=ens.batch_steps)


HANDLERS = {
    "spectrum": cmd_spectrum, "quadrature": cmd_quadrature, "phase-scan": cmd_phase_scan,
    "ratio-scan": cmd_ratio_scan, "fit-spectrum": cmd_fit_spectrum, "calibrate": cmd_calibrate,
    "bae": cmd_bae, "fit-parametric": cmd_fit_parametric, "sde-check": cmd_sde_check,
}


def _fit_json(fit, angular=(), angles=()):
    def conv(name, v):
        if name in angular:
            return v / TWO_PI
        if name in angles:
            return math.degrees(v)
        return v
    return {
        "values": {n: conv(n, v) for n, v in fit.values.items()},
        "stderr": {n: conv(n, v) for n, v in fit.stderr.items()},
        "units": {n: "Hz" if n in angular else "deg" if n in angles else "" for n in fit.values},
        "rss": fit.rss, "iterations": fit.iterations, "converged": fit.converged,
        "message": fit.message,
    }


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args, argv, cfg: RunConfig, files: List[str], summary):
    return {
        "command": args.command,
        "argv": list(argv),
        "config_path": str(cfg.path) if cfg.path else None,
        "config_text": cfg.text,
        "config_sha256": hashlib.sha256(cfg.text.encode()).hexdigest(),
        "data": [{"path": str(p), "sha256": _sha256(p)} for p in (args.data or [])],
        "seed": args.seed,
        "grid_points": args.grid_points,
        "phases": args.phases,
        "hypothesis": args.hypothesis,
        "outputs": files,
        "summary": summary,
        "versions": {"omsqueeze": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omsqueeze",
                                description="Two-tone optomechanical squeezing toolkit.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=None, help="output directory (default [output].dir or .)")
    p.add_argument("--grid-points", type=int, default=None, dest="grid_points")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--phases", default=None, help='comma-separated probe phases in degrees')
    p.add_argument("--hypothesis", choices=("follow", "constant"), default=None)
    p.add_argument("--data", action="append", default=None, help="input CSV (repeatable)")
    return p


def _fail(code, msg):
    print(f"omsqueeze: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_BAD_INPUT

    try:
        cfg = load_config(args.config)
        out = Outputs()
        HANDLERS[args.command](cfg, args, out)
    except (UnstableParameters, UnstableAtPhase, UnstableFitRegion, IntegrationFailure,
            SingularMatrix) as exc:
        return _fail(EXIT_UNSTABLE, f"unstable parameters: {exc}")
    except NonConvergence as exc:
        return _fail(EXIT_NONCONVERGENCE, str(exc))
    except (ParseError, ValidationError, StepTooLarge, ValueError, OSError) as exc:
        return _fail(EXIT_BAD_INPUT, f"bad input: {exc}")

    out_dir = Path(args.out or cfg.section("output").get("dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [str(writer(out_dir).name) for writer in out.tables.values()]
    if out.summary:
        (out_dir / "summary.json").write_text(json.dumps(out.summary, indent=2, default=float))
        files.append("summary.json")
    manifest = _manifest(args, argv, cfg, files, out.summary)
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2, default=float))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
