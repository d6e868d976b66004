"""
Run configuration and spectrum files.

Configuration is one TOML file per run. Frequencies and rates are given in
Hz and angles in degrees; both are converted to rad/s and radians exactly
once, here. Unknown keys are rejected with the line they appear on.

Spectrum CSV files have the header ``freq_hz,value`` or
``freq_hz,value,sigma``. Frequencies are lab-frame Hz: the rotating-frame
axis plus a frame offset ((omega_c + Delta) / 2 pi for cavity spectra,
(omega_m + delta) / 2 pi for mechanical ones). Numbers are written with 17
significant digits, so values re-read bit for bit.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .inference.calibration import CalibrationConstants
from .params import (TWO_PI, BathOccupations, Bundle, DriveConfig, SystemParams,
                     validate_params)
from .quadrature import HeatingModel
from .spectrum import Spectrum

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
SPECTRUM_HEADER = ("freq_hz", "value", "sigma")


class ParseError(ValueError):
    """Malformed input; ``line`` (1-based, may be None) and ``key`` locate it."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message}" + (f" ({', '.join(where)})" if where else ""))
        self.line = line
        self.key = key


# section -> {key: kind}; kinds: hz, deg, num, int, str, list, table, bool
_SCHEMA: Dict[str, Dict[str, str]] = {
    "system": {"omega_m": "hz", "kappa": "hz", "kappa_L": "hz", "kappa_R": "hz",
               "kappa_I": "hz", "gamma_m": "hz", "g0": "hz", "x_zp": "num", "mass": "num",
               "omega_c": "hz"},
    "drive": {"Delta": "hz", "delta": "hz", "np_minus": "num", "np_plus": "num",
              "np_total": "num", "ratio": "num", "P_minus": "num", "P_plus": "num",
              "phi": "deg", "lambda_par": "hz", "psi": "deg"},
    "baths": {"n_c_th": "num", "n_m_th": "num", "n_sigma_th": "table"},
    "grid": {"span_hz": "num", "points": "int"},
    "heating": {"n_c0": "num", "slope_per_ratio": "num"},
    "sde": {"seed": "int", "dt": "num", "n_steps": "int", "n_traj": "int", "method": "str",
            "burn_in": "num", "batch_steps": "int"},
    "calibration": {"a_minus": "num", "a_plus": "num", "b_minus": "num",
                    "parasitic_correction": "table"},
    "scan": {"phases": "list", "psi_offset": "deg", "ratios": "list", "np_total": "num",
             "hypothesis": "str"},
    "bae": {"b_minus": "num", "Delta": "hz", "kappa": "hz", "P_minus": "num",
            "exclude_band_hz": "list", "phi": "deg"},
    "output": {"dir": "str"},
}
_REQUIRED_SYSTEM = ("omega_m", "kappa", "kappa_L", "kappa_R", "gamma_m", "g0")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A parsed, unit-converted configuration.

    ``sections`` holds every section after conversion (rad/s, radians);
    ``bundle`` is the validated model input. Optional sections that are
    absent are ``None``.
    """

    path: Optional[Path]
    text: str
    sections: Dict[str, dict]
    bundle: Bundle
    calibration: Optional[CalibrationConstants] = None
    heating: Optional[HeatingModel] = None

    def section(self, name: str) -> dict:
        return self.sections.get(name) or {}

    @property
    def grid(self) -> dict:
        return self.section("grid")

    @property
    def sde(self) -> Optional[dict]:
        return self.sections.get("sde")


def _key_lines(text: str) -> Dict[tuple, int]:
    """Map (section, key) to the line that defines it."""
    out, section = {}, ""
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]$", line)
        if m:
            section = m.group(1)
            out[(section, None)] = i
            continue
        m = re.match(r"^([A-Za-z0-9_\"'-]+)\s*=", line)
        if m:
            out[(section, m.group(1).strip("\"'"))] = i
    return out


def _convert(kind, value, section, key, lines):
    line = lines.get((section, key))
    if kind in ("hz", "deg", "num"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError("expected a number", line, key)
        v = float(value)
        if not math.isfinite(v):
            raise ParseError("expected a finite number", line, key)
        return TWO_PI * v if kind == "hz" else math.radians(v) if kind == "deg" else v
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError("expected an integer", line, key)
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ParseError("expected a string", line, key)
        return value
    if kind == "list":
        if not isinstance(value, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            raise ParseError("expected a list of numbers", line, key)
        return [float(x) for x in value]
    if kind == "table":
        if not isinstance(value, dict):
            raise ParseError("expected a table", line, key)
        for k, x in value.items():
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ParseError("expected numeric entries", line, f"{key}.{k}")
        return {k: float(x) for k, x in value.items()}
    raise AssertionError(kind)


def parse_config(text: str, path: Optional[Path] = None) -> RunConfig:
    """Parse and validate configuration text."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"invalid TOML: {exc}", getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)

    sections: Dict[str, dict] = {}
    for name, body in raw.items():
        if name not in _SCHEMA:
            raise ParseError("unknown section", lines.get((name, None)), name)
        if not isinstance(body, dict):
            raise ParseError("expected a section", lines.get(("", name)), name)
        conv = {}
        for key, value in body.items():
            kind = _SCHEMA[name].get(key)
            if kind is None:
                raise ParseError(f"unknown key in [{name}]", lines.get((name, key)), key)
            conv[key] = _convert(kind, value, name, key, lines)
        sections[name] = conv

    system = sections.get("system")
    if system is None:
        raise ParseError("missing [system] section", None, "system")
    header = lines.get(("system", None))
    for key in _REQUIRED_SYSTEM:
        if key not in system:
            raise ParseError("missing required key in [system]", header, key)
    system = dict(system)
    system.setdefault("kappa_I", system["kappa"] - system["kappa_L"] - system["kappa_R"])
    params = SystemParams(**system)

    cal = None
    if "calibration" in sections:
        c = sections["calibration"]
        missing = [k for k in ("a_minus", "a_plus", "b_minus") if k not in c]
        if missing:
            raise ParseError("missing calibration constant", lines.get(("calibration", None)),
                             missing[0])
        try:
            cal = CalibrationConstants(c["a_minus"], c["a_plus"], c["b_minus"],
                                       c.get("parasitic_correction", {}))
        except ValueError as exc:
            raise ParseError(str(exc), lines.get(("calibration", None)), "calibration") from None

    drive = _build_drive(sections.get("drive", {}), params, cal, lines)
    b = sections.get("baths", {})
    if "n_sigma_th" in b:
        baths = BathOccupations.from_ports(params, b["n_sigma_th"], b.get("n_m_th", 0.0))
    else:
        baths = BathOccupations(b.get("n_c_th", 0.0), b.get("n_m_th", 0.0))

    heating = None
    if "heating" in sections:
        h = sections["heating"]
        heating = HeatingModel(h.get("n_c0", baths.n_c_th), h.get("slope_per_ratio", 0.0))

    bundle = validate_params(params, drive, baths)
    return RunConfig(path=path, text=text, sections=sections, bundle=bundle,
                     calibration=cal, heating=heating)


def _build_drive(d: dict, params, cal, lines) -> DriveConfig:
    d = dict(d)
    common = {k: d.pop(k) for k in ("Delta", "delta", "phi", "lambda_par", "psi") if k in d}
    modes = [m for m, keys in (("photons", ("np_minus", "np_plus")),
                               ("total", ("np_total", "ratio")),
                               ("powers", ("P_minus", "P_plus")))
             if any(k in d for k in keys)]
    if len(modes) > 1:
        raise ParseError("give pump strength as photon numbers, total + ratio, or powers, "
                         "not several", lines.get(("drive", None)), "drive")
    mode = modes[0] if modes else "photons"
    if mode == "photons":
        return DriveConfig(np_minus=d.get("np_minus", 0.0), np_plus=d.get("np_plus", 0.0), **common)
    if mode == "total":
        for k in ("np_total", "ratio"):
            if k not in d:
                raise ParseError("np_total and ratio go together", lines.get(("drive", None)), k)
        return DriveConfig.from_total(d["np_total"], d["ratio"], **common)
    if cal is None:
        raise ParseError("pump powers need a [calibration] section", lines.get(("drive", "P_minus")),
                         "calibration")
    return DriveConfig.from_powers(d.get("P_minus", 0.0), d.get("P_plus", 0.0),
                                   cal.a_minus, cal.a_plus, params.g0, **common)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"config file {str(path)!r} not found") from None
    return parse_config(text, path)


# --- CSV -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_number(s: str, line: int, key: str) -> float:
    s = s.strip()
    if not _NUMBER.match(s):
        raise ParseError(f"not a decimal number: {s!r}", line, key)
    return float(s)


def read_table(path, required: Sequence[str] = (), optional: Sequence[str] = ()):
    """Read a numeric CSV with a header row; returns {column: array} in file order."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"data file {str(path)!r} not found") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        allowed = set(required) | set(optional)
        for h in header:
            if allowed and h not in allowed:
                raise ParseError("unexpected column", 1, h)
        for r in required:
            if r not in header:
                raise ParseError("missing column", 1, r)
        cols: Dict[str, List[float]] = {h: [] for h in header}
        for i, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", i)
            for h, c in zip(header, row):
                cols[h].append(_parse_number(c, i, h))
    out = {h: np.array(v, dtype=float) for h, v in cols.items()}
    if "freq_hz" in out:
        bad = np.nonzero(np.diff(out["freq_hz"]) <= 0)[0]
        if bad.size:
            raise ParseError("frequency column is not strictly increasing", None, "freq_hz")
    return out


def write_table(path, columns: Dict[str, Sequence[float]]):
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([_fmt(x) for x in row])
    return path


def read_spectrum_csv(path, frame_offset_hz: float = 0.0) -> Spectrum:
    """Read a ``freq_hz,value[,sigma]`` file into a rotating-frame Spectrum.

    Frequencies must be strictly increasing.
    """
    cols = read_table(path, required=SPECTRUM_HEADER[:2], optional=SPECTRUM_HEADER[2:])
    f = cols["freq_hz"]
    if len(f) < 2:
        raise ParseError("spectrum needs at least two rows", None, "freq_hz")
    sigma = cols.get("sigma")
    return Spectrum(TWO_PI * (f - frame_offset_hz), cols["value"], sigma)


def write_spectrum_csv(path, spectrum: Spectrum, frame_offset_hz: float = 0.0):
    """Write a real spectrum as ``freq_hz,value[,sigma]`` in lab-frame Hz."""
    values = np.asarray(spectrum.values)
    if np.iscomplexobj(values):
        raise ValueError("complex spectra are written with write_complex_csv")
    cols = {"freq_hz": spectrum.omega / TWO_PI + frame_offset_hz, "value": values}
    if spectrum.sigma is not None:
        cols["sigma"] = spectrum.sigma
    return write_table(path, cols)


def write_complex_csv(path, spectrum: Spectrum, frame_offset_hz: float = 0.0):
    """Write a complex spectrum as ``freq_hz,re,im``."""
    v = np.asarray(spectrum.values, dtype=complex)
    return write_table(path, {"freq_hz": spectrum.omega / TWO_PI + frame_offset_hz,
                              "re": v.real, "im": v.imag})


def cavity_frame_offset_hz(bundle: Bundle) -> float:
    """(omega_c + Delta) / 2 pi, or 0 when omega_c is unknown."""
    p = bundle.params
    return 0.0 if p.omega_c is None else (p.omega_c + bundle.drive.Delta) / TWO_PI


def mechanical_frame_offset_hz(bundle: Bundle) -> float:
    """(omega_m + delta) / 2 pi."""
    return (bundle.params.omega_m + bundle.drive.delta) / TWO_PI


@dataclass(frozen=True, eq=False)
class RunInputs:
    config: RunConfig
    datasets: Dict[str, dict] = field(default_factory=dict)

    @property
    def bundle(self) -> Bundle:
        return self.config.bundle


def load_inputs(config_path, data_paths: Sequence = ()) -> RunInputs:
    """Parse the config and any CSV data files (as raw column tables)."""
    cfg = load_config(config_path)
    data = {str(p): read_table(p) for p in data_paths}
    return RunInputs(cfg, data)
