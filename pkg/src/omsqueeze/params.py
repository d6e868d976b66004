"""
Parameter records for the two-tone optomechanical model.

All rates and frequencies held by these records are angular (rad/s). The
helpers ``hz`` and ``normalize_units`` convert plain-Hz mappings at the
boundary; nothing inside the package ever multiplies by 2*pi again.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Mapping, Optional

import numpy as np
import scipy.constants

TWO_PI = 2.0 * math.pi
HBAR = scipy.constants.hbar

#: relative tolerance of the kappa_L + kappa_R + kappa_I = kappa check
PORT_SUM_RTOL = 1e-12
#: x_zp vs sqrt(hbar / 2 m omega_m): warn above this
XZP_WARN_RTOL = 1e-6
#: ... and reject above this
XZP_ERROR_RTOL = 0.1


class ValidationError(ValueError):
    """Base class for invalid parameter records.

    ``field`` names the offending field. When several problems are found at
    once, the first is raised and ``errors`` carries all of them.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.errors = [self]


class NegativeRate(ValidationError):
    pass


class PortSumMismatch(ValidationError):
    pass


class OccupationNegative(ValidationError):
    pass


class InconsistentZeroPoint(ValidationError):
    pass


class UnstableParameters(RuntimeError):
    """The linear dynamics have no stationary state."""


def hz(value):
    """Convert an ordinary frequency in Hz to rad/s."""
    return TWO_PI * value


def wrap_angle(angle: float) -> float:
    """Map an angle in radians into (-pi, pi]."""
    a = math.remainder(angle, TWO_PI)
    if a == -math.pi:
        a = math.pi
    return a


@dataclass(frozen=True)
class SystemParams:
    """Fixed device constants, angular units.

    Parameters
    ----------
    omega_m : float
        mechanical resonance [rad/s]
    kappa : float
        total cavity linewidth [rad/s]
    kappa_L, kappa_R, kappa_I : float
        drive port, output port and internal loss rates [rad/s]; must sum to kappa
    gamma_m : float
        intrinsic mechanical linewidth [rad/s]
    g0 : float
        single-photon optomechanical coupling [rad/s]
    x_zp : float, optional
        zero-point amplitude [m]; derived from ``mass`` when omitted
    mass : float, optional
        effective mass [kg]
    omega_c : float, optional
        cavity resonance [rad/s]; only needed to express lab-frame axes
    """

    omega_m: float
    kappa: float
    kappa_L: float
    kappa_R: float
    kappa_I: float
    gamma_m: float
    g0: float
    x_zp: Optional[float] = None
    mass: Optional[float] = None
    omega_c: Optional[float] = None

    @property
    def resolved_sideband(self) -> bool:
        return self.omega_m / self.kappa > 10.0

    @property
    def x_zp_from_mass(self) -> Optional[float]:
        if self.mass is None:
            return None
        return math.sqrt(HBAR / (2.0 * self.mass * self.omega_m))


@dataclass(frozen=True)
class DriveConfig:
    """Pump configuration.

    ``Delta`` and ``delta`` are the cavity and mechanical detunings of the
    rotating frame, ``np_minus``/``np_plus`` the red/blue intracavity pump
    photon numbers, ``phi`` the BAE probe phase and ``lambda_par``/``psi`` the
    amplitude and phase of the mechanical parametric drive. Angles are
    wrapped into (-pi, pi] on construction.
    """

    Delta: float = 0.0
    delta: float = 0.0
    np_minus: float = 0.0
    np_plus: float = 0.0
    phi: float = 0.0
    lambda_par: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi", wrap_angle(self.phi))
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    @classmethod
    def from_powers(cls, P_minus, P_plus, a_minus, a_plus, g0, **kwargs):
        """Build a drive from transmitted pump powers.

        Uses the linear calibration G^2 = a * P, so n_p = a * P / g0^2.
        """
        return cls(np_minus=a_minus * P_minus / g0**2,
                   np_plus=a_plus * P_plus / g0**2, **kwargs)

    @classmethod
    def from_total(cls, np_total, ratio, **kwargs):
        """Split a total pump photon number at ratio n_p+/n_p-."""
        np_minus = np_total / (1.0 + ratio)
        return cls(np_minus=np_minus, np_plus=ratio * np_minus, **kwargs)


@dataclass(frozen=True)
class BathOccupations:
    """Thermal occupations of the cavity and mechanical baths.

    If ``n_sigma_th`` (per-port occupations, keys ``"L"``, ``"R"``, ``"I"``) is
    given, ``n_c_th`` must be their kappa-weighted mean; use
    :meth:`from_ports` to build it consistently.
    """

    n_c_th: float = 0.0
    n_m_th: float = 0.0
    n_sigma_th: Optional[Mapping[str, float]] = None

    @classmethod
    def from_ports(cls, params: SystemParams, n_sigma_th: Mapping[str, float], n_m_th: float):
        rates = {"L": params.kappa_L, "R": params.kappa_R, "I": params.kappa_I}
        n_c = sum(rates[k] / params.kappa * n_sigma_th.get(k, 0.0) for k in rates)
        return cls(n_c_th=n_c, n_m_th=n_m_th, n_sigma_th=dict(n_sigma_th))


@dataclass(frozen=True)
class DerivedCouplings:
    """Couplings and rates that follow algebraically from the drive.

    ``curlyG`` (the Bogoliubov coupling sqrt(G-^2 - G+^2)) and ``r`` are
    ``None`` when G+ >= G-; the susceptibility machinery still works there,
    only the Bogoliubov picture does not.
    """

    G_minus: float
    G_plus: float
    G_squared: float
    curlyG: Optional[float]
    r: Optional[float]
    Gamma_opt_minus: float
    Gamma_opt_plus: float
    Gamma_eff: float
    C_minus: float
    C_plus: float

    @property
    def G(self) -> Optional[float]:
        return self.curlyG

    @property
    def r_defined(self) -> bool:
        return self.r is not None


def derive_couplings(params: SystemParams, drive: DriveConfig) -> DerivedCouplings:
    G_m = params.g0 * math.sqrt(drive.np_minus)
    G_p = params.g0 * math.sqrt(drive.np_plus)
    G2 = G_m**2 - G_p**2
    kappa = params.kappa
    if G_p < G_m:
        curlyG = math.sqrt(G2)
        r = math.atanh(G_p / G_m)
    elif G_m == 0.0:
        # no pumps at all: trivially the unsqueezed frame
        curlyG, r = 0.0, 0.0
    else:
        curlyG, r = None, None
    return DerivedCouplings(
        G_minus=G_m,
        G_plus=G_p,
        G_squared=G2,
        curlyG=curlyG,
        r=r,
        Gamma_opt_minus=4.0 * (G_m - G_p) ** 2 / kappa,
        Gamma_opt_plus=4.0 * (G_m + G_p) ** 2 / kappa,
        Gamma_eff=params.gamma_m + 4.0 * G2 / kappa,
        C_minus=4.0 * G_m**2 / (kappa * params.gamma_m),
        C_plus=4.0 * G_p**2 / (kappa * params.gamma_m),
    )


def _collect_errors(params: SystemParams, drive: DriveConfig, baths: BathOccupations):
    errs = []
    for name in ("omega_m", "kappa", "kappa_L", "kappa_R", "kappa_I", "gamma_m", "g0"):
        v = getattr(params, name)
        if not (np.isfinite(v) and v > 0):
            errs.append(NegativeRate(name, f"must be > 0, got {v!r}"))
    # an unused port is allowed to be exactly zero
    errs = [e for e in errs if not (e.field in ("kappa_L", "kappa_I") and getattr(params, e.field) == 0)]
    port_sum = params.kappa_L + params.kappa_R + params.kappa_I
    if abs(port_sum - params.kappa) > PORT_SUM_RTOL * abs(params.kappa):
        errs.append(PortSumMismatch(
            "kappa", f"kappa_L + kappa_R + kappa_I = {port_sum!r} != kappa = {params.kappa!r}"))
    if params.mass is not None and not params.mass > 0:
        errs.append(NegativeRate("mass", f"must be > 0, got {params.mass!r}"))
    if params.x_zp is not None and not params.x_zp > 0:
        errs.append(NegativeRate("x_zp", f"must be > 0, got {params.x_zp!r}"))

    for name in ("np_minus", "np_plus"):
        v = getattr(drive, name)
        if not (np.isfinite(v) and v >= 0):
            errs.append(ValidationError(name, f"must be >= 0, got {v!r}"))
    if not (np.isfinite(drive.lambda_par) and drive.lambda_par >= 0):
        errs.append(NegativeRate("lambda_par", f"must be >= 0, got {drive.lambda_par!r}"))

    for name in ("n_c_th", "n_m_th"):
        v = getattr(baths, name)
        if not (np.isfinite(v) and v >= 0):
            errs.append(OccupationNegative(name, f"must be >= 0, got {v!r}"))
    if baths.n_sigma_th is not None:
        rates = {"L": params.kappa_L, "R": params.kappa_R, "I": params.kappa_I}
        for k, v in baths.n_sigma_th.items():
            if k not in rates:
                errs.append(ValidationError(f"n_sigma_th[{k}]", "unknown port"))
            elif not v >= 0:
                errs.append(OccupationNegative(f"n_sigma_th[{k}]", f"must be >= 0, got {v!r}"))
        weighted = sum(rates.get(k, 0.0) / params.kappa * v for k, v in baths.n_sigma_th.items())
        if abs(weighted - baths.n_c_th) > 1e-12 * max(1.0, abs(weighted)):
            errs.append(ValidationError(
                "n_c_th", f"{baths.n_c_th!r} is not the kappa-weighted port mean {weighted!r}"))
    return errs


@dataclass(frozen=True)
class Bundle:
    """A validated (system, drive, baths) triple.

    Construct through :func:`validate_params`. Derived couplings are computed
    once and cached.
    """

    params: SystemParams
    drive: DriveConfig
    baths: BathOccupations = field(default_factory=BathOccupations)

    @cached_property
    def couplings(self) -> DerivedCouplings:
        return derive_couplings(self.params, self.drive)

    def with_drive(self, **changes) -> "Bundle":
        return validate_params(self.params, replace(self.drive, **changes), self.baths)

    def with_baths(self, **changes) -> "Bundle":
        return validate_params(self.params, self.drive, replace(self.baths, **changes))

    def with_params(self, **changes) -> "Bundle":
        return validate_params(replace(self.params, **changes), self.drive, self.baths)


def validate_params(params: SystemParams, drive: Optional[DriveConfig] = None,
                    baths: Optional[BathOccupations] = None) -> Bundle:
    """Check every record invariant and return a :class:`Bundle`.

    Raises the first :class:`ValidationError` found; its ``errors`` attribute
    lists every problem. A missing ``x_zp`` is filled in from ``mass``.
    """
    drive = DriveConfig() if drive is None else drive
    baths = BathOccupations() if baths is None else baths
    errs = _collect_errors(params, drive, baths)

    if not errs:
        derived = params.x_zp_from_mass
        if params.x_zp is None and derived is not None:
            params = replace(params, x_zp=derived)
        elif params.x_zp is not None and derived is not None:
            rel = abs(params.x_zp - derived) / derived
            if rel > XZP_ERROR_RTOL:
                errs.append(InconsistentZeroPoint(
                    "x_zp", f"{params.x_zp!r} m differs from sqrt(hbar/2 m omega_m) = {derived!r} m"))
            elif rel > XZP_WARN_RTOL:
                warnings.warn(f"x_zp differs from sqrt(hbar/2 m omega_m) by {rel:.2%}", stacklevel=2)

    if errs:
        first = errs[0]
        first.errors = errs
        raise first
    return Bundle(params, drive, baths)


_ANGULAR_KEYS = {"omega_m", "kappa", "kappa_L", "kappa_R", "kappa_I", "gamma_m", "g0",
                 "omega_c", "Delta", "delta", "lambda_par"}
_ANGLE_KEYS = {"phi", "psi"}


def normalize_units(record: Mapping) -> dict:
    """Convert a flat mapping tagged ``units="Hz"`` to angular units.

    Frequencies are multiplied by 2*pi and angles converted from degrees to
    radians. The result is tagged ``units="rad/s"``; passing it through again
    returns an equal mapping.
    """
    out = dict(record)
    units = out.get("units", "rad/s")
    if units == "rad/s":
        return out
    if units != "Hz":
        raise ValueError(f"unknown units tag {units!r}")
    for k, v in record.items():
        if v is None:
            continue
        if k in _ANGULAR_KEYS:
            out[k] = TWO_PI * v
        elif k in _ANGLE_KEYS:
            out[k] = math.radians(v)
    out["units"] = "rad/s"
    return out


def record_fields(cls) -> set:
    return {f.name for f in fields(cls)}


# Device constants of the aluminium-membrane device. x_zp is derived from the
# mass (the quoted 1.8 fm is rounded). The port split is not published; an
# even L/R split with the remainder internal is assumed.
DEVICE = SystemParams(
    omega_m=hz(5.8e6),
    kappa=hz(330e3),
    kappa_L=hz(330e3) * 0.25,
    kappa_R=hz(330e3) * 0.25,
    kappa_I=hz(330e3) - 2 * (hz(330e3) * 0.25),
    gamma_m=hz(8.0),
    g0=hz(130.0),
    mass=432e-15,
    omega_c=hz(6.083e9),
)
