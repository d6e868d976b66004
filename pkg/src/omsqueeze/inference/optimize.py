"""
Damped Gauss-Newton least squares.

Parameters are handled through :class:`ParamSpec` transforms so the
optimizer always works on unconstrained, order-one internal coordinates:
``"log"`` for positive quantities, ``"linear"`` with a scale, and
``"angle"`` (linear, wrapped on output).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..params import wrap_angle


class NonConvergence(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str = "linear"  # "linear" | "log" | "angle"
    scale: float = 1.0

    def to_internal(self, value: float) -> float:
        if self.kind == "log":
            if not value > 0:
                raise ValueError(f"{self.name} must be > 0 for a log-space fit, got {value!r}")
            return math.log(value / self.scale)
        return value / self.scale

    def to_natural(self, u: float) -> float:
        if self.kind == "log":
            return float(self.scale * math.exp(u))
        v = float(self.scale * u)
        return wrap_angle(v) if self.kind == "angle" else v

    def dnatural(self, u: float) -> float:
        """d natural / d internal."""
        return self.scale * math.exp(u) if self.kind == "log" else self.scale


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``stderr`` comes from the Gauss-Newton curvature J^T J at the solution,
    scaled by the reduced chi-square of the residuals.
    """

    names: List[str]
    values: Dict[str, float]
    stderr: Dict[str, float]
    rss: float
    iterations: int
    converged: bool
    message: str = ""
    gradient_norm: float = float("nan")
    cost_history: List[float] = field(default_factory=list)
    covariance: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.values[name]


def jacobian_fd(fun, u, r0=None, step=1e-6, central=True):
    u = np.asarray(u, dtype=float)
    if r0 is None:
        r0 = fun(u)
    J = np.empty((r0.size, u.size))
    for j in range(u.size):
        h = step * max(1.0, abs(u[j]))
        up = u.copy()
        up[j] += h
        if central:
            um = u.copy()
            um[j] -= h
            J[:, j] = (fun(up) - fun(um)) / (2.0 * h)
        else:
            J[:, j] = (fun(up) - r0) / h
    return J


def _gradient_cosine(J, r):
    """Largest cosine between the residual and any Jacobian column."""
    rn = np.linalg.norm(r)
    if rn == 0.0:
        return 0.0
    cn = np.linalg.norm(J, axis=0)
    g = np.abs(J.T @ r)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(cn > 0, g / (cn * rn), 0.0)
    return float(np.max(cos)) if cos.size else 0.0


def gauss_newton(residual: Callable[[np.ndarray], np.ndarray], u0: Sequence[float],
                 jac: Optional[Callable[[np.ndarray], np.ndarray]] = None, *,
                 max_iter: int = 200, gtol: float = 1e-10, xtol: float = 1e-12,
                 stall_gtol: float = 1e-4, damping: float = 1e-3, fd_step: float = 1e-6):
    """Minimise 0.5 |residual(u)|^2 from ``u0``.

    Steps solve (J^T J + mu diag(J^T J)) du = -J^T r. A step is accepted only
    if it lowers the cost, after which mu shrinks by 10; otherwise mu grows
    by 10. A residual containing non-finite values counts as a rejected step,
    which is how model regions without a stationary state are avoided.

    Converges when the largest residual/column cosine drops below ``gtol``.
    It also stops when the iterate is stationary to working precision (an
    accepted step smaller than ``xtol`` relative, or no cost-reducing step
    at any damping); that counts as converged only if the cosine is below
    ``stall_gtol``, which absorbs finite-difference noise in J. Returns
    ``(u, r, J, info)``.
    """
    u = np.array(u0, dtype=float)
    if jac is None:
        def jac(x, r=None):
            return jacobian_fd(residual, x, r, step=fd_step)
    else:
        _jac = jac

        def jac(x, r=None):
            return _jac(x)

    r = residual(u)
    if not np.all(np.isfinite(r)):
        raise NonConvergence("residual is not finite at the initial point")
    cost = 0.5 * float(r @ r)
    cost0 = cost
    history = [cost]
    J = jac(u, r)
    mu = damping
    converged, message, it = False, "maximum iterations reached", 0
    for it in range(1, max_iter + 1):
        gcos = _gradient_cosine(J, r)
        if cost == 0.0 or gcos <= gtol:
            converged, message = True, "gradient tolerance reached"
            it -= 1
            break
        JTJ = J.T @ J
        g = J.T @ r
        diag = np.diag(JTJ).copy()
        diag[diag <= 0] = 1.0
        accepted = False
        while mu < 1e30:
            A = JTJ + mu * np.diag(diag)
            try:
                du = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                du = -np.linalg.lstsq(A, g, rcond=None)[0]
            u_new = u + du
            r_new = residual(u_new)
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
            if cost_new < cost:
                accepted = True
                mu = max(mu * 0.1, 1e-15)
                break
            mu *= 10.0
        if not accepted:
            # at roundoff level the cosine is meaningless; a residual that
            # shrank by 8 orders of magnitude is an exact fit
            converged = gcos <= stall_gtol or cost <= 1e-16 * cost0
            message = "no cost-reducing step exists at working precision"
            break
        small = np.linalg.norm(du) <= xtol * (np.linalg.norm(u) + xtol)
        u, r, cost = u_new, r_new, cost_new
        history.append(cost)
        J = jac(u, r)
        if small:
            converged = _gradient_cosine(J, r) <= stall_gtol or cost <= 1e-16 * cost0
            message = "step tolerance reached"
            break
    info = dict(iterations=it, converged=converged, message=message,
                gradient_norm=_gradient_cosine(J, r), cost_history=history)
    return u, r, J, info


def covariance_from_jacobian(J, r, n_params):
    dof = max(r.size - n_params, 1)
    s2 = float(r @ r) / dof
    return np.linalg.pinv(J.T @ J) * s2


def run_fit(specs: Sequence[ParamSpec], residual_natural, initial: Dict[str, float],
            jac_natural=None, raise_on_failure: bool = True, **kwargs) -> FitResult:
    """Fit named parameters; ``residual_natural`` takes a dict of natural values."""
    names = [s.name for s in specs]

    def to_dict(u):
        return {s.name: s.to_natural(x) for s, x in zip(specs, u)}

    def res(u):
        return residual_natural(to_dict(u))

    jac = None
    if jac_natural is not None:
        def jac(u):
            scale = np.array([s.dnatural(x) for s, x in zip(specs, u)])
            return jac_natural(to_dict(u)) * scale

    u0 = [s.to_internal(initial[s.name]) for s in specs]
    u, r, J, info = gauss_newton(res, u0, jac, **kwargs)
    cov_u = covariance_from_jacobian(J, r, len(specs))
    d = np.array([s.dnatural(x) for s, x in zip(specs, u)])
    cov = cov_u * np.outer(d, d)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    result = FitResult(
        names=names,
        values=to_dict(u),
        stderr=dict(zip(names, se.tolist())),
        rss=float(r @ r),
        iterations=info["iterations"],
        converged=info["converged"],
        message=info["message"],
        gradient_norm=info["gradient_norm"],
        cost_history=info["cost_history"],
        covariance=cov,
    )
    if raise_on_failure and not result.converged:
        raise NonConvergence(f"fit did not converge: {result.message}", result)
    return result
