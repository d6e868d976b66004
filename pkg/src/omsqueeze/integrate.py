"""Adaptive Simpson quadrature over the whole real line."""
from __future__ import annotations

import math

import numpy as np

_EDGE = 1e-12  # theta is kept this far from +-pi/2


class IntegrationFailure(ArithmeticError):
    pass


def adaptive_simpson(f, a, b, rtol=1e-9, breakpoints=(), initial_panels=64,
                     max_depth=48, max_evals=2_000_000):
    """Integrate a vectorised ``f`` over [a, b].

    Panels are refined level by level, all pending panels at once, until
    each satisfies |S2 - S1| <= 15 * rtol * |I| * width / (b - a), where I is
    the running estimate of the total. ``breakpoints`` are forced panel
    edges; put narrow features there so they are always sampled.
    """
    edges = np.unique(np.concatenate([
        np.linspace(a, b, initial_panels + 1),
        [x for x in breakpoints if a < x < b],
    ]))
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    fv = f(np.concatenate([edges, mid]))
    n = len(edges)
    f_lo, f_hi, f_mid = fv[: n - 1], fv[1:n], fv[n:]
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)

    total_width = b - a
    done = 0.0
    evals = len(fv)
    for _ in range(max_depth):
        lq, rq = 0.5 * (lo + mid), 0.5 * (mid + hi)
        fq = f(np.concatenate([lq, rq]))
        evals += len(fq)
        f_lq, f_rq = fq[: len(lq)], fq[len(lq):]
        left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lq + f_mid)
        right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rq + f_hi)
        err = left + right - whole

        estimate = done + np.sum(left + right)
        tol = 15.0 * rtol * abs(estimate) * (hi - lo) / total_width
        ok = np.abs(err) <= tol
        done += np.sum((left + right + err / 15.0)[ok])

        keep = ~ok
        if not keep.any():
            return float(done)
        if evals > max_evals:
            break
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        f_lo, f_mid, f_hi = f_lo[keep], f_mid[keep], f_hi[keep]
        f_lq, f_rq = f_lq[keep], f_rq[keep]
        left, right = left[keep], right[keep]
        lo, mid, hi = (np.concatenate([lo, mid]), np.concatenate([lq[keep], rq[keep]]),
                       np.concatenate([mid, hi]))
        f_lo, f_mid, f_hi = (np.concatenate([f_lo, f_mid]), np.concatenate([f_lq, f_rq]),
                             np.concatenate([f_mid, f_hi]))
        whole = np.concatenate([left, right])
    raise IntegrationFailure(
        f"tolerance {rtol:g} not met after {evals} evaluations "
        f"({len(lo)} panels unresolved); parameters may be close to instability")


def integrate_real_line(g, scale, rtol=1e-9, features=(), **kwargs):
    """Integrate g(w) over the real line via w = scale * tan(theta).

    ``features`` are w-positions (peaks) that become forced panel edges.
    """
    def integrand(theta):
        t = np.clip(theta, -0.5 * math.pi + _EDGE, 0.5 * math.pi - _EDGE)
        c = np.cos(t)
        return g(scale * np.tan(t)) * scale / (c * c)

    breaks = [math.atan(x / scale) for x in features]
    return adaptive_simpson(integrand, -0.5 * math.pi, 0.5 * math.pi, rtol=rtol,
                            breakpoints=breaks, **kwargs)
