"""
Time-domain oracle: the linearized Langevin equations as a linear SDE.

The complex amplitudes (d, d^dag, b, b^dag) are mapped to real quadratures
z = (X_c, Y_c, X_1, Y_m) with X = a + a^dag and Y = -i (a - a^dag), so that
X_phi = cos(phi) X_1 - sin(phi) Y_m. In these coordinates

    dz = -A z dt + B dW,    A = T M T^-1,
    B B^T = Q = diag(kappa (2 n_c + 1), kappa (2 n_c + 1),
                     gamma_m (2 n_m + 1), gamma_m (2 n_m + 1)),

which is the symmetrized (classical-equivalent) noise of the input fields.
Second moments of z are then the symmetrized moments in units of x_zp^2
(vacuum gives 1 per quadrature).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .params import Bundle, UnstableParameters
from .response import assess_stability, drift_matrix

#: z = T D with D = (d, d^dag, b, b^dag)
T_QUAD = np.array([[1, 1, 0, 0],
                   [-1j, 1j, 0, 0],
                   [0, 0, 1, 1],
                   [0, 0, -1j, 1j]])
LABELS = ("X_c", "Y_c", "X_1", "Y_m")
DT_FACTOR = 0.05
BURN_IN_GAMMAS = 10.0
_CHUNK = 1024


class StepTooLarge(ValueError):
    pass


class NonStationarySegment(RuntimeError):
    pass


def real_drift(bundle: Bundle) -> np.ndarray:
    """A = T M T^-1, real to rounding."""
    A = T_QUAD @ drift_matrix(bundle) @ np.linalg.inv(T_QUAD)
    if np.max(np.abs(A.imag)) > 1e-9 * np.max(np.abs(A)):
        raise ArithmeticError("quadrature drift matrix is not real")
    return A.real.copy()


def diffusion(bundle: Bundle) -> np.ndarray:
    p, b = bundle.params, bundle.baths
    c = p.kappa * (2.0 * b.n_c_th + 1.0)
    m = p.gamma_m * (2.0 * b.n_m_th + 1.0)
    return np.diag([c, c, m, m])


def steady_state_covariance(bundle: Bundle) -> np.ndarray:
    """Stationary covariance V of z from A V + V A^T = Q."""
    rep = assess_stability(bundle)
    if not rep.stable:
        raise UnstableParameters(f"no stationary state: min Re(eig) = {rep.margin:.6g} rad/s")
    V = scipy.linalg.solve_continuous_lyapunov(real_drift(bundle), diffusion(bundle))
    return 0.5 * (V + V.T)


def exact_step(A: np.ndarray, Q: np.ndarray, dt: float):
    """Transition matrix and noise covariance of the exact OU step.

    Van Loan's block exponential E = expm([[A, Q], [0, -A^T]] dt) gives
    Phi = exp(-A dt) = E22^T and Qd = Phi E12 = int_0^dt exp(-A s) Q
    exp(-A^T s) ds, without reference to the stationary solution.
    """
    n = A.shape[0]
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = A
    H[:n, n:] = Q
    H[n:, n:] = -A.T
    E = scipy.linalg.expm(H * dt)
    Phi = E[n:, n:].T
    Qd = Phi @ E[:n, n:]
    return Phi, 0.5 * (Qd + Qd.T)


def _sqrtm_psd(C):
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(C)
        return v * np.sqrt(np.clip(w, 0.0, None))


def max_time_step(bundle: Bundle) -> float:
    """0.05 / max(kappa, |Delta|, Gamma_eff (1 + 2 lambda / gamma_m))."""
    p, d, c = bundle.params, bundle.drive, bundle.couplings
    fastest = max(p.kappa, abs(d.Delta),
                  abs(c.Gamma_eff) * (1.0 + 2.0 * d.lambda_par / p.gamma_m))
    return DT_FACTOR / fastest


def _relaxation_rate(bundle, margin):
    g = bundle.couplings.Gamma_eff
    return min(g, 2.0 * margin) if g > 0 else 2.0 * margin


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Output of :func:`simulate_trajectories`.

    ``moment_sums[t, k]`` is the sum of z z^T over the ``batch_steps`` steps
    of batch k of trajectory t, all taken after the burn-in. ``samples`` are
    decimated states at ``times``. ``covariance`` and ``covariance_sigma``
    are the pooled second moments and their batch-means standard errors.
    """

    seed: int
    dt: float
    n_steps: int
    n_traj: int
    method: str
    burn_in_steps: int
    batch_steps: int
    relaxation_rate: float
    times: np.ndarray
    samples: np.ndarray
    moment_sums: np.ndarray
    covariance: np.ndarray
    covariance_sigma: np.ndarray

    @property
    def burn_in_time(self) -> float:
        return self.burn_in_steps * self.dt


def simulate_trajectories(bundle: Bundle, seed: int, dt: float, n_steps: int, n_traj: int, *,
                          method: str = "exact", burn_in: Optional[float] = None,
                          batch_steps: Optional[int] = None, decimate: Optional[int] = None,
                          z0=None, noise: bool = True) -> TrajectoryEnsemble:
    """Integrate ``n_traj`` independent trajectories of ``n_steps`` steps.

    Parameters
    ----------
    seed : int
        root seed; trajectory t draws from Philox seeded by the t-th child of
        ``SeedSequence(seed)``, so results are bit-reproducible and do not
        depend on how many trajectories are run alongside
    dt : float
        time step [s]; must not exceed :func:`max_time_step`
    method : {"exact", "euler"}
        exact OU update (default) or Euler-Maruyama
    burn_in : float, optional
        discarded initial time [s]; default max(10 / Gamma_eff, 5 / margin)
        with margin the slowest amplitude decay rate. Rounded up to whole
        processing chunks.
    batch_steps : int, optional
        steps per moment batch; default ten slowest relaxation times
    decimate : int, optional
        keep every ``decimate``-th state in ``samples``; default keeps at
        most 4096 per trajectory
    z0 : array, optional
        initial quadratures (default 0)
    noise : bool
        switch the bath noise off for deterministic checks

    Raises
    ------
    UnstableParameters, StepTooLarge
    """
    rep = assess_stability(bundle)
    if not rep.stable:
        raise UnstableParameters(f"no stationary state: min Re(eig) = {rep.margin:.6g} rad/s")
    dt_max = max_time_step(bundle)
    if not 0.0 < dt <= dt_max * (1.0 + 1e-12):
        raise StepTooLarge(f"dt = {dt:.6g} s exceeds the limit {dt_max:.6g} s")
    if method not in ("exact", "euler"):
        raise ValueError("method must be 'exact' or 'euler'")

    A, Q = real_drift(bundle), diffusion(bundle)
    if method == "exact":
        Phi, Qd = exact_step(A, Q, dt)
    else:
        Phi, Qd = np.eye(4) - A * dt, Q * dt
    PhiT = Phi.T
    LT = _sqrtm_psd(Qd).T

    margin = rep.margin
    relax = _relaxation_rate(bundle, margin)
    if burn_in is None:
        burn_in = max(BURN_IN_GAMMAS / bundle.couplings.Gamma_eff
                      if bundle.couplings.Gamma_eff > 0 else 0.0, 5.0 / margin)
    if batch_steps is None:
        batch_steps = max(1, math.ceil(10.0 / (relax * dt)))
    chunk = min(batch_steps, _CHUNK)
    batch_steps = chunk * math.ceil(batch_steps / chunk)
    burn_steps = chunk * math.ceil(burn_in / dt / chunk)
    n_batches = (n_steps - burn_steps) // batch_steps
    if n_batches < 1:
        raise ValueError(f"n_steps = {n_steps} leaves no complete batch after "
                         f"{burn_steps} burn-in steps (batch of {batch_steps})")
    if decimate is None:
        decimate = max(1, math.ceil(n_steps / 4096))

    gens = [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(n_traj)]
    z = np.zeros((n_traj, 4)) if z0 is None else np.tile(np.asarray(z0, dtype=float), (n_traj, 1))
    keep = np.arange(0, n_steps + 1, decimate)
    samples = np.empty((n_traj, len(keep), 4))
    samples[:, 0] = z
    s_pos = 1
    sums = np.zeros((n_traj, n_batches, 4, 4))
    zs = np.empty((n_traj, chunk, 4))
    n_run = burn_steps + n_batches * batch_steps

    for start in range(0, n_run, chunk):
        if noise:
            xi = np.stack([g.standard_normal((chunk, 4)) for g in gens]) @ LT
        else:
            xi = np.zeros((n_traj, chunk, 4))
        for k in range(chunk):
            z = z @ PhiT + xi[:, k]
            zs[:, k] = z
        steps = np.arange(start + 1, start + chunk + 1)
        sel = steps % decimate == 0
        n_sel = int(np.count_nonzero(sel))
        samples[:, s_pos:s_pos + n_sel] = zs[:, sel]
        s_pos += n_sel
        if start >= burn_steps:
            b = (start - burn_steps) // batch_steps
            sums[:, b] += np.sum(zs[:, :, :, None] * zs[:, :, None, :], axis=1)

    samples = samples[:, :s_pos]
    times = keep[:s_pos] * dt
    cov, sig = _pooled_moments(sums, batch_steps)
    return TrajectoryEnsemble(seed=seed, dt=dt, n_steps=n_run, n_traj=n_traj, method=method,
                              burn_in_steps=burn_steps, batch_steps=batch_steps,
                              relaxation_rate=relax, times=times, samples=samples,
                              moment_sums=sums, covariance=cov, covariance_sigma=sig)


def _pooled_moments(sums, batch_steps):
    means = sums.reshape(-1, 4, 4) / batch_steps
    cov = np.mean(means, axis=0)
    n = means.shape[0]
    sig = np.std(means, axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full((4, 4), np.inf)
    return 0.5 * (cov + cov.T), sig


def quadrature_vector(phi: float) -> np.ndarray:
    """Coefficients of X_phi in z."""
    return np.array([0.0, 0.0, math.cos(phi), -math.sin(phi)])


@dataclass(frozen=True)
class VarianceEstimate:
    variance: float
    sigma: float
    batch_sigma: float
    n_batches: int

    def __iter__(self):
        return iter((self.variance, self.sigma))


def estimate_variance_from_trajectories(ensemble: TrajectoryEnsemble, phi: float,
                                        batch_size: int = 1, drift_sigmas: float = 5.0
                                        ) -> VarianceEstimate:
    """<X_phi^2> from time-and-ensemble averages after the burn-in.

    ``batch_size`` merges that many consecutive stored batches of each
    trajectory. ``sigma`` is the batch-means standard error of the
    variance; ``batch_sigma`` is the scatter of the individual batch means,
    which falls as 1/sqrt(batch length) once batches are longer than the
    correlation time. Unpacks as ``(variance, sigma)``.

    Raises
    ------
    NonStationarySegment
        if the burn-in is shorter than ten relaxation times, or the first
        and second halves of the record disagree by more than
        ``drift_sigmas`` standard errors
    """
    if ensemble.burn_in_time * ensemble.relaxation_rate < BURN_IN_GAMMAS * (1.0 - 1e-9):
        raise NonStationarySegment(
            f"burn-in of {ensemble.burn_in_time:.3g} s is shorter than "
            f"{BURN_IN_GAMMAS:g} relaxation times")
    c = quadrature_vector(phi)
    x2 = np.einsum("i,tbij,j->tb", c, ensemble.moment_sums, c)
    n_traj, n_b = x2.shape
    n_m = n_b // batch_size
    if n_m < 1:
        raise ValueError("batch_size exceeds the number of stored batches")
    merged = x2[:, :n_m * batch_size].reshape(n_traj, n_m, batch_size).sum(axis=2)
    means = (merged / (batch_size * ensemble.batch_steps)).ravel()
    n = means.size
    var = float(np.mean(means))
    bsig = float(np.std(means, ddof=1)) if n > 1 else math.inf
    sig = bsig / math.sqrt(n)

    if n_m >= 2:
        half = n_m // 2
        blocks = merged[:, :2 * half].reshape(n_traj, 2, half) / (batch_size * ensemble.batch_steps)
        first, second = blocks[:, 0].ravel(), blocks[:, 1].ravel()
        diff = np.mean(first) - np.mean(second)
        err = math.sqrt(np.var(first, ddof=1) / first.size + np.var(second, ddof=1) / second.size) \
            if first.size > 1 else math.inf
        if abs(diff) > drift_sigmas * err:
            raise NonStationarySegment(
                f"first and second halves differ by {abs(diff) / err:.1f} standard errors")
    return VarianceEstimate(var, sig, bsig, n)
