"""Maximum-likelihood estimation of spectrum parameters from measurement records.

Homodyne traces are reduced to periodograms with the discrete Fourier
normalization y_m = (dt/sqrt(T)) sum_l Y(t_l) exp(i omega_m t_l), under which
the positive-frequency ordinates are asymptotically independent complex
Gaussians with variance S_Y(omega_m).  The frequency-domain log-likelihood
(up to a parameter-independent constant) is then

    L(theta) = - sum_m [ ln S_Y(omega_m | theta) + |y_m|^2 / S_Y(omega_m | theta) ]

and photon-count records use the geometric (Bose-Einstein) likelihood

    L(theta) = sum_m [ N_m ln Nbar_m - (N_m + 1) ln(1 + Nbar_m) ],
    Nbar_m = 2 * flux * S_X(omega_m | theta).

Both are maximized over log-parameters with a bounded Nelder-Mead simplex and
five deterministic restarts.  The bandwidth parameter is restricted to the
resolvable range [first analyzed mode, top of the analysis band]: outside it
the spectrum degenerates into a flat offset or a pure power-law tail over the
analyzed modes, the corner frequency is unidentifiable, and the likelihood
acquires an unbounded ridge along which theta1 and theta2 diverge together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.optimize import Bounds, minimize

from .psdmodel import ParamVector, PsdModel, theta_array
from .synth import PhotonRecord, TimeTrace

Band = Tuple[float, float]

# Optimizer contract: log-space simplex, diameter tolerance for convergence,
# evaluation cap per restart, and the half-width of the theta1 search box.
XATOL = 1e-9
FATOL = 1e-8
MAXFEV = 2000
CONVERGED_DIAMETER = 1e-8
LOG_HALFWIDTH = 40.0
RESTART_FACTORS = (0.25, 0.5, 2.0, 4.0)


@dataclass(frozen=True)
class Periodogram:
    """Positive-frequency periodogram ordinates, excluding m = 0 and Nyquist."""

    omega: np.ndarray
    power: np.ndarray
    horizon_T: float

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if w.ndim != 1 or w.shape != p.shape or w.size == 0:
            raise ValueError("omega and power must be matching non-empty 1-D arrays")
        if np.any(np.diff(w) <= 0) or w[0] <= 0:
            raise ValueError("frequencies must be positive and strictly increasing")
        if np.any(p < 0) or np.any(~np.isfinite(p)):
            raise ValueError("power must be finite and non-negative")
        if not np.isfinite(self.horizon_T) or self.horizon_T <= 0:
            raise ValueError("horizon_T must be finite and positive")
        w = w.copy(); w.flags.writeable = False
        p = p.copy(); p.flags.writeable = False
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "power", p)


@dataclass(frozen=True)
class Estimate:
    """Result of one maximum-likelihood fit."""

    theta_hat: ParamVector
    loglik: float
    converged: bool
    n_evals: int
    band: Band
    at_bound: bool = False


def periodogram(y: TimeTrace) -> Periodogram:
    """Periodogram |y_m|^2 with the dt/sqrt(T) Fourier normalization.

    Returns ordinates for 0 < m < L/2; the DC and Nyquist bins are dropped.
    """
    L = y.samples.size
    if L < 4:
        raise ValueError(f"need at least 4 samples, got {L}")
    T = y.horizon_T
    spec = np.fft.rfft(y.samples)
    mmax = (L - 1) // 2
    power = (y.dt * y.dt / T) * np.abs(spec[1:mmax + 1]) ** 2
    omega = 2.0 * np.pi * np.arange(1, mmax + 1) / T
    return Periodogram(omega=omega, power=power, horizon_T=T)


def _band_mask(omega: np.ndarray, band: Band) -> np.ndarray:
    lo, hi = band
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ValueError(f"band must be a finite (lo, hi) with hi > lo, got {band!r}")
    mask = (omega > lo) & (omega <= hi)
    if not np.any(mask):
        raise ValueError(f"band {band!r} contains no analyzed modes")
    return mask


def whittle_loglik(p: Periodogram, model: PsdModel, theta, s_eta: float,
                   band: Band) -> float:
    """Frequency-domain Gaussian log-likelihood over the band (lo, hi].

    The parameter-independent additive constant is dropped.  Raises
    ``ValueError`` if S_X + s_eta is not positive on the band.
    """
    th = theta_array(theta)
    mask = _band_mask(p.omega, band)
    sy = np.asarray(model.value(p.omega[mask], th), dtype=float) + s_eta
    if np.any(sy <= 0) or np.any(~np.isfinite(sy)):
        raise ValueError("total spectral density must be positive on the band")
    return float(-np.sum(np.log(sy) + p.power[mask] / sy))


def simplex_maximize(neg_loglik: Callable[[np.ndarray], float], init: np.ndarray,
                     lower: np.ndarray, upper: np.ndarray):
    """Bounded Nelder-Mead in log-parameter space with deterministic restarts.

    Restarts start at the initial point and at the point with one coordinate
    scaled by 1/4, 1/2, 2, and 4 in turn, alternating coordinates (clipped to
    the box).  Returns ``(theta, loglik, converged, n_evals, at_bound)``
    where ``converged`` requires the winning restart's final simplex to have
    diameter < 1e-8 in log space.
    """
    phi0 = np.log(np.asarray(init, dtype=float))
    lb = np.asarray(lower, dtype=float)
    ub = np.asarray(upper, dtype=float)
    if np.any(lb >= ub):
        raise ValueError("optimizer box is empty")
    starts = [phi0]
    for i, f in enumerate(RESTART_FACTORS):
        s = phi0.copy()
        s[i % phi0.size] += np.log(f)
        starts.append(s)
    starts = [np.clip(s, lb, ub) for s in starts]

    def neg(phi):
        return neg_loglik(np.exp(phi))

    best = None
    n_evals = 0
    for s in starts:
        res = minimize(neg, s, method="Nelder-Mead", bounds=Bounds(lb, ub),
                       options=dict(xatol=XATOL, fatol=FATOL,
                                    maxfev=MAXFEV, maxiter=MAXFEV))
        n_evals += int(res.nfev)
        if best is None or res.fun < best.fun:
            best = res
    verts = best.final_simplex[0]
    diameter = max(np.linalg.norm(verts[i] - verts[j])
                   for i in range(len(verts)) for j in range(i + 1, len(verts)))
    converged = bool(diameter < CONVERGED_DIAMETER)
    at_bound = bool(np.any(best.x - lb < 1e-6) or np.any(ub - best.x < 1e-6))
    return np.exp(best.x), float(-best.fun), converged, n_evals, at_bound


def _theta2_box(omega_first: float, omega_top: float) -> Tuple[float, float]:
    if omega_top <= omega_first:
        raise ValueError("analysis band too narrow to constrain the bandwidth")
    return float(omega_first), float(omega_top)


def whittle_mle(p: Periodogram, model: PsdModel, s_eta: float, band: Band,
                init: Union[ParamVector, np.ndarray]) -> Estimate:
    """Maximize the frequency-domain likelihood over log-parameterized theta.

    Never raises on non-convergence; the returned estimate carries
    ``converged=False`` when no restart collapses its simplex.
    """
    if model.dim != 2:
        raise ValueError("estimation supports two-parameter models")
    if not np.isfinite(s_eta) or s_eta < 0:
        raise ValueError(f"s_eta must be finite and non-negative, got {s_eta!r}")
    init_arr = theta_array(init)
    mask = _band_mask(p.omega, band)
    w = p.omega[mask]
    pw = p.power[mask]

    def neg_loglik(th):
        sy = model.value(w, th) + s_eta
        return float(np.sum(np.log(sy) + pw / sy))

    t2_lo, t2_hi = _theta2_box(w[0], band[1])
    lower = np.array([np.log(init_arr[0]) - LOG_HALFWIDTH, np.log(t2_lo)])
    upper = np.array([np.log(init_arr[0]) + LOG_HALFWIDTH, np.log(t2_hi)])
    theta, loglik, converged, n_evals, at_bound = simplex_maximize(
        neg_loglik, init_arr, lower, upper)
    return Estimate(theta_hat=ParamVector.from_array(theta), loglik=loglik,
                    converged=converged, n_evals=n_evals,
                    band=(float(band[0]), float(band[1])), at_bound=at_bound)


def noise_floor_estimate(p: Periodogram, high_band: Band) -> float:
    """Mean periodogram power over a high-frequency band dominated by noise.

    Requires at least 50 modes in the band; the relative standard error of
    the returned level is 1/sqrt(K) for K modes.
    """
    mask = (p.omega > high_band[0]) & (p.omega <= high_band[1])
    k = int(np.count_nonzero(mask))
    if k < 50:
        raise ValueError(f"high band contains only {k} modes; at least 50 required")
    return float(np.mean(p.power[mask]))


def spc_loglik(r: PhotonRecord, model: PsdModel, theta) -> float:
    """Log-likelihood of paired sideband counts under geometric statistics."""
    th = theta_array(theta)
    nbar = 2.0 * r.photon_flux * np.asarray(model.value(r.omega, th), dtype=float)
    if np.any(nbar <= 0) or np.any(~np.isfinite(nbar)):
        raise ValueError("mean counts must be positive on all modes")
    return float(np.sum(r.counts * np.log(nbar) - (r.counts + 1.0) * np.log1p(nbar)))


def spc_mle(r: PhotonRecord, model: PsdModel, photon_flux: Optional[float] = None,
            init: Union[ParamVector, np.ndarray, None] = None) -> Estimate:
    """Maximum-likelihood fit to a photon-count record.

    Same optimizer contract as :func:`whittle_mle`.  A record with all-zero
    counts drives theta1 to the lower edge of the search box, which is
    reported through ``at_bound``.
    """
    if model.dim != 2:
        raise ValueError("estimation supports two-parameter models")
    flux = r.photon_flux if photon_flux is None else float(photon_flux)
    if not np.isfinite(flux) or flux <= 0:
        raise ValueError(f"photon_flux must be finite and positive, got {flux!r}")
    if init is None:
        raise ValueError("an initial parameter guess is required")
    init_arr = theta_array(init)
    w = r.omega
    counts = r.counts.astype(float)

    def neg_loglik(th):
        nbar = 2.0 * flux * model.value(w, th)
        return float(-np.sum(counts * np.log(nbar) - (counts + 1.0) * np.log1p(nbar)))

    t2_lo, t2_hi = _theta2_box(w[0], w[-1])
    lower = np.array([np.log(init_arr[0]) - LOG_HALFWIDTH, np.log(t2_lo)])
    upper = np.array([np.log(init_arr[0]) + LOG_HALFWIDTH, np.log(t2_hi)])
    theta, loglik, converged, n_evals, at_bound = simplex_maximize(
        neg_loglik, init_arr, lower, upper)
    return Estimate(theta_hat=ParamVector.from_array(theta), loglik=loglik,
                    converged=converged, n_evals=n_evals,
                    band=(0.0, float(w[-1])), at_bound=at_bound)


def moment_init(p: Periodogram, s_eta: float, band: Band) -> ParamVector:
    """Crude moment-based starting point for the Lorentzian family.

    theta1 is read off the band-integrated excess power over the floor and
    theta2 from the ratio of the zero-frequency level to that area.  Accuracy
    is irrelevant; the optimizer restarts cover a factor of four around it.
    """
    mask = _band_mask(p.omega, band)
    w = p.omega[mask]
    pw = p.power[mask]
    dom = 2.0 * np.pi / p.horizon_T
    excess = np.clip(pw - s_eta, 0.0, None)
    # one-sided integral doubled; fall back to total power when noise dominates
    area = float(np.sum(excess) * dom / np.pi)
    if area <= 0:
        area = float(np.sum(pw) * dom / np.pi)
    k = max(3, int(0.05 * w.size))
    s0 = float(np.mean(excess[:k]))
    if s0 <= 0:
        s0 = float(np.mean(pw[:k]))
    t2 = float(np.clip(2.0 * area / s0, w[0], band[1]))
    t1 = max(area, 1e-300)
    return ParamVector(t1, t2)
