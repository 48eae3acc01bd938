"""Synthetic measurement records: hidden-process traces, homodyne records,
and per-sideband photon counts.

Traces are synthesized in the frequency domain: independent circular complex
Gaussian sideband amplitudes x_m with E|x_m|^2 = S_X(omega_m), Hermitian
symmetry x_{L-m} = x_m*, and

    X(t_l) = (1/sqrt(T)) sum_m x_m exp(-i omega_m t_l),  omega_m = 2 pi m / T.

This is exact for a stationary Gaussian process in the long-time limit and
matches the discrete Fourier convention of the estimator module, so the
periodogram of a synthesized trace has mean S_X(omega_m) mode by mode.

All generators take an explicit seed (int, tuple, or SeedSequence) and use
counter-based Philox streams, so records are reproducible independently of
how many trials run concurrently.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .psdmodel import PsdModel, theta_array

SeedLike = Union[int, tuple, np.random.SeedSequence]


class BandwidthWarning(UserWarning):
    """Sampling too coarse to resolve the requested process bandwidth."""


@dataclass(frozen=True)
class TimeTrace:
    """Uniformly sampled real time series; t_l = l * dt."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError(f"dt must be finite and positive, got {self.dt!r}")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("samples must be a 1-D sequence with at least 2 entries")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must all be finite")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def horizon_T(self) -> float:
        return self.dt * self.samples.size

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)


@dataclass(frozen=True)
class PhotonRecord:
    """Paired sideband photon counts N_m at omega_m = 2 pi m / T, m = 1..m_max."""

    counts: np.ndarray
    omega: np.ndarray
    photon_flux: float

    def __post_init__(self):
        c = np.asarray(self.counts)
        if not np.issubdtype(c.dtype, np.integer):
            raise ValueError("counts must be integers")
        if c.ndim != 1 or np.any(c < 0):
            raise ValueError("counts must be a 1-D sequence of non-negative integers")
        w = np.asarray(self.omega, dtype=float)
        if w.shape != c.shape or np.any(np.diff(w) <= 0) or np.any(w <= 0):
            raise ValueError("omega must be positive and strictly increasing, one per count")
        if not np.isfinite(self.photon_flux) or self.photon_flux <= 0:
            raise ValueError("photon_flux must be finite and positive")
        c = c.astype(np.int64)
        c.flags.writeable = False
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "omega", w)


def _rng(seed: SeedLike) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def synth_process(model: PsdModel, theta, T: float, dt: float, seed: SeedLike) -> TimeTrace:
    """Draw one stationary Gaussian trace with spectrum model.value(., theta).

    ``T`` must be an integer multiple of ``dt`` with at least 4 samples.
    Sideband amplitudes are circular complex Gaussians for 0 < m < L/2 and
    real Gaussians at m = 0 and (for even L) Nyquist, all with variance
    S_X(omega_m); the inverse transform is real up to rounding, which is
    asserted before the imaginary part is discarded.
    """
    th = theta_array(theta)
    if not np.isfinite(T) or T <= 0 or not np.isfinite(dt) or dt <= 0:
        raise ValueError("T and dt must be finite and positive")
    L_exact = T / dt
    L = int(round(L_exact))
    if abs(L_exact - L) > 1e-9 * max(L, 1):
        raise ValueError(f"T must be an integer multiple of dt, got T/dt = {L_exact!r}")
    if L < 4:
        raise ValueError(f"need at least 4 samples, got L = {L}")
    if th.size > 1 and np.pi / dt < 5.0 * th[1]:
        warnings.warn(
            f"Nyquist frequency {np.pi / dt:.3e} rad/s is below 5x the process "
            f"bandwidth {th[1]:.3e} rad/s; the trace will under-resolve the spectrum",
            BandwidthWarning, stacklevel=2)

    rng = _rng(seed)
    omega = 2.0 * np.pi * np.arange(L) / T
    half = (L - 1) // 2
    x = np.zeros(L, dtype=complex)
    sx0 = float(model.value(np.array(0.0), th))
    x[0] = rng.normal() * np.sqrt(sx0)
    sx = np.asarray(model.value(omega[1:half + 1], th), dtype=float)
    if np.any(sx < 0) or np.any(~np.isfinite(sx)):
        raise ValueError("model spectral density must be finite and non-negative")
    re = rng.normal(size=half)
    im = rng.normal(size=half)
    x[1:half + 1] = (re + 1j * im) * np.sqrt(sx / 2.0)
    if L % 2 == 0:
        x[L // 2] = rng.normal() * np.sqrt(float(model.value(omega[L // 2], th)))
    x[L - half:] = np.conj(x[1:half + 1])[::-1]

    # fft kernel exp(-2 pi i m l / L) matches exp(-i omega_m t_l) exactly.
    X = np.fft.fft(x) / np.sqrt(T)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(X.real))))
    if np.max(np.abs(X.imag)) > tol:
        raise AssertionError("synthesized trace is not real to within 1e-10")
    return TimeTrace(dt=dt, samples=X.real)


def add_homodyne_noise(x: TimeTrace, s_eta: float, seed: SeedLike) -> TimeTrace:
    """Add white measurement noise with flat spectral density s_eta.

    Per-sample variance is s_eta/dt, so the noise periodogram has mean s_eta
    at every mode.
    """
    if not np.isfinite(s_eta) or s_eta < 0:
        raise ValueError(f"s_eta must be finite and non-negative, got {s_eta!r}")
    rng = _rng(seed)
    eta = rng.normal(scale=np.sqrt(s_eta / x.dt), size=x.samples.size)
    return TimeTrace(dt=x.dt, samples=x.samples + eta)


def spc_counts(model: PsdModel, theta, photon_flux: float, T: float, m_max: int,
               seed: SeedLike) -> PhotonRecord:
    """Draw paired sideband photon counts for spectral photon counting.

    For each m in 1..m_max an independent sideband amplitude x_m is drawn as
    a circular complex Gaussian with E|x_m|^2 = S_X(omega_m), then
    N_m ~ Poisson(2 * photon_flux * |x_m|^2).  Marginally each N_m is
    geometric (Bose-Einstein) with mean 2 * photon_flux * S_X(omega_m).
    The m = 0 mode carries the carrier and is omitted.
    """
    th = theta_array(theta)
    if not np.isfinite(photon_flux) or photon_flux <= 0:
        raise ValueError(f"photon_flux must be finite and positive, got {photon_flux!r}")
    if not np.isfinite(T) or T <= 0:
        raise ValueError(f"T must be finite and positive, got {T!r}")
    if int(m_max) != m_max or m_max < 1:
        raise ValueError(f"m_max must be an integer >= 1, got {m_max!r}")
    m_max = int(m_max)
    rng = _rng(seed)
    omega = 2.0 * np.pi * np.arange(1, m_max + 1) / T
    sx = np.asarray(model.value(omega, th), dtype=float)
    if np.any(sx < 0) or np.any(~np.isfinite(sx)):
        raise ValueError("model spectral density must be finite and non-negative")
    re = rng.normal(size=m_max)
    im = rng.normal(size=m_max)
    x_sq = (re * re + im * im) * sx / 2.0
    counts = rng.poisson(2.0 * photon_flux * x_sq)
    return PhotonRecord(counts=counts.astype(np.int64), omega=omega,
                        photon_flux=float(photon_flux))


def bose_einstein_pmf(n_bar: float, n) -> Union[float, np.ndarray]:
    """Probability of n counts under a Bose-Einstein (geometric) distribution.

    p(n) = n_bar^n / (1 + n_bar)^(n+1), evaluated in log space so that large
    n does not overflow.
    """
    if not np.isfinite(n_bar) or n_bar <= 0:
        raise ValueError(f"n_bar must be finite and positive, got {n_bar!r}")
    narr = np.asarray(n)
    if not np.issubdtype(narr.dtype, np.integer):
        raise ValueError("n must be integer-valued")
    if np.any(narr < 0):
        raise ValueError("n must be non-negative")
    logp = narr * np.log(n_bar) - (narr + 1.0) * np.log1p(n_bar)
    out = np.exp(logp)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# File formats: traces as "t_seconds,value", photon records as
# "omega_rad_per_s,count".  Floats are written with repr() so that
# parsing them back reproduces the exact binary value.
# ---------------------------------------------------------------------------

TRACE_HEADER = ("t_seconds", "value")
PHOTON_HEADER = ("omega_rad_per_s", "count")


def save_trace(trace: TimeTrace, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        dt = trace.dt
        for l, v in enumerate(trace.samples):
            fh.write(f"{l * dt!r},{float(v)!r}\n")


def load_trace(path) -> TimeTrace:
    """Parse one trace CSV, reporting malformed content with its line number."""
    path = Path(path)
    t_vals, y_vals = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != list(TRACE_HEADER):
            raise ValueError(f"{path}: line 1: expected header "
                             f"'{','.join(TRACE_HEADER)}', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                t = float(row[0])
                y = float(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric field") from None
            if not (np.isfinite(t) and np.isfinite(y)):
                raise ValueError(f"{path}: line {lineno}: non-finite value")
            t_vals.append(t)
            y_vals.append(y)
    if len(y_vals) < 2:
        raise ValueError(f"{path}: need at least 2 samples, got {len(y_vals)}")
    t = np.asarray(t_vals)
    diffs = np.diff(t)
    dt = float(np.median(diffs))
    if dt <= 0:
        raise ValueError(f"{path}: timestamps are not increasing")
    bad = np.nonzero(np.abs(diffs - dt) > 1e-9 * dt)[0]
    if bad.size:
        raise ValueError(f"{path}: line {int(bad[0]) + 3}: non-uniform sample interval "
                         f"({diffs[bad[0]]!r} vs dt={dt!r})")
    return TimeTrace(dt=dt, samples=np.asarray(y_vals))


def save_photon_record(rec: PhotonRecord, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(PHOTON_HEADER) + "\n")
        for w, c in zip(rec.omega, rec.counts):
            fh.write(f"{float(w)!r},{int(c)}\n")


def load_photon_record(path, photon_flux: float) -> PhotonRecord:
    """Parse a photon-count CSV; the flux is not stored and must be supplied."""
    path = Path(path)
    omega, counts = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != list(PHOTON_HEADER):
            raise ValueError(f"{path}: line 1: expected header "
                             f"'{','.join(PHOTON_HEADER)}', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                w = float(row[0])
                c = int(row[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed field") from None
            omega.append(w)
            counts.append(c)
    if not counts:
        raise ValueError(f"{path}: no records")
    return PhotonRecord(counts=np.asarray(counts, dtype=np.int64),
                        omega=np.asarray(omega), photon_flux=photon_flux)
