"""Monte Carlo experiment runner, bound sweeps, and amplitude calibration.

Trials are seeded per (run seed, trial index), so a run is reproducible and
invariant to the number of worker processes.  Error statistics follow the
usual sample-mean / unbiased-variance construction: for each included trial
the per-parameter squared error eps = (theta_hat - theta)^2 is accumulated,
and the standard error of the mean squared error is sqrt(V/M).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CalibrationError, NumericError
from .estimator import (Band, LOG_HALFWIDTH, Periodogram, moment_init,
                        periodogram, simplex_maximize, spc_mle, whittle_mle)
from .fisher import (coherent_state_floor, invert_info, normalized_error_matrix,
                     ou_homodyne_closed, ou_quantum_closed)
from .psdmodel import ParamVector, PsdModel, ou_model, snr_C, theta_array
from .synth import TimeTrace, add_homodyne_noise, load_trace, spc_counts, synth_process

DEFAULT_BAND_FACTOR = 10.15  # analysis band (0, 10.15 * theta2], ~ the 6e5 rad/s cutoff


@dataclass(frozen=True)
class Measurement:
    """Measurement scheme for a Monte Carlo run.

    ``homodyne`` carries the photon-flux PSD s_i and implies the
    vacuum-limited noise floor 1/(4 s_i); ``spc`` carries the mean photon
    flux of the counting record.
    """

    kind: str
    s_i: Optional[float] = None
    photon_flux: Optional[float] = None

    def __post_init__(self):
        if self.kind == "homodyne":
            if self.s_i is None or not np.isfinite(self.s_i) or self.s_i <= 0:
                raise ValueError("homodyne measurement requires positive s_i")
        elif self.kind == "spc":
            if (self.photon_flux is None or not np.isfinite(self.photon_flux)
                    or self.photon_flux <= 0):
                raise ValueError("spc measurement requires positive photon_flux")
        else:
            raise ValueError(f"unknown measurement kind {self.kind!r}")

    @classmethod
    def homodyne(cls, s_i: float) -> "Measurement":
        return cls(kind="homodyne", s_i=float(s_i))

    @classmethod
    def spc(cls, photon_flux: float) -> "Measurement":
        return cls(kind="spc", photon_flux=float(photon_flux))

    @property
    def flux_level(self) -> float:
        return self.s_i if self.kind == "homodyne" else self.photon_flux


@dataclass(frozen=True)
class McConfig:
    """Configuration of one Monte Carlo error study."""

    theta_true: ParamVector
    measurement: Measurement
    T: float
    dt: float
    trials: int
    seed: int
    band: Optional[Band] = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("at least 2 trials are required for the variance estimate")
        if not np.isfinite(self.T) or self.T <= 0 or not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError("T and dt must be finite and positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved_band(self) -> Band:
        if self.band is not None:
            return (float(self.band[0]), float(self.band[1]))
        return (0.0, DEFAULT_BAND_FACTOR * self.theta_true.theta2)


@dataclass(frozen=True)
class ErrorStats:
    """Per-parameter squared-error statistics over the included trials."""

    eps_bar: np.ndarray
    V: np.ndarray
    M: int
    se: np.ndarray
    n_excluded: int
    n_trials: int
    valid: bool
    n_at_bound: int
    theta_hats: np.ndarray = field(repr=False)


def desk_scale_config(C: float = 23.5, kind: str = "homodyne", trials: int = 100,
                      seed: int = 1, workers: int = 1) -> McConfig:
    """Default desk-scale study: theta = (0.1323, 5.909e4 rad/s), T = 10 ms,
    dt = 5 us (2000 samples, Nyquist 6.28e5 rad/s), 100 trials."""
    theta = ParamVector(0.1323, 5.909e4)
    flux = C * theta.theta2 / (8.0 * theta.theta1)
    meas = Measurement.homodyne(flux) if kind == "homodyne" else Measurement.spc(flux)
    return McConfig(theta_true=theta, measurement=meas, T=0.01, dt=5e-6,
                    trials=trials, seed=seed, workers=workers)


def _run_single_trial(cfg: McConfig, m: int):
    model = ou_model()
    band = cfg.resolved_band()
    if cfg.measurement.kind == "homodyne":
        s_eta = coherent_state_floor(cfg.measurement.s_i)
        x = synth_process(model, cfg.theta_true, cfg.T, cfg.dt, (cfg.seed, m, 0))
        y = add_homodyne_noise(x, s_eta, (cfg.seed, m, 1))
        est = whittle_mle(periodogram(y), model, s_eta, band, cfg.theta_true)
    else:
        m_max = int(np.floor(band[1] * cfg.T / (2.0 * np.pi)))
        if m_max < 1:
            raise ValueError("band too narrow: no sideband falls below the cutoff")
        rec = spc_counts(model, cfg.theta_true, cfg.measurement.photon_flux,
                         cfg.T, m_max, (cfg.seed, m, 0))
        est = spc_mle(rec, model, init=cfg.theta_true)
    return est.theta_hat.as_array(), est.converged, est.at_bound


def run_trials(cfg: McConfig) -> ErrorStats:
    """Synthesize, estimate, and accumulate squared errors for cfg.trials records.

    Trials whose fit does not converge are excluded from the statistics; the
    run is flagged invalid (``valid=False``) when more than 10% are excluded
    or fewer than 2 trials remain.
    """
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_single_trial, repeat(cfg), range(cfg.trials)))
    else:
        results = [_run_single_trial(cfg, m) for m in range(cfg.trials)]

    theta = cfg.theta_true.as_array()
    hats = np.array([r[0] for r in results])
    conv = np.array([r[1] for r in results], dtype=bool)
    at_bound = np.array([r[2] for r in results], dtype=bool)

    included = hats[conv]
    n_excluded = int(np.count_nonzero(~conv))
    m_used = included.shape[0]
    valid = n_excluded <= 0.1 * cfg.trials and m_used >= 2
    if m_used >= 2:
        eps = (included - theta) ** 2
        eps_bar = eps.mean(axis=0)
        V = eps.var(axis=0, ddof=1)
        se = np.sqrt(V / m_used)
    else:
        eps_bar = np.full(theta.shape, np.nan)
        V = np.full(theta.shape, np.nan)
        se = np.full(theta.shape, np.nan)
    return ErrorStats(eps_bar=eps_bar, V=V, M=m_used, se=se,
                      n_excluded=n_excluded, n_trials=cfg.trials, valid=valid,
                      n_at_bound=int(np.count_nonzero(at_bound & conv)),
                      theta_hats=included)


def normalized_eps(stats_vec: np.ndarray, theta: ParamVector, T: float) -> np.ndarray:
    """Rescale per-parameter squared errors into theta1^2/(theta2 T), theta2/T units."""
    units = np.array([theta.theta1 ** 2 / (theta.theta2 * T), theta.theta2 / T])
    return np.asarray(stats_vec, dtype=float) / units


def bounds_sweep(theta, T: float, C_grid: Sequence[float]) -> List[dict]:
    """Normalized inverse-bound diagonals of quantum and homodyne limits per C.

    Rows are dicts with keys C, sigma11_quantum, sigma22_quantum,
    sigma11_homodyne, sigma22_homodyne.  The quantum sigma11 column is checked
    to be monotone non-increasing along the (sorted) grid.
    """
    t = ParamVector.from_array(theta_array(theta))
    grid = [float(c) for c in C_grid]
    if not grid or any(not np.isfinite(c) or c <= 0 for c in grid):
        raise ValueError("C grid must be non-empty and positive")
    if sorted(grid) != grid:
        raise ValueError("C grid must be sorted ascending")
    rows = []
    for C in grid:
        s_i = C * t.theta2 / (8.0 * t.theta1)
        Sq = normalized_error_matrix(invert_info(ou_quantum_closed(t, s_i, T)), t, T)
        Sh = normalized_error_matrix(invert_info(ou_homodyne_closed(t, s_i, T)), t, T)
        rows.append({
            "C": C,
            "sigma11_quantum": float(Sq[0, 0]),
            "sigma22_quantum": float(Sq[1, 1]),
            "sigma11_homodyne": float(Sh[0, 0]),
            "sigma22_homodyne": float(Sh[1, 1]),
        })
    s11 = [r["sigma11_quantum"] for r in rows]
    for a, b in zip(s11, s11[1:]):
        if b > a * (1.0 + 1e-12):
            raise NumericError("quantum sigma11 bound is not monotone along the C grid")
    return rows


# ---------------------------------------------------------------------------
# Pooled-record estimation and amplitude calibration
# ---------------------------------------------------------------------------

def _pooled_inband(ps: Sequence[Periodogram], band: Band):
    ws, pws = [], []
    for p in ps:
        mask = (p.omega > band[0]) & (p.omega <= band[1])
        if not np.any(mask):
            raise ValueError("a trace has no modes inside the analysis band")
        ws.append(p.omega[mask])
        pws.append(p.power[mask])
    w = np.concatenate(ws)
    pw = np.concatenate(pws)
    first = min(float(x[0]) for x in ws)
    return w, pw, first


def _pooled_whittle_fit(model: PsdModel, w: np.ndarray, pw: np.ndarray,
                        s_eta: float, band: Band, omega_first: float,
                        init) -> np.ndarray:
    def neg_loglik(th):
        sy = model.value(w, th) + s_eta
        return float(np.sum(np.log(sy) + pw / sy))

    init_arr = theta_array(init)
    lower = np.array([np.log(init_arr[0]) - LOG_HALFWIDTH, np.log(omega_first)])
    upper = np.array([np.log(init_arr[0]) + LOG_HALFWIDTH, np.log(band[1])])
    theta, _, _, _, _ = simplex_maximize(neg_loglik, init_arr, lower, upper)
    return theta


def _pooled_floor(ps: Sequence[Periodogram], high_band: Band, scale2: float) -> float:
    vals = []
    for p in ps:
        mask = (p.omega > high_band[0]) & (p.omega <= high_band[1])
        vals.append(scale2 * p.power[mask])
    pooled = np.concatenate(vals)
    if pooled.size < 50:
        raise ValueError(f"high band holds only {pooled.size} pooled modes; "
                         "at least 50 required for the floor estimate")
    return float(np.mean(pooled))


def calibrate_scale(x_traces: Sequence[TimeTrace], y_traces: Sequence[TimeTrace],
                    model: Optional[PsdModel] = None, s_eta: float = 0.0,
                    band: Optional[Band] = None, bracket: Tuple[float, float] = (0.25, 4.0),
                    rel_tol: float = 1e-4, high_band_factor: float = 20.0) -> float:
    """Amplitude factor c that reconciles pooled fits of the Y and X records.

    The reference theta1 comes from a pooled frequency-domain fit of the X
    traces (floor ``s_eta``, normally zero).  Bisection then searches the
    factor c in ``bracket`` such that the pooled fit of the scaled records
    c * Y reproduces that theta1 to ``rel_tol`` relative.  The Y noise floor
    is re-estimated from the scaled high band at every step (scaling the
    samples by c scales the floor by c^2).

    Raises
    ------
    CalibrationError
        If the bracket does not straddle the matching factor.
    """
    if len(x_traces) < 5 or len(y_traces) < 5:
        raise ValueError("calibration requires at least 5 traces on each side")
    model = model or ou_model()
    ps_x = [periodogram(t) for t in x_traces]
    ps_y = [periodogram(t) for t in y_traces]
    top = min(float(p.omega[-1]) for p in ps_x + ps_y)

    if band is None:
        rough = moment_init(ps_x[0], 0.0, (0.0, top))
        band = (0.0, min(DEFAULT_BAND_FACTOR * rough.theta2, top))

    wx, pwx, first_x = _pooled_inband(ps_x, band)
    init0 = moment_init(ps_x[0], s_eta, band)
    theta_x = _pooled_whittle_fit(model, wx, pwx, s_eta, band, first_x, init0)
    theta1_x = float(theta_x[0])

    high_band = (high_band_factor * float(theta_x[1]), top)
    wy, pwy, first_y = _pooled_inband(ps_y, band)

    def fitted_theta1(c: float) -> float:
        floor = _pooled_floor(ps_y, high_band, c * c)
        th = _pooled_whittle_fit(model, wy, c * c * pwy, floor, band, first_y, theta_x)
        return float(th[0])

    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = fitted_theta1(lo) - theta1_x
    f_hi = fitted_theta1(hi) - theta1_x
    if f_lo > 0 or f_hi < 0:
        raise CalibrationError(
            f"no sign change in bracket [{lo}, {hi}]: f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        t1_mid = fitted_theta1(mid)
        if abs(t1_mid / theta1_x - 1.0) < rel_tol:
            return mid
        if t1_mid < theta1_x:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * hi:
            break
    raise CalibrationError("bisection failed to reach the requested tolerance")


def load_traces(path) -> List[TimeTrace]:
    """Load one trace file or every *.csv in a directory, validating each."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.csv"))
        if not files:
            raise ValueError(f"{p}: directory contains no .csv trace files")
        return [load_trace(f) for f in files]
    if not p.exists():
        raise ValueError(f"{p}: no such file")
    return [load_trace(p)]


# ---------------------------------------------------------------------------
# Delimited output
# ---------------------------------------------------------------------------

def write_bounds_csv(path, theta: ParamVector, T: float, rows: Sequence[dict]) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# specfisher bounds sweep\n")
        fh.write(f"# theta1={theta.theta1!r} rad^2, theta2={theta.theta2!r} rad/s, T={T!r} s\n")
        fh.write("# sigma11 columns in units theta1^2/(theta2*T); "
                 "sigma22 columns in units theta2/T\n")
        fh.write("C,sigma11_quantum,sigma11_homodyne,sigma22_quantum,sigma22_homodyne\n")
        for r in rows:
            fh.write(f"{r['C']!r},{r['sigma11_quantum']!r},{r['sigma11_homodyne']!r},"
                     f"{r['sigma22_quantum']!r},{r['sigma22_homodyne']!r}\n")


def _mc_rows(cfg: McConfig, stats: ErrorStats):
    t = cfg.theta_true
    C = snr_C(t, cfg.measurement.flux_level)
    s_i = cfg.measurement.flux_level
    Sq = normalized_error_matrix(invert_info(ou_quantum_closed(t, s_i, cfg.T)), t, cfg.T)
    Sh = normalized_error_matrix(invert_info(ou_homodyne_closed(t, s_i, cfg.T)), t, cfg.T)
    eps_n = normalized_eps(stats.eps_bar, t, cfg.T)
    se_n = normalized_eps(stats.se, t, cfg.T)
    rows = []
    for idx in (0, 1):
        rows.append({
            "C": C,
            "param_index": idx + 1,
            "bound_quantum": float(Sq[idx, idx]),
            "bound_homodyne": float(Sh[idx, idx]),
            "eps_bar": float(eps_n[idx]),
            "se": float(se_n[idx]),
            "M": stats.M,
        })
    return rows


def write_mc_csv(path, cfg: McConfig, stats: ErrorStats) -> None:
    path = Path(path)
    rows = _mc_rows(cfg, stats)
    with path.open("w", newline="") as fh:
        fh.write("# specfisher monte carlo error statistics\n")
        fh.write(f"# measurement={cfg.measurement.kind}, trials={cfg.trials}, "
                 f"excluded={stats.n_excluded}, seed={cfg.seed}\n")
        fh.write("# bounds and eps_bar for param 1 in units theta1^2/(theta2*T), "
                 "param 2 in units theta2/T\n")
        fh.write("C,param_index,bound_quantum,bound_homodyne,eps_bar,se,M\n")
        for r in rows:
            fh.write(f"{r['C']!r},{r['param_index']},{r['bound_quantum']!r},"
                     f"{r['bound_homodyne']!r},{r['eps_bar']!r},{r['se']!r},{r['M']}\n")


def write_mc_json(path, cfg: McConfig, stats: ErrorStats) -> None:
    path = Path(path)
    payload = {
        "config": {
            "theta1": cfg.theta_true.theta1,
            "theta2": cfg.theta_true.theta2,
            "measurement": cfg.measurement.kind,
            "s_i": cfg.measurement.s_i,
            "photon_flux": cfg.measurement.photon_flux,
            "T": cfg.T,
            "dt": cfg.dt,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "band": list(cfg.resolved_band()),
            "workers": cfg.workers,
        },
        "results": {
            "rows": _mc_rows(cfg, stats),
            "eps_bar": [float(v) for v in stats.eps_bar],
            "V": [float(v) for v in stats.V],
            "se": [float(v) for v in stats.se],
            "M": stats.M,
            "n_excluded": stats.n_excluded,
            "n_at_bound": stats.n_at_bound,
            "valid": stats.valid,
        },
    }
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
