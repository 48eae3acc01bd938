"""Spectral-density models of the hidden process and their parameter gradients.

The canonical model is the Lorentzian spectrum of an Ornstein-Uhlenbeck
process,

    S_X(omega) = 2 theta1 theta2 / (omega**2 + theta2**2),

where ``theta1`` is the process variance (the area under S_X divided by
2 pi) and ``theta2`` the bandwidth.  Arbitrary user-supplied spectra are
wrapped by :class:`PsdModel`, with a finite-difference fallback for the
log-gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class ParamVector:
    """Hyperparameters of the hidden-process spectrum.

    Attributes
    ----------
    theta1 : float
        Process variance, rad^2.
    theta2 : float
        Process bandwidth, rad/s.
    """

    theta1: float
    theta2: float

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be finite and positive, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2], dtype=float)

    @classmethod
    def from_array(cls, arr: ArrayLike) -> "ParamVector":
        a = np.asarray(arr, dtype=float).reshape(-1)
        if a.size != 2:
            raise ValueError(f"expected 2 parameters, got {a.size}")
        return cls(float(a[0]), float(a[1]))


def theta_array(theta: Union[ParamVector, ArrayLike]) -> np.ndarray:
    """Coerce a ParamVector or sequence to a validated positive float array."""
    if isinstance(theta, ParamVector):
        return theta.as_array()
    a = np.asarray(theta, dtype=float).reshape(-1)
    if a.size == 0 or not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError(f"parameters must be finite and positive, got {a!r}")
    return a


@dataclass(frozen=True)
class SnrContext:
    """Measurement context: photon-flux spectral density and observation time.

    ``s_i`` is the photon-flux PSD (1/s), constant over the band for a
    coherent-state beam, in which case it equals the mean photon flux.
    """

    s_i: float
    horizon_T: float

    def __post_init__(self):
        if not np.isfinite(self.s_i) or self.s_i <= 0:
            raise ValueError(f"s_i must be finite and positive, got {self.s_i!r}")
        if not np.isfinite(self.horizon_T) or self.horizon_T <= 0:
            raise ValueError(f"horizon_T must be finite and positive, got {self.horizon_T!r}")


def ou_value(omega: ArrayLike, theta: Union[ParamVector, ArrayLike]):
    """Lorentzian spectral density 2*theta1*theta2 / (omega^2 + theta2^2).

    Parameters
    ----------
    omega : float or ndarray
        Angular frequency, rad/s.
    theta : ParamVector or length-2 sequence
        (theta1, theta2), both positive.

    Returns
    -------
    float or ndarray
        Spectral density in rad^2 * s.
    """
    t1, t2 = theta_array(theta)
    w = np.asarray(omega, dtype=float)
    out = 2.0 * t1 * t2 / (w * w + t2 * t2)
    return out if out.ndim else float(out)


def ou_log_grad(omega: ArrayLike, theta: Union[ParamVector, ArrayLike]) -> np.ndarray:
    """Gradient of ln S_X for the Lorentzian model.

    Returns an array of shape ``(2,) + shape(omega)`` holding
    ``(1/theta1, 1/theta2 - 2*theta2/(omega^2 + theta2^2))``.
    """
    t1, t2 = theta_array(theta)
    w = np.asarray(omega, dtype=float)
    g1 = np.broadcast_to(1.0 / t1, w.shape).copy()
    g2 = 1.0 / t2 - 2.0 * t2 / (w * w + t2 * t2)
    return np.stack([g1, np.asarray(g2, dtype=float)])


def snr_C(theta: Union[ParamVector, ArrayLike], s_i: float) -> float:
    """Dimensionless SNR 8*theta1*s_i/theta2, equal to 4*s_i*S_X(0)."""
    t1, t2 = theta_array(theta)
    if not np.isfinite(s_i) or s_i <= 0:
        raise ValueError(f"s_i must be finite and positive, got {s_i!r}")
    return 8.0 * t1 * s_i / t2


def _fd_log_grad(value: Callable, dim: int, rel_step: float) -> Callable:
    """Central finite differences of ln value(omega, theta), step rel_step*theta_mu."""

    def log_grad(omega, theta):
        th = np.asarray(theta, dtype=float)
        w = np.asarray(omega, dtype=float)
        rows = []
        for mu in range(dim):
            h = rel_step * th[mu]
            up, dn = th.copy(), th.copy()
            up[mu] += h
            dn[mu] -= h
            rows.append((np.log(value(w, up)) - np.log(value(w, dn))) / (2.0 * h))
        return np.stack([np.broadcast_to(r, w.shape) for r in rows])

    return log_grad


@dataclass(frozen=True)
class PsdModel:
    """Evaluatable spectral-density family S_X(omega | theta).

    Attributes
    ----------
    value : callable(omega, theta) -> ndarray
        Spectral density; must be positive and even in omega, vectorized
        over omega.
    log_grad : callable(omega, theta) -> ndarray
        Gradient of ln S_X, shape ``(dim,) + shape(omega)``.
    dim : int
        Number of parameters.
    """

    value: Callable = field(repr=False)
    log_grad: Callable = field(repr=False)
    dim: int = 2

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @classmethod
    def from_value(cls, value: Callable, dim: int = 2, rel_step: float = 1e-6) -> "PsdModel":
        """Wrap a spectral-density function, deriving log_grad by finite differences."""
        return cls(value=value, log_grad=_fd_log_grad(value, dim, rel_step), dim=dim)


def _ou_value_arr(omega, theta):
    th = np.asarray(theta, dtype=float)
    w = np.asarray(omega, dtype=float)
    return 2.0 * th[0] * th[1] / (w * w + th[1] * th[1])


def _ou_log_grad_arr(omega, theta):
    th = np.asarray(theta, dtype=float)
    w = np.asarray(omega, dtype=float)
    g1 = np.broadcast_to(1.0 / th[0], w.shape).copy()
    g2 = 1.0 / th[1] - 2.0 * th[1] / (w * w + th[1] * th[1])
    return np.stack([g1, np.asarray(g2, dtype=float)])


def ou_model() -> PsdModel:
    """The Lorentzian (Ornstein-Uhlenbeck) model with analytic gradients."""
    return PsdModel(value=_ou_value_arr, log_grad=_ou_log_grad_arr, dim=2)
