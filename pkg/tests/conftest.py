"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's quadrature and likelihood
machinery: information matrices are rebuilt as plain sums over discrete
Fourier modes, and integrals use trapezoid rules on explicit grids.
"""

import numpy as np
import pytest

from specfisher import ParamVector

# Desk-scale configuration mirrored throughout the experiments: theta2*T = 591,
# 2000 samples per trace, Nyquist at 6.28e5 rad/s, analysis band up to ~6e5.
DESK_THETA = ParamVector(0.1323, 5.909e4)
DESK_T = 0.01
DESK_DT = 5e-6
DESK_BAND = (0.0, 10.15 * DESK_THETA.theta2)

# Photon fluxes and the SNR values they produce in the desk configuration.
DESK_FLUXES = (1.315e6, 3.616e6, 6.327e6, 1.418e7)
DESK_C_VALUES = (23.5, 64.8, 113.0, 254.0)


@pytest.fixture
def desk_theta():
    return DESK_THETA


def ou_psd(omega, t1, t2):
    omega = np.asarray(omega, dtype=float)
    return 2.0 * t1 * t2 / (omega ** 2 + t2 ** 2)


def ou_dlog(omega, t1, t2):
    omega = np.asarray(omega, dtype=float)
    g1 = np.full(omega.shape, 1.0 / t1)
    g2 = 1.0 / t2 - 2.0 * t2 / (omega ** 2 + t2 ** 2)
    return np.stack([g1, g2])


def band_modes(T, band):
    """Fourier modes 2 pi m / T falling inside (band[0], band[1]]."""
    m_hi = int(np.floor(band[1] * T / (2.0 * np.pi)))
    omega = 2.0 * np.pi * np.arange(1, m_hi + 1) / T
    return omega[omega > band[0]]


def whittle_band_info(t1, t2, s_eta, T, band):
    """Discrete-mode Fisher information of the banded frequency-domain likelihood.

    Each positive-frequency mode contributes the outer product of the
    gradient of ln(S_X + s_eta); this is the exact information for the
    likelihood the estimator maximizes, independent of any integral bound.
    """
    w = band_modes(T, band)
    sx = ou_psd(w, t1, t2)
    g = ou_dlog(w, t1, t2) * (sx / (sx + s_eta))
    return np.einsum("iw,jw->ij", g, g)


def spc_band_info(t1, t2, flux, T, band):
    """Discrete-mode Fisher information of the photon-count likelihood."""
    w = band_modes(T, band)
    nbar = 2.0 * flux * ou_psd(w, t1, t2)
    g = ou_dlog(w, t1, t2)
    return np.einsum("iw,jw,w->ij", g, g, 1.0 / (1.0 + 1.0 / nbar))


def trapezoid_info(value_fn, theta, weight_fn, half_width, n=200_001):
    """Trapezoid-rule information integral with test-local finite differences.

    Rebuilds (1/2 pi) * integral (d ln S)(d ln S)^T * weight(S) d omega on a
    uniform grid, independent of the library's tan-substitution engine.
    """
    theta = np.asarray(theta, dtype=float)
    omega = np.linspace(-half_width, half_width, n)
    sx = value_fn(omega, theta)
    grads = []
    for mu in range(theta.size):
        h = 1e-6 * theta[mu]
        up, dn = theta.copy(), theta.copy()
        up[mu] += h
        dn[mu] -= h
        grads.append((np.log(value_fn(omega, up)) - np.log(value_fn(omega, dn))) / (2 * h))
    g = np.stack(grads)
    base = weight_fn(sx) * np.gradient(omega)
    return np.einsum("iw,jw,w->ij", g, g, base) / (2.0 * np.pi)
