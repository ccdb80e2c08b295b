"""Accelerated pointwise kernels with a pure-numpy fallback.

The FFT-heavy work lives in :mod:`xfelwaves.spectral_core` and always goes
through ``scipy.fft``; what this module accelerates is the pointwise /
reduction layer that would otherwise cost several numpy temporaries per call:

* fused nonlinear potential-phase application (split-step half steps),
* fused weighted reductions for the six functional terms plus the virial
  moment,
* radial shell averaging (symmetrization of ground-state iterates),
* the sequential RK4 shooting loop for the radial profile equation.

Every kernel has two implementations with identical semantics: a serial
``@njit`` twin (deterministic, no ``prange``) and a vectorized numpy one.
Set ``XFELWAVES_NO_NUMBA=1`` to force the numpy path; the choice is made
once at import time and reported by :func:`use_numba`.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_FLAG = os.environ.get("XFELWAVES_NO_NUMBA", "").strip()
_DISABLED = _ENV_FLAG not in ("", "0")

if not _DISABLED:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is an install dependency
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False


def use_numba() -> bool:
    """True when the compiled kernel path is active."""

    return HAVE_NUMBA


# ---------------------------------------------------------------------------
# potential phase:  psi <- psi * exp(-i * tau * V),
# V = b2*harm + l1*coul + l2*hart - l3*|psi|^p   (all arrays flat, in place)
# ---------------------------------------------------------------------------


def _potential_phase_loop(psi, harm, coul, hart, b2, l1, l2, l3, p, tau):
    half_p = 0.5 * p
    for i in range(psi.shape[0]):
        z = psi[i]
        a2 = z.real * z.real + z.imag * z.imag
        v = b2 * harm[i] + l1 * coul[i] + l2 * hart[i]
        if l3 != 0.0 and a2 > 0.0:
            v -= l3 * a2**half_p
        theta = -tau * v
        psi[i] = z * complex(math.cos(theta), math.sin(theta))


def _potential_phase_np(psi, harm, coul, hart, b2, l1, l2, l3, p, tau):
    a2 = psi.real**2 + psi.imag**2
    v = b2 * harm + l1 * coul + l2 * hart
    if l3 != 0.0:
        v = v - l3 * a2 ** (0.5 * p)
    psi *= np.exp((-1j * tau) * v)


# ---------------------------------------------------------------------------
# fused reductions: plain sums (caller applies the h^3 quadrature weight)
# returns (mass, harmonic, coulomb, lp(p+2), hartree_dot, virial_j)
# ---------------------------------------------------------------------------


def _weighted_sums_loop(psi, harm, coul, r2, hart, p):
    mass_s = 0.0
    harm_s = 0.0
    coul_s = 0.0
    lp_s = 0.0
    hart_s = 0.0
    j_s = 0.0
    half_q = 0.5 * (p + 2.0)
    for i in range(psi.shape[0]):
        z = psi[i]
        a2 = z.real * z.real + z.imag * z.imag
        mass_s += a2
        harm_s += harm[i] * a2
        coul_s += coul[i] * a2
        hart_s += hart[i] * a2
        j_s += r2[i] * a2
        if a2 > 0.0:
            lp_s += a2**half_q
    return mass_s, harm_s, coul_s, lp_s, hart_s, j_s


def _weighted_sums_np(psi, harm, coul, r2, hart, p):
    a2 = psi.real**2 + psi.imag**2
    lp_s = float(np.sum(a2 ** (0.5 * (p + 2.0))))
    return (
        float(np.sum(a2)),
        float(np.dot(harm, a2)),
        float(np.dot(coul, a2)),
        lp_s,
        float(np.dot(hart, a2)),
        float(np.dot(r2, a2)),
    )


# ---------------------------------------------------------------------------
# shell averaging: replace values by their mean over equal-radius shells
# ---------------------------------------------------------------------------


def _shell_average_loop(values, inv, n_shells):
    sums = np.zeros(n_shells, dtype=np.complex128)
    counts = np.zeros(n_shells, dtype=np.int64)
    for i in range(values.shape[0]):
        s = inv[i]
        sums[s] += values[i]
        counts[s] += 1
    out = np.empty_like(values)
    for i in range(values.shape[0]):
        s = inv[i]
        out[i] = sums[s] / counts[s]
    return out


def _shell_average_np(values, inv, n_shells):
    counts = np.bincount(inv, minlength=n_shells)
    sums = np.bincount(inv, weights=values.real, minlength=n_shells) + 1j * np.bincount(
        inv, weights=values.imag, minlength=n_shells
    )
    return (sums / counts)[inv]


# ---------------------------------------------------------------------------
# radial shooting: R'' + (2/r) R' - R + |R|^(q-1) R = 0, R(0)=a, R'(0)=0.
# Fixed-step RK4 from r = dr with a Taylor start; returns
# (status, stop_index) and fills R, S in place.
# status: 0 = ran to r_max, 1 = crossed zero (amplitude too large),
#         2 = rebounded upward (amplitude too small).
# ---------------------------------------------------------------------------


def _shoot_rhs(r, rv, sv, q):
    # sign-odd power keeps the nonlinearity defined past a zero crossing
    if rv >= 0.0:
        nl = rv**q
    else:
        nl = -((-rv) ** q)
    return rv - nl - 2.0 * sv / r


def _shoot_loop(a, dr, n_steps, q, r_arr, s_arr):
    # Taylor start at r = dr: R''(0) = (a - a^q)/3
    c2 = (a - a**q) / 6.0
    rv = a + c2 * dr * dr
    sv = 2.0 * c2 * dr
    r_arr[0] = a
    s_arr[0] = 0.0
    r_arr[1] = rv
    s_arr[1] = sv
    status = 0
    stop = n_steps
    for i in range(1, n_steps):
        r = dr * i
        k1r = sv
        k1s = _shoot_rhs(r, rv, sv, q)
        h2 = 0.5 * dr
        k2r = sv + h2 * k1s
        k2s = _shoot_rhs(r + h2, rv + h2 * k1r, sv + h2 * k1s, q)
        k3r = sv + h2 * k2s
        k3s = _shoot_rhs(r + h2, rv + h2 * k2r, sv + h2 * k2s, q)
        k4r = sv + dr * k3s
        k4s = _shoot_rhs(r + dr, rv + dr * k3r, sv + dr * k3s, q)
        rv = rv + (dr / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        sv = sv + (dr / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        r_arr[i + 1] = rv
        s_arr[i + 1] = sv
        if rv <= 0.0:
            status = 1
            stop = i + 1
            break
        if sv > 0.0 or rv > 3.0 * a:
            status = 2
            stop = i + 1
            break
    return status, stop


if HAVE_NUMBA:
    _potential_phase_impl = njit(cache=True)(_potential_phase_loop)
    _weighted_sums_impl = njit(cache=True)(_weighted_sums_loop)
    _shell_average_impl = njit(cache=True)(_shell_average_loop)
    _shoot_rhs = njit(cache=True, inline="always")(_shoot_rhs)
    _shoot_impl = njit(cache=True)(_shoot_loop)
else:
    _potential_phase_impl = _potential_phase_np
    _weighted_sums_impl = _weighted_sums_np
    _shell_average_impl = _shell_average_np
    _shoot_impl = _shoot_loop


def potential_phase(psi_flat, harm, coul, hart, b2, l1, l2, l3, p, tau) -> None:
    """In-place ``psi *= exp(-i tau V[psi])`` over flat views."""

    _potential_phase_impl(
        psi_flat, harm, coul, hart, float(b2), float(l1), float(l2), float(l3), float(p), float(tau)
    )


def weighted_sums(psi_flat, harm, coul, r2, hart, p):
    """Unweighted sums (mass, harmonic, coulomb, lp, hartree_dot, virial)."""

    return _weighted_sums_impl(psi_flat, harm, coul, r2, hart, float(p))


def shell_average(values_flat, inv, n_shells):
    """Mean of ``values`` over shells indexed by ``inv`` (complex safe)."""

    return _shell_average_impl(values_flat, inv, int(n_shells))


def shoot_radial(a: float, dr: float, n_steps: int, q: float):
    """Integrate the radial profile ODE; see module notes for the status code."""

    r_arr = np.empty(n_steps + 1, dtype=np.float64)
    s_arr = np.empty(n_steps + 1, dtype=np.float64)
    status, stop = _shoot_impl(float(a), float(dr), int(n_steps), float(q), r_arr, s_arr)
    return int(status), int(stop), r_arr, s_arr
