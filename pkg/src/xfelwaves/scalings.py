"""Scaling families of fields and the one-parameter manifold projections.

Five families are supported, each of the form ``v -> lam^a * v(lam x)``
(``a`` the amplitude exponent; the amplitude family scales values only):

==================  =========  ==============================
tag                 a          coordinate dilation
==================  =========  ==============================
mass_preserving     3/2        yes
cubed               3          yes
amplitude           1          no
p_scaling           2/p        yes
p2_scaling          3/(p+2)    yes
==================  =========  ==============================

Under such a scaling every quadrature term picks up a pure power of lam, so
scaled functionals have closed-form lam-expansions.  The projections exploit
this: they root-solve the scalar expansion built from the *unscaled* field's
term values (no re-interpolation inside the solve) and re-interpolate the
field exactly once at the root.

Coordinate dilation is spectral: the trigonometric interpolant of ``v`` is
evaluated at ``lam x`` per axis, with zero-extension for points that leave
the box (periodic wrap would tile spurious copies of the field for large
lam).  A cheap resolvability estimate guards egregious requests: for lam > 1
the spectral power fraction that would alias past the Nyquist wavenumber,
for lam < 1 the mass fraction of ``v`` outside the shrunk sampling window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import spectral_core as sc
from .functionals import (
    PhysicsParams,
    TermCoeffs,
    TermValues,
    measure_terms,
)
from .spectral_core import Field, GridSpec, KernelSet

__all__ = [
    "ScalingError",
    "ResolutionError",
    "NoCrossingError",
    "NoMaximumError",
    "ScalingKind",
    "MASS_PRESERVING",
    "CUBED",
    "AMPLITUDE",
    "scaling_exponents",
    "scale_terms",
    "functional_curve",
    "rescale",
    "project_pohozaev",
    "project_K",
    "apply_cutoff",
]


class ScalingError(ValueError):
    """Base class for scaling/projection failures."""


class ResolutionError(ScalingError):
    """Requested dilation is not resolvable on this grid."""


class NoCrossingError(ScalingError):
    """The scalar projection equation has no admissible root."""


class NoMaximumError(ScalingError):
    """Mass-critical case: the action has no maximum along the family."""


_TAGS = ("mass_preserving", "cubed", "amplitude", "p_scaling", "p2_scaling")


@dataclass(frozen=True)
class ScalingKind:
    """One scaling family; ``p`` must be set for the p-dependent families."""

    tag: str
    p: float | None = None

    def __post_init__(self) -> None:
        if self.tag not in _TAGS:
            raise ValueError(f"unknown scaling tag {self.tag!r}; expected one of {_TAGS}")
        if self.tag in ("p_scaling", "p2_scaling"):
            if self.p is None or not (0.0 < self.p < 4.0):
                raise ValueError(f"{self.tag} requires p in (0,4), got {self.p!r}")

    @property
    def amplitude_exponent(self) -> float:
        if self.tag == "mass_preserving":
            return 1.5
        if self.tag == "cubed":
            return 3.0
        if self.tag == "amplitude":
            return 1.0
        if self.tag == "p_scaling":
            return 2.0 / self.p  # type: ignore[operator]
        return 3.0 / (self.p + 2.0)  # type: ignore[operator]

    @property
    def dilates_coordinates(self) -> bool:
        return self.tag != "amplitude"

    @staticmethod
    def p_scaling(p: float) -> "ScalingKind":
        return ScalingKind("p_scaling", p)

    @staticmethod
    def p2_scaling(p: float) -> "ScalingKind":
        return ScalingKind("p2_scaling", p)


MASS_PRESERVING = ScalingKind("mass_preserving")
CUBED = ScalingKind("cubed")
AMPLITUDE = ScalingKind("amplitude")


def scaling_exponents(kind: ScalingKind, p: float) -> TermValues:
    """Per-term powers of lam (``p`` is the physics exponent for the lp term)."""

    a = kind.amplitude_exponent
    if kind.dilates_coordinates:
        return TermValues(
            mass=2.0 * a - 3.0,
            kinetic=2.0 * a - 1.0,
            harmonic_partial=2.0 * a - 5.0,
            coulomb=2.0 * a - 2.0,
            hartree=4.0 * a - 5.0,
            lp=(p + 2.0) * a - 3.0,
        )
    return TermValues(
        mass=2.0, kinetic=2.0, harmonic_partial=2.0, coulomb=2.0, hartree=4.0, lp=p + 2.0
    )


def scale_terms(t: TermValues, kind: ScalingKind, lam: float, p: float) -> TermValues:
    e = scaling_exponents(kind, p)
    return TermValues(
        mass=t.mass * lam**e.mass,
        kinetic=t.kinetic * lam**e.kinetic,
        harmonic_partial=t.harmonic_partial * lam**e.harmonic_partial,
        coulomb=t.coulomb * lam**e.coulomb,
        hartree=t.hartree * lam**e.hartree,
        lp=t.lp * lam**e.lp,
    )


def functional_curve(
    t: TermValues, coeffs: TermCoeffs, kind: ScalingKind, p: float, lams: np.ndarray
) -> np.ndarray:
    """Vectorized closed-form lam-expansion of ``coeffs . scale_terms(t, lam)``."""

    e = scaling_exponents(kind, p)
    lams = np.asarray(lams, dtype=np.float64)
    out = np.zeros_like(lams)
    for term in ("mass", "kinetic", "harmonic_partial", "coulomb", "hartree", "lp"):
        c = getattr(coeffs, term) * getattr(t, term)
        if c != 0.0:
            out = out + c * lams ** getattr(e, term)
    return out


# ---------------------------------------------------------------------------
# spectral resampling
# ---------------------------------------------------------------------------


def _resample_error_estimate(values: np.ndarray, grid: GridSpec, lam: float) -> float:
    if lam == 1.0:
        return 0.0
    if lam > 1.0:
        # power fraction beyond the per-axis Nyquist band shrunk by lam
        fh = sc.fftn(values)
        power = fh.real**2 + fh.imag**2
        total = float(np.sum(power))
        if total == 0.0:
            return 0.0
        k = np.abs(grid.wavenumbers())
        k_keep = (np.pi / grid.spacing) / lam
        keep1d = k <= k_keep
        keep = (
            keep1d[:, None, None] & keep1d[None, :, None] & keep1d[None, None, :]
        )
        return 1.0 - float(np.sum(power[keep])) / total
    # lam < 1: mass fraction of the field outside the shrunk sampling window
    a2 = values.real**2 + values.imag**2
    total = float(np.sum(a2))
    if total == 0.0:
        return 0.0
    x = np.abs(grid.axis_coords())
    inside1d = x <= lam * grid.half_length
    inside = (
        inside1d[:, None, None] & inside1d[None, :, None] & inside1d[None, None, :]
    )
    return 1.0 - float(np.sum(a2[inside])) / total


def _dilate(values: np.ndarray, grid: GridSpec, lam: float) -> np.ndarray:
    """Evaluate the trigonometric interpolant at ``lam x`` (zero outside the box).

    The zero-extension mask is skipped when the sampling points leave the
    box by less than two cells (lam barely above 1): such points wrap onto
    the opposite face of the periodic interpolant, whose values are the
    same smooth tail, while zeroing them would manufacture a face
    discontinuity whose spectral ringing dwarfs the tail it removes.
    """

    n = grid.n_per_axis
    L = grid.half_length
    y = lam * grid.axis_coords()
    jy = (y + L) / grid.spacing
    modes = scipy.fft.fftfreq(n) * n
    ang = (2.0 * np.pi / n) * np.outer(jy, modes)
    basis = np.exp(1j * ang)
    # symmetric Nyquist treatment keeps real fields real
    nyq = np.nonzero(modes == -(n // 2))[0]
    if nyq.size:
        basis[:, nyq[0]] = np.cos(np.pi * jy)
    if (lam - 1.0) * L > 2.0 * grid.spacing:
        inside = (y >= -L) & (y < L)
        basis *= inside[:, None].astype(np.float64)
    basis /= n
    out = values
    for axis in range(3):
        coeffs = scipy.fft.fft(out, axis=axis, workers=sc.fft_workers())
        out = np.tensordot(basis, coeffs, axes=([1], [axis]))
        out = np.moveaxis(out, 0, axis)
    return np.ascontiguousarray(out)


def rescale(
    u: Field, kind: ScalingKind, lam: float, *, max_resample_error: float = 0.5
) -> Field:
    """Return the scaled field on the same grid.

    Amplitude scalings are exact; coordinate dilations go through spectral
    interpolation and raise :class:`ResolutionError` when the resolvability
    estimate exceeds ``max_resample_error``.
    """

    if not (lam > 0.0 and np.isfinite(lam)):
        raise ScalingError(f"scaling parameter must be positive and finite, got {lam!r}")
    amp = lam**kind.amplitude_exponent
    if not kind.dilates_coordinates:
        return Field(u.grid, u.values * amp)
    if lam == 1.0:
        return u.copy()
    err = _resample_error_estimate(u.values, u.grid, lam)
    if err > max_resample_error:
        raise ResolutionError(
            f"dilation lam={lam:g} unresolvable on n={u.grid.n_per_axis} grid: "
            f"estimated interpolation error fraction {err:.3g} > {max_resample_error:g}"
        )
    return Field(u.grid, amp * _dilate(u.values, u.grid, lam))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


def _bracket_and_bisect(f, lo: float = 1e-4, hi: float = 1e4, n_scan: int = 257) -> float:
    """First +to- sign change of ``f`` on a geometric grid, then bisection."""

    grid = np.geomspace(lo, hi, n_scan)
    vals = np.array([f(x) for x in grid])
    idx = None
    for i in range(n_scan - 1):
        if vals[i] > 0.0 >= vals[i + 1]:
            idx = i
            break
    if idx is None:
        raise NoCrossingError(
            f"no sign change on [{lo:g}, {hi:g}]: f({lo:g})={vals[0]:.3e}, "
            f"f({hi:g})={vals[-1]:.3e}"
        )
    a, b = float(grid[idx]), float(grid[idx + 1])
    while b - a > 1e-12 * b:
        mid = 0.5 * (a + b)
        if f(mid) > 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def project_pohozaev(
    u: Field, params: PhysicsParams, kernels: KernelSet
) -> tuple[float, Field]:
    """Unique lam* with Q(u_lam*) = 0 along the mass-preserving family.

    Solves the closed-form expansion ``Q(u_lam) = lam^2 A + lam (C + H) -
    lam^(3p/2) B`` built from the term values of ``u``; the field is
    re-interpolated once at lam* (resolvability is the caller's concern, per
    the projection contract).
    """

    if params.lambda1 < 0.0 or params.lambda2 < 0.0 or params.lambda3 <= 0.0:
        raise ScalingError(
            "Pohozaev projection requires lambda1 >= 0, lambda2 >= 0, lambda3 > 0"
        )
    p = params.p
    t = measure_terms(u, kernels, p, include_hartree=params.lambda2 != 0.0)
    if t.mass == 0.0:
        raise ScalingError("cannot project the zero field")
    A = t.kinetic
    CH = 0.5 * params.lambda1 * t.coulomb + 0.25 * params.lambda2 * t.hartree
    B = 1.5 * params.lambda3 * p / (p + 2.0) * t.lp
    if abs(p - 4.0 / 3.0) < 1e-12 and A >= 0.6 * params.lambda3 * t.lp:
        raise NoMaximumError(
            "mass-critical family has no action maximum: kinetic "
            f"{A:.6g} >= (3 lambda3/5) lp {0.6 * params.lambda3 * t.lp:.6g}"
        )
    if B <= 0.0:
        raise NoCrossingError("focusing term vanishes; Q never crosses zero")
    exp_lp = 1.5 * p

    def q_of(lam: float) -> float:
        return lam**2 * A + lam * CH - lam**exp_lp * B

    lam_star = _bracket_and_bisect(q_of)
    projected = rescale(u, MASS_PRESERVING, lam_star, max_resample_error=1.0)
    return lam_star, projected


def project_K(u: Field, params: PhysicsParams, kernels: KernelSet) -> tuple[float, Field]:
    """Smallest lam0 > 0 with K_{b,omega}(lam0 u) = 0 (amplitude family).

    After dividing by lam^2 the equation is ``P2 + lam^2 (7 lambda2/4) H -
    lam^p B = 0`` with P2 collecting the quadratic terms.  The amplitude
    scaling is exact, so no interpolation is involved.
    """

    omega = params.require_omega()
    if omega <= 0.0:
        raise ScalingError("project_K requires omega > 0")
    if params.lambda1 != 0.0:
        raise ScalingError("project_K requires lambda1 = 0")
    if params.lambda2 < 0.0 or params.lambda3 <= 0.0:
        raise ScalingError("project_K requires lambda2 >= 0, lambda3 > 0")
    p = params.p
    t = measure_terms(u, kernels, p, include_hartree=params.lambda2 != 0.0)
    if t.mass == 0.0:
        raise ScalingError("cannot project the zero field")
    p2 = 2.5 * t.kinetic + 1.5 * omega * t.mass + 0.5 * params.b**2 * t.harmonic_partial
    h4 = 1.75 * params.lambda2 * t.hartree
    bq = params.lambda3 * (3.0 * p + 3.0) / (p + 2.0) * t.lp
    if bq <= 0.0:
        raise NoCrossingError("focusing term vanishes; K never crosses zero")

    def g_of(lam: float) -> float:
        return p2 + lam**2 * h4 - lam**p * bq

    lam0 = _bracket_and_bisect(g_of)
    return lam0, Field(u.grid, lam0 * u.values)


def apply_cutoff(u: Field, M: float) -> Field:
    """Multiply by the radial bump: 1 on [0, M], 0 beyond 2M, C^1 spline between."""

    if not (M > 0.0):
        raise ValueError(f"cutoff scale must be positive, got {M!r}")
    kernels = sc.make_kernels(u.grid)
    s = np.sqrt(kernels.radius_sq_grid) / M
    w = np.ones_like(s)
    mid = (s > 1.0) & (s < 2.0)
    sm = s[mid] - 1.0
    w[mid] = 1.0 - 3.0 * sm**2 + 2.0 * sm**3
    w[s >= 2.0] = 0.0
    return Field(u.grid, u.values * w)
