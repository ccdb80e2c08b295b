"""Scalar functionals of a field: energies, actions, and manifold functionals.

Every composite functional here is a fixed linear combination of six term
values (mass, kinetic, partial-harmonic moment, Coulomb attraction, Hartree
self-interaction, focusing p-term), so the module is organized around
:class:`TermValues` (measured once per field) and :class:`TermCoeffs`
(per-functional coefficient rows).  The same coefficient rows feed the
gradient operators in the solvers and the closed-form scaling expansions, so
all three agree by construction.

Sign and coefficient conventions::

    E_b = 1/2 kin + b^2/2 harm + l1/2 coul + l2/4 hart - l3/(p+2) lp
    S_{b,omega} = E_b + omega/2 mass
    Q_b  = kin - b^2 harm + l1/2 coul + l2/4 hart - 3 l3 p/(2(p+2)) lp
    K    = 5/2 kin + 3 omega/2 mass + b^2/2 harm + 2 l1 coul + 7 l2/4 hart
           - l3 (3p+3)/(p+2) lp
    I    = kin + omega mass + b^2 harm + l1 coul + l2 hart - l3 lp
    J    = 1/2 kin + 3 omega/2 mass + 5 b^2/2 harm + l1 coul + 5 l2/4 hart
           - 3 l3/(p+2) lp

with the untrapped variants (E, S_omega, Q) dropping the harmonic row.  The
tilde functionals subtract the scaling derivative that generates them:
tilde_S_omega = S_omega - 2/(3p) Q, tilde_E = E - 2/(3p) Q,
tilde_S_b_omega = S_b_omega - K/(3p+3).
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from . import _accel
from . import spectral_core as sc
from .spectral_core import Field, GridMismatchError, KernelSet

__all__ = [
    "PhysicsParams",
    "TermValues",
    "TermCoeffs",
    "FunctionalReport",
    "measure_terms",
    "assemble_report",
    "compute_report",
    "gn_ratio",
    "energy_coeffs",
    "action_coeffs",
    "q_coeffs",
    "k_coeffs",
    "i_coeffs",
    "j_coeffs",
    "tilde_action_coeffs",
    "tilde_energy_coeffs",
]


@dataclass(frozen=True)
class PhysicsParams:
    """Model coefficients; ``omega`` is optional (frequency of the standing wave)."""

    b: float
    lambda1: float
    lambda2: float
    lambda3: float
    p: float
    omega: float | None = None

    def __post_init__(self) -> None:
        for name in ("b", "lambda1", "lambda2", "lambda3", "p"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if not (0.0 < self.p < 4.0):
            raise ValueError(f"p in (0,4) violated: p={self.p}")
        if self.omega is not None and not np.isfinite(self.omega):
            raise ValueError(f"omega must be finite, got {self.omega!r}")

    def require_omega(self) -> float:
        if self.omega is None:
            raise ValueError("omega is required for this functional but is not set")
        return self.omega


@dataclass(frozen=True)
class TermValues:
    """The six measured quadrature terms of one field."""

    mass: float
    kinetic: float
    harmonic_partial: float
    coulomb: float
    hartree: float
    lp: float


@dataclass(frozen=True)
class TermCoeffs:
    """Coefficient row: functional value = sum(coeff * term)."""

    mass: float = 0.0
    kinetic: float = 0.0
    harmonic_partial: float = 0.0
    coulomb: float = 0.0
    hartree: float = 0.0
    lp: float = 0.0

    def apply(self, t: TermValues) -> float:
        return (
            self.mass * t.mass
            + self.kinetic * t.kinetic
            + self.harmonic_partial * t.harmonic_partial
            + self.coulomb * t.coulomb
            + self.hartree * t.hartree
            + self.lp * t.lp
        )

    def combine(self, other: "TermCoeffs", factor: float) -> "TermCoeffs":
        return TermCoeffs(
            mass=self.mass + factor * other.mass,
            kinetic=self.kinetic + factor * other.kinetic,
            harmonic_partial=self.harmonic_partial + factor * other.harmonic_partial,
            coulomb=self.coulomb + factor * other.coulomb,
            hartree=self.hartree + factor * other.hartree,
            lp=self.lp + factor * other.lp,
        )


def energy_coeffs(params: PhysicsParams, with_trap: bool = True) -> TermCoeffs:
    b2 = params.b**2 if with_trap else 0.0
    return TermCoeffs(
        kinetic=0.5,
        harmonic_partial=0.5 * b2,
        coulomb=0.5 * params.lambda1,
        hartree=0.25 * params.lambda2,
        lp=-params.lambda3 / (params.p + 2.0),
    )


def action_coeffs(params: PhysicsParams, with_trap: bool = True) -> TermCoeffs:
    omega = params.require_omega()
    return energy_coeffs(params, with_trap).combine(TermCoeffs(mass=1.0), 0.5 * omega)


def q_coeffs(params: PhysicsParams, with_trap: bool = True) -> TermCoeffs:
    b2 = params.b**2 if with_trap else 0.0
    p = params.p
    return TermCoeffs(
        kinetic=1.0,
        harmonic_partial=-b2,
        coulomb=0.5 * params.lambda1,
        hartree=0.25 * params.lambda2,
        lp=-3.0 * params.lambda3 * p / (2.0 * (p + 2.0)),
    )


def k_coeffs(params: PhysicsParams) -> TermCoeffs:
    omega = params.require_omega()
    p = params.p
    return TermCoeffs(
        kinetic=2.5,
        mass=1.5 * omega,
        harmonic_partial=0.5 * params.b**2,
        coulomb=2.0 * params.lambda1,
        hartree=1.75 * params.lambda2,
        lp=-params.lambda3 * (3.0 * p + 3.0) / (p + 2.0),
    )


def i_coeffs(params: PhysicsParams) -> TermCoeffs:
    omega = params.require_omega()
    return TermCoeffs(
        kinetic=1.0,
        mass=omega,
        harmonic_partial=params.b**2,
        coulomb=params.lambda1,
        hartree=params.lambda2,
        lp=-params.lambda3,
    )


def j_coeffs(params: PhysicsParams) -> TermCoeffs:
    omega = params.require_omega()
    return TermCoeffs(
        kinetic=0.5,
        mass=1.5 * omega,
        harmonic_partial=2.5 * params.b**2,
        coulomb=params.lambda1,
        hartree=1.25 * params.lambda2,
        lp=-3.0 * params.lambda3 / (params.p + 2.0),
    )


def tilde_action_coeffs(params: PhysicsParams, with_trap: bool = True) -> TermCoeffs:
    """The descent objectives: S_omega - 2/(3p) Q, resp. S_b_omega - K/(3p+3)."""

    p = params.p
    if with_trap:
        return action_coeffs(params, True).combine(k_coeffs(params), -1.0 / (3.0 * p + 3.0))
    return action_coeffs(params, False).combine(q_coeffs(params, False), -2.0 / (3.0 * p))


def tilde_energy_coeffs(params: PhysicsParams) -> TermCoeffs:
    p = params.p
    return energy_coeffs(params, False).combine(q_coeffs(params, False), -2.0 / (3.0 * p))


@dataclass(frozen=True)
class FunctionalReport:
    """All scalar functionals of one field under one parameter set.

    Composite fields requiring a frequency are ``None`` when ``omega`` was
    absent rather than silently assuming ``omega = 0``.
    """

    mass: float
    kinetic: float
    harmonic_partial: float
    coulomb: float
    hartree: float
    lp: float
    E: float
    E_b: float
    S_omega: float | None
    S_b_omega: float | None
    Q: float
    Q_b: float
    K_b_omega: float | None
    I_b_omega: float | None
    J_b_omega: float | None
    tilde_S_omega: float | None
    tilde_E: float
    tilde_S_b_omega: float | None
    x_norm_sq: float
    x_tilde_norm_sq: float

    def terms(self) -> TermValues:
        return TermValues(
            mass=self.mass,
            kinetic=self.kinetic,
            harmonic_partial=self.harmonic_partial,
            coulomb=self.coulomb,
            hartree=self.hartree,
            lp=self.lp,
        )

    def to_json_dict(self) -> dict[str, float]:
        """Flat dict with keys exactly matching field names; absent fields omitted."""

        out: dict[str, float] = {}
        for f in dataclass_fields(self):
            v = getattr(self, f.name)
            if v is not None:
                out[f.name] = float(v)
        return out


def measure_terms(u: Field, kernels: KernelSet, p: float, include_hartree: bool = True) -> TermValues:
    """Quadrature of the six terms; one fused reduction pass plus two FFTs."""

    if u.grid != kernels.grid:
        raise GridMismatchError("field and kernels live on different grids")
    h3 = u.grid.volume_element
    flat = u.values.ravel()
    if include_hartree:
        density = u.values.real**2 + u.values.imag**2
        hart_potential = sc.hartree_potential(density, kernels).ravel()
    else:
        hart_potential = np.zeros(flat.shape[0], dtype=np.float64)
    m, harm, coul, lp, hart, _j = _accel.weighted_sums(
        flat,
        kernels.harmonic_partial_grid.ravel(),
        kernels.coulomb_grid.ravel(),
        kernels.radius_sq_grid.ravel(),
        hart_potential,
        p,
    )
    kinetic = sc.gradient_norm_sq(u)
    return TermValues(
        mass=m * h3,
        kinetic=kinetic,
        harmonic_partial=harm * h3,
        coulomb=coul * h3,
        hartree=hart * h3,
        lp=lp * h3,
    )


def assemble_report(t: TermValues, params: PhysicsParams) -> FunctionalReport:
    """Pure algebra from term values; shared by fields and scaled expansions."""

    b2 = params.b**2
    E = energy_coeffs(params, False).apply(t)
    E_b = E + 0.5 * b2 * t.harmonic_partial
    Q = q_coeffs(params, False).apply(t)
    Q_b = Q - b2 * t.harmonic_partial
    tilde_E = E - 2.0 / (3.0 * params.p) * Q
    if params.omega is None:
        S_omega = S_b_omega = K = I = J = tS = tSb = None
    else:
        half_omega_m = 0.5 * params.omega * t.mass
        S_omega = E + half_omega_m
        S_b_omega = E_b + half_omega_m
        K = k_coeffs(params).apply(t)
        I = i_coeffs(params).apply(t)
        J = j_coeffs(params).apply(t)
        tS = S_omega - 2.0 / (3.0 * params.p) * Q
        tSb = S_b_omega - K / (3.0 * params.p + 3.0)
    return FunctionalReport(
        mass=t.mass,
        kinetic=t.kinetic,
        harmonic_partial=t.harmonic_partial,
        coulomb=t.coulomb,
        hartree=t.hartree,
        lp=t.lp,
        E=E,
        E_b=E_b,
        S_omega=S_omega,
        S_b_omega=S_b_omega,
        Q=Q,
        Q_b=Q_b,
        K_b_omega=K,
        I_b_omega=I,
        J_b_omega=J,
        tilde_S_omega=tS,
        tilde_E=tilde_E,
        tilde_S_b_omega=tSb,
        x_norm_sq=t.kinetic + t.mass + t.harmonic_partial,
        x_tilde_norm_sq=t.kinetic + b2 * t.harmonic_partial,
    )


def compute_report(u: Field, params: PhysicsParams, kernels: KernelSet) -> FunctionalReport:
    return assemble_report(measure_terms(u, kernels, params.p), params)


def gn_ratio(u: Field) -> float:
    """Dimensionless Gagliardo-Nirenberg ratio (3/10)|u|_{10/3}^{10/3} / (m^{2/3} kin / 2).

    Bounded by mass(R)^{-2/3} with equality at the classical soliton R.
    """

    m = sc.mass(u)
    if m == 0.0:
        raise ValueError("gn_ratio undefined for the zero field")
    kin = sc.gradient_norm_sq(u)
    if kin == 0.0:
        raise ValueError("gn_ratio undefined for constant fields (zero gradient)")
    lp = sc.lp_norm_pow(u, 10.0 / 3.0)
    return 0.3 * lp / (0.5 * m ** (2.0 / 3.0) * kin)
