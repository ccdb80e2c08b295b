"""Experiment harnesses: set classification, dichotomy runs, threshold
bisection, instability probes, monotonicity scans, and the confinement
eigenvalue cross-check.

Each harness composes the solver and evolver layers into one reported
verdict.  They are deliberately strict: a run that contradicts the
expected qualitative behavior raises instead of returning a polished
report, because these routines exist to certify properties, not to
summarize whatever happened.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import spectral_core as sc
from .dynamics import EvolveConfig, EvolutionTrace, evolve
from .functionals import PhysicsParams, compute_report, measure_terms
from .ground_states import GroundStateResult, SolveConfig, solve_gamma_c, solve_m_c
from .scalings import (
    MASS_PRESERVING,
    NoCrossingError,
    ScalingKind,
    apply_cutoff,
    rescale,
    scale_terms,
)
from .spectral_core import Field, GridSpec, KernelSet

__all__ = [
    "Classification",
    "ExperimentError",
    "BracketError",
    "MembershipError",
    "InvarianceError",
    "classify",
    "dichotomy_run",
    "gradient_bound",
    "key_estimate_margins",
    "mass_threshold_bisect",
    "instability_probe",
    "cross_manifold_search",
    "scan_monotonic",
    "lambda0_check",
    "emit_report",
]

DEAD_BAND = 1e-8


class ExperimentError(RuntimeError):
    """An experiment could not certify its property."""


class BracketError(ExperimentError):
    """Bisection endpoints gave the same qualitative outcome."""


class MembershipError(ExperimentError):
    """A constructed datum failed its set-membership precondition."""

    def __init__(self, msg: str, diagnostics: dict | None = None) -> None:
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class InvarianceError(ExperimentError):
    """Set membership changed along a flow where it must be invariant."""

    def __init__(self, msg: str, report: dict | None = None) -> None:
        super().__init__(msg)
        self.report = report or {}


@dataclass(frozen=True)
class Classification:
    """Invariant-set membership of one field at one parameter point.

    ``q_value`` and ``s_value`` are Q and S_omega for the untrapped
    problem, Q_b and S_{b,omega} when b != 0; ``k_value`` is always
    K_{b,omega}.  ``reference_action`` is the action of the ground state
    the sets are built around.
    """

    set_tag: str
    s_value: float
    q_value: float
    k_value: float
    reference_action: float


def _tag_from_values(
    q: float, s: float, k: float, ref: float, kinetic: float, trapped: bool
) -> str:
    q_band = DEAD_BAND * max(kinetic, 1e-300)
    s_band = DEAD_BAND * max(abs(ref), 1.0)
    below = s < ref - s_band
    if trapped:
        k_band = DEAD_BAND * max(kinetic, 1e-300)
        if abs(q) < q_band:
            return "N_cross" if k < -k_band else "neither"
        if below and k < -k_band and q < 0.0:
            return "K_omega_set"
        return "neither"
    if abs(q) < q_band or abs(s - ref) < s_band:
        return "neither"
    if below and q > 0.0:
        return "A_omega"
    if below and q < 0.0:
        return "B_omega"
    return "neither"


def _check_gs(params: PhysicsParams, gs: GroundStateResult) -> None:
    if not gs.converged:
        raise ExperimentError("reference ground state is not converged")
    stored = gs.diagnostics.get("params")
    if stored is None:
        return
    same = (
        stored.b == params.b
        and stored.lambda1 == params.lambda1
        and stored.lambda2 == params.lambda2
        and stored.lambda3 == params.lambda3
        and stored.p == params.p
    )
    if stored.omega is not None and params.omega is not None:
        same = same and stored.omega == params.omega
    if not same:
        raise ExperimentError(
            f"parameter mismatch: ground state solved at {stored}, classifying at {params}"
        )


def _reference_action(params: PhysicsParams, gs: GroundStateResult) -> float:
    ref = gs.report.S_b_omega if params.b != 0.0 else gs.report.S_omega
    if ref is None:
        raise ExperimentError("ground-state report lacks the frequency-dependent action")
    return ref


def classify(
    v: Field, params: PhysicsParams, gs: GroundStateResult, kernels: KernelSet
) -> Classification:
    """Assign the invariant-set tag of ``v`` relative to the ground state.

    Membership is decided by strict inequalities with a relative dead-band
    of 1e-8 (on the kinetic scale for Q/K, on the reference action for S);
    values inside the band are boundary cases and tag as ``neither``.
    """

    params.require_omega()
    _check_gs(params, gs)
    if v.grid != kernels.grid or gs.field.grid != kernels.grid:
        raise sc.GridMismatchError("field, ground state, and kernels must share a grid")
    rep = compute_report(v, params, kernels)
    ref = _reference_action(params, gs)
    trapped = params.b != 0.0
    s = rep.S_b_omega if trapped else rep.S_omega
    q = rep.Q_b if trapped else rep.Q
    tag = _tag_from_values(q, s, rep.K_b_omega, ref, rep.kinetic, trapped)
    return Classification(
        set_tag=tag, s_value=s, q_value=q, k_value=rep.K_b_omega, reference_action=ref
    )


# ---------------------------------------------------------------------------
# dichotomy runs
# ---------------------------------------------------------------------------


def _sample_tags(
    trace: EvolutionTrace, params: PhysicsParams, ref: float
) -> list[tuple[float, str, float, float]]:
    """Per-sample (t, tag, q, s) recovered from trace columns (b = 0 sets).

    S_omega of a sample is energy_b + (omega/2) mass and the trace's q_b
    column reduces to Q when b = 0, so membership needs no stored fields.
    """

    omega = params.require_omega()
    out = []
    for i in range(len(trace)):
        s = trace.energy_b[i] + 0.5 * omega * trace.mass[i]
        q = trace.q_b[i]
        kin = trace.grad_norm[i] ** 2
        tag = _tag_from_values(q, s, 0.0, ref, kin, trapped=False)
        out.append((float(trace.times[i]), tag, float(q), float(s)))
    return out


def key_estimate_margins(
    trace: EvolutionTrace, params: PhysicsParams, s0: float, ref: float
) -> np.ndarray:
    """Per-sample slack in Q_b(psi(t)) <= 2 (S(psi0) - S(u)); negative is good.

    Works for both the untrapped sets (Q, S_omega) and the trapped K-set
    runs (Q_b, S_{b,omega}): the trace's q_b column is already the right
    functional in each case.
    """

    params.require_omega()
    gap = 2.0 * (s0 - ref)
    return np.asarray(trace.q_b) - gap


def dichotomy_run(
    v: Field,
    params: PhysicsParams,
    gs: GroundStateResult,
    cfg: EvolveConfig,
    kernels: KernelSet | None = None,
) -> tuple[Classification, EvolutionTrace]:
    """Evolve ``v`` and certify that its invariant set is preserved.

    A_omega data must run to completion, B_omega data must end in
    ``blowup_detected``, and every monitored sample must carry the initial
    tag; B_omega samples must additionally satisfy the action-gap bound
    Q <= 2 (S(psi0) - S(u)).  A violated sample triggers one re-run at
    dt/2: if the violation persists it is a genuine contradiction and
    raises; if it disappears, the finer run is returned (the violation was
    time-discretization drift).
    """

    kernels = kernels or sc.make_kernels(v.grid)
    cls = classify(v, params, gs, kernels)
    if cls.set_tag in ("N_cross", "K_omega_set"):
        raise ExperimentError(
            f"dichotomy runs cover the untrapped sets; datum classified {cls.set_tag}"
        )

    def run_once(run_cfg: EvolveConfig) -> tuple[EvolutionTrace, dict | None]:
        _, trace = evolve(v, params, run_cfg, kernels)
        failure = _dichotomy_violation(trace, params, cls)
        return trace, failure

    trace, failure = run_once(cfg)
    if failure is not None:
        halved = replace(cfg, dt_init=0.5 * cfg.dt_init, dt_min=min(cfg.dt_min, 0.5 * cfg.dt_init))
        trace2, failure2 = run_once(halved)
        if failure2 is not None:
            failure2["persists_at_half_dt"] = True
            raise InvarianceError(
                f"set membership violated at t={failure2['t']:.6g} "
                f"({failure2['kind']}) and persists at dt/2",
                report=failure2,
            )
        trace = trace2
    _check_end_status(trace, cls)
    return cls, trace


def _dichotomy_violation(
    trace: EvolutionTrace, params: PhysicsParams, cls: Classification
) -> dict | None:
    tags = _sample_tags(trace, params, cls.reference_action)
    gap = 2.0 * (cls.s_value - cls.reference_action)
    for i, (t, tag, q, s) in enumerate(tags):
        if tag != cls.set_tag:
            return {"t": t, "kind": f"tag {cls.set_tag} -> {tag}", "q": q, "s": s}
        if cls.set_tag == "B_omega":
            slack = 1e-6 * max(abs(gap), 1.0)
            if q > gap + slack:
                return {"t": t, "kind": "action-gap bound Q <= 2(S0 - Sref)", "q": q, "s": s}
    return None


def _check_end_status(trace: EvolutionTrace, cls: Classification) -> None:
    if cls.set_tag == "A_omega" and trace.status != "completed":
        raise ExperimentError(
            f"A_omega datum must exist globally on the run window; got {trace.status}"
        )
    if cls.set_tag == "B_omega" and trace.status != "blowup_detected":
        raise ExperimentError(f"B_omega datum must blow up; run ended {trace.status}")


def gradient_bound(params: PhysicsParams, s0: float) -> float:
    """A-priori gradient-norm bound sqrt(6p/(3p-4) S_omega(psi0)) for A_omega data."""

    p = params.p
    if p <= 4.0 / 3.0:
        raise ValueError("the gradient bound needs p > 4/3")
    return math.sqrt(6.0 * p / (3.0 * p - 4.0) * s0)


# ---------------------------------------------------------------------------
# mass threshold
# ---------------------------------------------------------------------------


def mass_threshold_bisect(
    family_seed: Field,
    params: PhysicsParams,
    cfg: EvolveConfig,
    mass_lo: float,
    mass_hi: float,
    kernels: KernelSet | None = None,
    rel_width: float = 0.02,
    max_bisections: int = 24,
    log: Callable[[str], None] | None = None,
) -> float:
    """Bisect the mass separating global runs from blow-up at p = 4/3.

    The family is the seed rescaled to prescribed mass; blow-up means the
    run ends ``blowup_detected`` or ``dt_underflow`` (a collapse that the
    step-size monitor kills before the gradient trigger fires is still a
    collapse).  Returns the midpoint of the final bracket.
    """

    if abs(params.p - 4.0 / 3.0) > 1e-12:
        raise ValueError("the mass threshold experiment requires p = 4/3")
    if not 0.0 < mass_lo < mass_hi:
        raise ValueError("need 0 < mass_lo < mass_hi")
    kernels = kernels or sc.make_kernels(family_seed.grid)
    m_seed = sc.mass(family_seed)
    if m_seed <= 0.0:
        raise ValueError("family seed has zero mass")

    def outcome(m: float) -> bool:
        """True when the run at mass m blows up."""
        psi0 = Field(family_seed.grid, family_seed.values * math.sqrt(m / m_seed))
        _, trace = evolve(psi0, params, cfg, kernels)
        if log is not None:
            log(f"mass {m:.6f}: {trace.status} (t last {trace.times[-1]:.3f})")
        if trace.status == "completed":
            return False
        return True

    lo_blows = outcome(mass_lo)
    hi_blows = outcome(mass_hi)
    if lo_blows or not hi_blows:
        raise BracketError(
            f"bracket [{mass_lo}, {mass_hi}] does not straddle the threshold: "
            f"low endpoint {'blows up' if lo_blows else 'is global'}, "
            f"high endpoint {'blows up' if hi_blows else 'is global'}"
        )
    lo, hi = mass_lo, mass_hi
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        if (hi - lo) <= rel_width * mid:
            break
        if outcome(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# instability probes
# ---------------------------------------------------------------------------


def _h1_distance(a: Field, b: Field) -> float:
    diff = Field(a.grid, a.values - b.values)
    return math.sqrt(sc.mass(diff) + sc.gradient_norm_sq(diff))


def _probe_datum(
    gs: GroundStateResult, params: PhysicsParams, lam: float, M: float
) -> Field:
    if params.b == 0.0:
        return apply_cutoff(rescale(gs.field, MASS_PRESERVING, lam), M)
    if params.p >= 2.0:
        return Field(gs.field.grid, lam * gs.field.values)
    kind = ScalingKind.p_scaling(params.p)
    return rescale(gs.field, kind, lam)


def instability_probe(
    gs: GroundStateResult,
    params: PhysicsParams,
    cfg: EvolveConfig,
    lambdas: Sequence[float],
    M: float,
    kernels: KernelSet | None = None,
) -> dict:
    """Drive a sequence of near-ground-state data into blow-up.

    For b = 0 the data are cutoff mass-preserving rescalings of the ground
    state (the cutoff supplies the finite variance the virial argument
    needs); each must classify as B_omega.  For b != 0 the data are
    amplitude rescalings (p >= 2) or the mu^(2/p) dilation family (p < 2),
    and must land in the K_omega set.  The report lists, per lambda, the
    H1 distance to the ground state, the termination status, and the
    blow-up time estimate; for b != 0 it also carries the empirical
    alpha(omega) estimate from the cross-manifold search, reported next to
    the ground-state action without asserting an inequality.
    """

    lams = list(lambdas)
    if not lams or any(l <= 1.0 for l in lams):
        raise ValueError("lambdas must all exceed 1")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambdas must decrease toward 1")
    kernels = kernels or sc.make_kernels(gs.field.grid)
    trapped = params.b != 0.0
    want = "K_omega_set" if trapped else "B_omega"
    rows = []
    for lam in lams:
        datum = _probe_datum(gs, params, lam, M)
        cls = classify(datum, params, gs, kernels)
        if cls.set_tag != want:
            raise MembershipError(
                f"datum at lambda={lam:g} classified {cls.set_tag}, needs {want}",
                diagnostics={
                    "lambda": lam,
                    "s_value": cls.s_value,
                    "q_value": cls.q_value,
                    "k_value": cls.k_value,
                    "reference_action": cls.reference_action,
                },
            )
        _, trace = evolve(datum, params, cfg, kernels)
        blew = trace.status in ("blowup_detected", "dt_underflow")
        rows.append(
            {
                "lambda": lam,
                "h1_distance": _h1_distance(datum, gs.field),
                "status": trace.status,
                "blowup_time": float(trace.times[-1]) if blew else None,
                "q_value": cls.q_value,
                "k_value": cls.k_value,
                "s_value": cls.s_value,
            }
        )
    dists = [row["h1_distance"] for row in rows]
    report = {
        "set": want,
        "rows": rows,
        "all_blow_up": all(r["status"] in ("blowup_detected", "dt_underflow") for r in rows),
        "h1_monotone_decreasing": all(b < a for a, b in zip(dists, dists[1:])),
        "reference_action": _reference_action(params, gs),
    }
    if trapped:
        points = cross_manifold_search(gs, params, kernels)
        if points:
            report["alpha_omega_estimate"] = min(c.s_value for _, c in points)
            report["n_points_found"] = len(points)
    return report


def cross_manifold_search(
    gs: GroundStateResult,
    params: PhysicsParams,
    kernels: KernelSet | None = None,
    amplitudes: Sequence[float] = (1.05, 1.1, 1.2),
) -> list[tuple[Field, Classification]]:
    """Find fields with Q_b = 0 and K_{b,omega} < 0 near a trapped ground state.

    Two-parameter family: an amplitude factor pushes K negative, then a
    mass-preserving dilation restores Q_b = 0.  The dilation parameter is
    bracketed on the closed-form term expansion and then corrected by a
    few secant steps on the actual resampled field, so the returned points
    satisfy |Q_b| < 1e-6 kinetic on the grid, not just in term arithmetic.
    """

    kernels = kernels or sc.make_kernels(gs.field.grid)
    params.require_omega()
    need_hart = params.lambda2 != 0.0
    found: list[tuple[Field, Classification]] = []
    for amp in amplitudes:
        base = Field(gs.field.grid, amp * gs.field.values)
        t0 = measure_terms(base, kernels, params.p, include_hartree=need_hart)

        def q_terms(lam: float) -> float:
            t = scale_terms(t0, MASS_PRESERVING, lam, params.p)
            return (
                t.kinetic
                - params.b**2 * t.harmonic_partial
                + 0.5 * params.lambda1 * t.coulomb
                + 0.25 * params.lambda2 * t.hartree
                - 1.5 * params.lambda3 * params.p / (params.p + 2.0) * t.lp
            )

        def q_actual(lam: float) -> float:
            w = rescale(base, MASS_PRESERVING, lam)
            rep = compute_report(w, params, kernels)
            return rep.Q_b

        try:
            lam = _bisect_on(q_terms, 0.3, 3.0)
        except NoCrossingError:
            continue
        # secant cleanup on the resampled field (each step re-interpolates
        # from the undialted base, so errors do not compound)
        l0, l1 = lam, lam * 1.01
        f0, f1 = q_actual(l0), q_actual(l1)
        for _ in range(12):
            if f1 == f0:
                break
            l2 = l1 - f1 * (l1 - l0) / (f1 - f0)
            if not (0.1 < l2 < 10.0):
                break
            l0, f0, l1 = l1, f1, l2
            f1 = q_actual(l1)
            if abs(f1) < 1e-8 * t0.kinetic:
                break
        w = rescale(base, MASS_PRESERVING, l1)
        rep = compute_report(w, params, kernels)
        if abs(rep.Q_b) < 1e-6 * rep.kinetic and rep.K_b_omega < 0.0:
            cls = Classification(
                set_tag="N_cross",
                s_value=rep.S_b_omega,
                q_value=rep.Q_b,
                k_value=rep.K_b_omega,
                reference_action=_reference_action(params, gs),
            )
            found.append((w, cls))
    return found


def _bisect_on(f: Callable[[float], float], lo: float, hi: float, iters: int = 80) -> float:
    flo, fhi = f(lo), f(hi)
    if (flo > 0.0) == (fhi > 0.0):
        raise NoCrossingError(f"no sign change of Q on [{lo}, {hi}]")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# monotonicity scans
# ---------------------------------------------------------------------------


def scan_monotonic(
    problem: str,
    params: PhysicsParams,
    c_values: Sequence[float],
    grid: GridSpec,
    seed: Field,
    cfg: SolveConfig | None = None,
    slack: float = 1e-5,
) -> dict:
    """Solve a c-indexed family and check its monotonicity/subadditivity.

    ``gamma_c`` checks that the value sequence is non-increasing in c;
    ``m_c`` checks strict subadditivity m(c) < m(c - mu) + m(mu) on every
    (c, mu) pair whose three masses all lie on the c-grid.  Each solve is
    re-seeded from the previous minimizer.  Non-convergent points leave
    gaps (value None) and the verdicts are computed on what remains.
    """

    if problem not in ("gamma_c", "m_c"):
        raise ValueError(f"unknown scan problem {problem!r}")
    cs = list(c_values)
    if sorted(cs) != cs:
        raise ValueError("c_values must be sorted ascending")
    solver = solve_gamma_c if problem == "gamma_c" else solve_m_c
    values: list[float | None] = []
    results: list[GroundStateResult | None] = []
    current_seed = seed
    for c in cs:
        try:
            res = solver(params, c, grid, current_seed, cfg)
        except (ValueError, RuntimeError):
            values.append(None)
            results.append(None)
            continue
        if res.converged:
            values.append(res.value)
            current_seed = res.field
        else:
            values.append(None)
        results.append(res)
    report: dict = {"problem": problem, "c_values": cs, "values": values}
    report["gaps"] = [c for c, v in zip(cs, values) if v is None]
    if problem == "gamma_c":
        ok = True
        for (c1, v1), (c2, v2) in zip(zip(cs, values), zip(cs[1:], values[1:])):
            if v1 is None or v2 is None:
                continue
            if v2 > v1 + slack * max(1.0, abs(v1)):
                ok = False
        report["non_increasing"] = ok
    else:
        pairs = []
        ok = True
        by_c = {c: v for c, v in zip(cs, values) if v is not None}
        eps = 1e-9
        for c in by_c:
            for mu in by_c:
                rest = c - mu
                if mu >= c - eps:
                    continue
                match = [cc for cc in by_c if abs(cc - rest) < eps * max(1.0, c)]
                if not match:
                    continue
                lhs = by_c[c]
                rhs = by_c[match[0]] + by_c[mu]
                strict = lhs < rhs - slack * max(1.0, abs(rhs))
                pairs.append({"c": c, "mu": mu, "m_c": lhs, "m_sum": rhs, "strict": strict})
                ok = ok and strict
        report["pairs"] = pairs
        report["strictly_subadditive"] = ok and bool(pairs)
    return report


# ---------------------------------------------------------------------------
# confinement eigenvalue check
# ---------------------------------------------------------------------------


def _imag_time_ground(
    potential: np.ndarray,
    lap_mult: np.ndarray,
    volume_element: float,
    seed: np.ndarray,
    tau: float = 0.05,
    tol: float = 1e-11,
    max_iters: int = 20000,
) -> float:
    """Ground eigenvalue of -Lap + potential by split-step imaginary time.

    Works for any dimension; ``lap_mult`` is the spectral multiplier of
    the Laplacian (negative semidefinite) on the same array shape.
    """

    import scipy.fft

    psi = seed / math.sqrt(float(np.sum(np.abs(seed) ** 2)) * volume_element)
    half_v = np.exp(-0.5 * tau * potential)
    kin = np.exp(tau * lap_mult)
    lam_prev = math.inf
    for it in range(max_iters):
        psi = half_v * psi
        psi = scipy.fft.ifftn(kin * scipy.fft.fftn(psi))
        psi = half_v * psi
        nrm = math.sqrt(float(np.sum(np.abs(psi) ** 2)) * volume_element)
        psi = psi / nrm
        if it % 10 == 9:
            ph = scipy.fft.fftn(psi)
            kin_val = float(np.sum(-lap_mult * (ph.real**2 + ph.imag**2))) / ph.size
            kin_val *= volume_element
            pot_val = float(np.sum(potential * np.abs(psi) ** 2)) * volume_element
            lam = kin_val + pot_val
            if abs(lam - lam_prev) < tol * max(1.0, abs(lam)):
                return lam
            lam_prev = lam
    raise ExperimentError(
        f"imaginary-time iteration did not settle within {max_iters} steps "
        f"(last eigenvalue {lam_prev:.12g})"
    )


def lambda0_check(b: float, grid: GridSpec) -> tuple[float, float]:
    """Ground eigenvalue of the partial confinement, 3D versus 2D.

    Returns (lambda_big, lambda_small): the 3D variational eigenvalue of
    -Lap + b^2(x1^2 + x2^2) (minimized over profiles free in x3) and the
    2D eigenvalue of the same transverse operator.  Both should land on
    2b; the 3D iteration is seeded with an x3-modulated profile and must
    flatten it.
    """

    if b == 0.0:
        raise ValueError("the confinement check needs b != 0")
    x = grid.axis_coords()
    k = grid.wavenumbers()
    # 2D transverse problem
    pot2 = b * b * (x[:, None] ** 2 + x[None, :] ** 2)
    lap2 = -(k[:, None] ** 2 + k[None, :] ** 2)
    seed2 = np.exp(-0.5 * abs(b) * (x[:, None] ** 2 + x[None, :] ** 2)) * (
        1.0 + 0.1 * np.cos(x[:, None])
    )
    lam_small = _imag_time_ground(pot2, lap2, grid.spacing**2, seed2.astype(np.complex128))
    # 3D problem with x3 unconfined
    pot3 = b * b * (x[:, None, None] ** 2 + x[None, :, None] ** 2)
    lap3 = -(
        k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    )
    seed3 = np.exp(
        -0.5 * abs(b) * (x[:, None, None] ** 2 + x[None, :, None] ** 2)
        - 0.05 * x[None, None, :] ** 2
    ) * (1.0 + 0.05 * np.cos(2.0 * x[None, None, :]))
    lam_big = _imag_time_ground(
        pot3, lap3, grid.volume_element, seed3.astype(np.complex128)
    )
    return lam_big, lam_small


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def emit_report(
    report: dict,
    out_root: str | Path,
    experiment: str,
    traces: dict[str, EvolutionTrace] | None = None,
) -> Path:
    """Write a JSON report (and any traces as CSV) into a stamped run directory."""

    stamp = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(out_root) / f"{experiment}-{stamp}"
    run_dir.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    for name, trace in (traces or {}).items():
        trace.write_csv(run_dir / f"{name}.csv")
    return run_dir


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
