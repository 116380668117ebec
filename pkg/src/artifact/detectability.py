"""A-priori mode-distinguishability checks.

Two complementary routes decide whether wrong hypotheses can be expected
to die:

* a quantitative route needing global state/output magnitude bounds:
  a stacked difference matrix of the two hypotheses' free channels must
  have a smallest nontrivial singular value exceeding a threshold built
  from both modes' asymptotic residual bounds;
* a structural route under a persistent-excitation assumption that the
  unknown input carries unlimited energy: pairwise distinct free-channel
  rotations, an origin Jacobian inside the unit ball, and bounded
  curvature.  This route is conditional: the excitation assumption is
  recorded, never verified from data.

The asymptotic residual bound itself is obtained numerically by
iterating the per-step triangle bound to relative stagnation; the
closed-form limit pieces are reported alongside for inspection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .decomposition import ModeDecomposition
from .errors import SigmaMinUndefinedError
from .gains import ObserverGains
from .observer import radius_sequence
from .residuals import build_coefficients
from .system import SwitchedSystem, jacobian_hessian_data

T2_DISTINCT_TOL = 1e-9


@dataclass(frozen=True)
class SteadyTriReport:
    """Limit behavior of one mode's triangle threshold sequence."""

    mode: int
    converged: bool
    value: float
    iterations: int
    r_const: float
    o_const: float
    s_const: float
    analytic_limit: float


def steady_tri(
    mode_index: int,
    gains: ObserverGains,
    dec: ModeDecomposition,
    delta0: float,
    rel_tol: float = 1e-8,
    k_cap: int = 2000,
) -> SteadyTriReport:
    """Iterate the triangle bound until relative stagnation or blow-up."""
    coeffs = build_coefficients(gains, dec, k_cap)
    seq = radius_sequence(gains, delta0, k_cap)
    lf = gains.lipschitz
    j_terms = (
        (gains.eta_v / math.sqrt(2.0)) * (coeffs.j_v_norms + coeffs.j_v_next_norms)
        + gains.eta_w * coeffs.j_w_norms
    )
    j_cum = np.cumsum(j_terms)

    converged = False
    value = math.inf
    prev = None
    iterations = 0
    for k in range(1, k_cap + 1):
        tri = (
            lf * float(np.dot(coeffs.f_norms[: k - 1], seq[k - 1 : 0 : -1]))
            + float(j_cum[k - 1])
            + (coeffs.a_norms[k - 1] + lf * coeffs.f_norms[k - 1]) * delta0
        )
        iterations = k
        if not math.isfinite(tri) or tri > 1e100:
            break
        if prev is not None and abs(tri - prev) <= rel_tol * max(abs(tri), 1e-300):
            converged = True
            value = tri
            break
        prev = tri
    if not converged:
        # no stagnation within the cap: any finite number would be an
        # unsound limit claim
        value = math.inf

    # closed-form limit pieces, reported for inspection (theta here is the
    # bare measurement contraction driving the coefficient decay); the
    # drift-times-noise image blocks are slices of the stacked noise maps
    n = gains.phi.shape[0]
    l = dec.t1.shape[1]
    phi_w = gains.r_mat[:, l : l + n]
    c2_phi_w = gains.y_cal[:, l : l + n]
    c2phi = dec.c2 @ gains.phi
    g1m1t1 = dec.g1 @ gains.m1 @ dec.t1
    g2m2t2 = dec.g2 @ gains.m2 @ dec.t2
    c2phig1m1c1 = c2phi @ dec.g1 @ gains.m1 @ dec.c1
    r_const = (
        lf
        * linalg.spectral_norm(c2phig1m1c1)
        * linalg.spectral_norm(gains.psi)
        * linalg.spectral_norm(gains.phi)
    )
    o_const = gains.eta_w * (
        linalg.spectral_norm(c2phi @ g1m1t1)
        + linalg.spectral_norm(
            (np.eye(dec.z2_dim) - dec.c2 @ dec.g2 @ gains.m2) @ dec.t2
        )
    ) + gains.eta_v * linalg.spectral_norm(c2_phi_w)
    s_const = gains.eta_w * linalg.spectral_norm(c2phig1m1c1) * (
        linalg.spectral_norm(gains.phi @ g1m1t1) + linalg.spectral_norm(g2m2t2)
    ) + gains.eta_v * linalg.spectral_norm(phi_w)
    theta = gains.meas_contraction
    if theta < 1.0:
        analytic = (
            r_const * gains.eta_bar / (1.0 - theta) ** 2
            + o_const
            + s_const * theta / (1.0 - theta)
        )
    else:
        analytic = math.inf
    return SteadyTriReport(
        mode=mode_index,
        converged=converged,
        value=value,
        iterations=iterations,
        r_const=r_const,
        o_const=o_const,
        s_const=s_const,
        analytic_limit=analytic,
    )


@dataclass(frozen=True)
class PairReport:
    """Quantitative separation verdict for one ordered mode pair."""

    q: int
    q_other: int
    applicable: bool
    passed: bool
    sigma_min_w: float
    required: float
    r_z: float
    reason: str = ""


def check_condition_i(
    system: SwitchedSystem,
    decs: list[ModeDecomposition],
    steady: list[SteadyTriReport],
) -> list[PairReport]:
    """Quantitative pairwise check; needs global r_x / r_y bounds."""
    count = system.mode_count
    reports: list[PairReport] = []
    missing = system.r_x is None or system.r_y is None
    for q in range(count):
        for qp in range(q + 1, count):
            if missing:
                reports.append(
                    PairReport(
                        q=q,
                        q_other=qp,
                        applicable=False,
                        passed=False,
                        sigma_min_w=math.nan,
                        required=math.nan,
                        r_z=math.nan,
                        reason="r_x / r_y magnitude bounds not configured",
                    )
                )
                continue
            da, db = decs[q], decs[qp]
            if da.p_h != db.p_h:
                reports.append(
                    PairReport(
                        q=q,
                        q_other=qp,
                        applicable=False,
                        passed=False,
                        sigma_min_w=math.nan,
                        required=math.nan,
                        r_z=math.nan,
                        reason="feedthrough ranks differ; stacked blocks do not conform",
                    )
                )
                continue
            r = da.z2_dim
            stacked = np.hstack(
                [
                    da.c2 - db.c2,
                    da.t2 - db.t2,
                    -np.eye(r),
                    np.eye(r),
                    da.d2,
                    -db.d2,
                ]
            )
            try:
                sig = linalg.sigma_min(stacked)
            except SigmaMinUndefinedError:
                sig = 0.0
            r_z = float(system.r_y) * linalg.spectral_norm(da.t2 - db.t2)
            eta_v = min(system.eta_v[q], system.eta_v[qp])
            denom = math.sqrt(float(system.r_x) ** 2 + eta_v**2)
            required = (steady[q].value + steady[qp].value + r_z) / denom
            passed = math.isfinite(required) and sig > required
            reason = "" if math.isfinite(required) else "a threshold sequence diverges"
            reports.append(
                PairReport(
                    q=q,
                    q_other=qp,
                    applicable=True,
                    passed=passed,
                    sigma_min_w=sig,
                    required=required,
                    r_z=r_z,
                    reason=reason,
                )
            )
    return reports


@dataclass(frozen=True)
class StructureReport:
    """Structural route: rotation distinctness plus drift regularity."""

    t2_distinct_pairs: tuple[tuple[int, int, bool], ...]
    jacobian_norms: tuple[float, ...]
    hessian_bounds: tuple[float, ...]
    requires_unlimited_energy: bool
    passed: bool


def check_condition_ii(
    system: SwitchedSystem, decs: list[ModeDecomposition]
) -> StructureReport:
    count = system.mode_count
    pairs: list[tuple[int, int, bool]] = []
    for q in range(count):
        for qp in range(q + 1, count):
            ta, tb = decs[q].t2, decs[qp].t2
            if ta.shape != tb.shape:
                distinct = True
            else:
                distinct = linalg.spectral_norm(ta - tb) > T2_DISTINCT_TOL
            pairs.append((q, qp, distinct))
    jac_norms = []
    hess = []
    for mode in system.modes:
        j0, hb = jacobian_hessian_data(mode.field)
        jac_norms.append(linalg.spectral_norm(j0))
        hess.append(hb)
    passed = (
        all(d for _, _, d in pairs)
        and all(jn < 1.0 for jn in jac_norms)
        and all(math.isfinite(hb) for hb in hess)
    )
    return StructureReport(
        t2_distinct_pairs=tuple(pairs),
        jacobian_norms=tuple(jac_norms),
        hessian_bounds=tuple(hess),
        requires_unlimited_energy=True,
        passed=passed,
    )


def pairwise_separation(
    free_output_q: np.ndarray,
    free_output_other: np.ndarray,
    threshold_q: float,
    threshold_other: float,
    r_z: float,
) -> bool:
    """Runtime diagnostic: are two hypotheses' predicted free-channel
    outputs too far apart for both to survive this step?"""
    gap = float(np.linalg.norm(free_output_q - free_output_other))
    return gap > threshold_q + threshold_other + r_z


@dataclass(frozen=True)
class DetectabilityReport:
    steady: tuple[SteadyTriReport, ...]
    condition_i: tuple[PairReport, ...]
    condition_ii: StructureReport
    overall: str  # "pass" | "conditional" | "fail"


def report_detectability(
    system: SwitchedSystem,
    decs: list[ModeDecomposition],
    gains_list: list[ObserverGains],
    k_cap: int = 2000,
) -> DetectabilityReport:
    steady = [
        steady_tri(q, gains_list[q], decs[q], system.delta_x0, k_cap=k_cap)
        for q in range(system.mode_count)
    ]
    cond_i = check_condition_i(system, decs, steady)
    cond_ii = check_condition_ii(system, decs)
    if cond_i and all(r.applicable and r.passed for r in cond_i):
        overall = "pass"
    elif not cond_i:
        overall = "pass"  # a single hypothesis has nothing to confuse
    elif cond_ii.passed:
        overall = "conditional"
    else:
        overall = "fail"
    return DetectabilityReport(
        steady=tuple(steady),
        condition_i=tuple(cond_i),
        condition_ii=cond_ii,
        overall=overall,
    )
