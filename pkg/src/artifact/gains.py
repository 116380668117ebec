"""Observer gain synthesis and the fixed-gain error-dynamics constants.

For one mode (after the feedthrough decomposition) the observer uses
three gains: m1 inverts the singular block of the feedthrough channel,
m2 recovers the state-coupled input component from the feedthrough-free
channel, and l_gain is the measurement-update gain.  Everything the
threshold and containment machinery needs later is precomputed here:
the interconnection matrices (phi, psi, e), the stacked noise-to-error
maps (r_mat, q_mat, w_cal, y_cal), and the scalar contraction/offset
constants of the per-step radius recursion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .decomposition import ModeDecomposition
from .errors import ConfigurationError, SynthesisError
from .system import ModeModel

RT2 = float(np.sqrt(2.0))


def check_rank_condition(dec: ModeDecomposition) -> bool:
    """True when the state-coupled input component is recoverable:
    rank(c2 @ g2) must equal the number of d2 components."""
    needed = dec.g2.shape[1]
    return linalg.rank(dec.c2 @ dec.g2) == needed


def heuristic_gain(dec: ModeDecomposition, phi: np.ndarray) -> np.ndarray:
    """Default measurement-update gain phi @ pinv(c2 @ phi).

    Among all gains L this minimizes ||(I - L c2) phi|| in the Frobenius
    norm (it implements the orthogonal projection of phi's columns onto
    the nullspace-complement of c2 phi), and it zeroes the correction
    interconnection entirely whenever c2 @ phi has full column rank.
    """
    return phi @ linalg.pinv(dec.c2 @ phi)


@dataclass(frozen=True)
class ObserverGains:
    """Gains plus derived error-dynamics data for one mode.

    theta/eta_bar drive the state radius recursion
    delta_k = theta * delta_{k-1} + eta_bar, and beta/alpha_bar the
    lagged input radius delta_d_{k-1} = beta * delta_{k-1} + alpha_bar.
    `meas_contraction` is the bare ||(I - l_gain c2) phi|| factor without
    the Lipschitz amplification; it is reported but does not drive the
    recursion.  `certified` means theta < 1 (the recursion contracts).

    w_cal maps the stacked noise word [v_k/sqrt2; w_k; v_{k+1}/sqrt2] to
    the post-update state error; y_cal maps the same word to the
    feedthrough-free residual.  r_mat/q_mat are the two layers w_cal is
    built from (w_cal = e @ r_mat + l_gain @ q_mat).
    """

    m1: np.ndarray
    m2: np.ndarray
    l_gain: np.ndarray
    e: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    r_mat: np.ndarray
    q_mat: np.ndarray
    w_cal: np.ndarray
    y_cal: np.ndarray
    lipschitz: float
    eta_w: float
    eta_v: float
    theta: float
    meas_contraction: float
    eta_bar: float
    beta: float
    alpha_bar: float

    @property
    def certified(self) -> bool:
        return self.theta < 1.0


def synthesize_gains(
    mode: ModeModel,
    dec: ModeDecomposition,
    eta_w: float,
    eta_v: float,
    user_gain: np.ndarray | None = None,
) -> ObserverGains:
    """Build the per-mode gains and radius constants.

    Raises
    ------
    SynthesisError
        When rank(c2 @ g2) falls short, so no unbiased recovery of the
        state-coupled input component exists.
    ConfigurationError
        When a user-supplied gain has the wrong shape.
    """
    if not check_rank_condition(dec):
        raise SynthesisError(
            "rank(c2 @ g2) = "
            f"{linalg.rank(dec.c2 @ dec.g2)} < {dec.g2.shape[1]}: "
            "state-coupled input component is not recoverable"
        )
    n = mode.n
    l = mode.l
    r = dec.z2_dim
    m1 = linalg.pinv(dec.sigma)  # diagonal positive, so this is the inverse
    m2 = linalg.pinv(dec.c2 @ dec.g2)
    phi = np.eye(n) - dec.g2 @ m2 @ dec.c2
    psi = dec.g1 @ m1 @ dec.c1
    if user_gain is None:
        l_gain = heuristic_gain(dec, phi)
    else:
        l_gain = linalg.as_matrix(user_gain, "gain")
        if l_gain.shape != (n, r):
            raise ConfigurationError(f"gain must have shape {(n, r)}, got {l_gain.shape}")
    e = np.eye(n) - l_gain @ dec.c2

    g1m1t1 = dec.g1 @ m1 @ dec.t1
    g2m2t2 = dec.g2 @ m2 @ dec.t2
    r_mat = np.hstack([-RT2 * phi @ g1m1t1, phi @ mode.w, -RT2 * g2m2t2])
    q_mat = np.hstack([np.zeros((r, l)), np.zeros((r, n)), -RT2 * dec.t2])
    w_cal = e @ r_mat + l_gain @ q_mat
    y_cal = np.hstack(
        [
            -RT2 * dec.c2 @ phi @ g1m1t1,
            dec.c2 @ phi @ mode.w,
            RT2 * (np.eye(r) - dec.c2 @ dec.g2 @ m2) @ dec.t2,
        ]
    )

    lf = float(mode.lipschitz)
    meas = linalg.spectral_norm(e @ phi)
    theta = (lf + linalg.spectral_norm(psi)) * meas
    re_mat = -(psi @ phi @ g1m1t1 + psi @ g2m2t2 + l_gain @ dec.t2)
    eta_bar = linalg.spectral_norm(re_mat) * eta_v + linalg.spectral_norm(psi @ phi @ mode.w) * eta_w
    v2m2c2 = dec.v2 @ m2 @ dec.c2
    beta = linalg.spectral_norm(dec.v1 @ m1 @ dec.c1 - v2m2c2 @ psi) + lf * linalg.spectral_norm(v2m2c2)
    alpha_bar = linalg.spectral_norm(v2m2c2) * eta_w + (
        linalg.spectral_norm((v2m2c2 @ dec.g1 - dec.v1) @ m1 @ dec.t1)
        + linalg.spectral_norm(dec.v2 @ m2 @ dec.t2)
    ) * eta_v

    return ObserverGains(
        m1=m1,
        m2=m2,
        l_gain=l_gain,
        e=e,
        phi=phi,
        psi=psi,
        r_mat=r_mat,
        q_mat=q_mat,
        w_cal=w_cal,
        y_cal=y_cal,
        lipschitz=lf,
        eta_w=float(eta_w),
        eta_v=float(eta_v),
        theta=float(theta),
        meas_contraction=float(meas),
        eta_bar=float(eta_bar),
        beta=float(beta),
        alpha_bar=float(alpha_bar),
    )


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of checking an externally supplied quadratic certificate."""

    valid: bool
    case: str
    theta_quadratic: float
    theta_recursion: float
    delta_x_limit: float
    delta_d_limit: float
    message: str = ""


def verify_certificate(
    gains: ObserverGains,
    p_matrix: np.ndarray,
    rho: float,
) -> CertificateReport:
    """Evaluate a (P, rho) pair as a convergence certificate.

    Two asymptotic radius candidates exist: a quadratic one
    rho * sqrt((eta_w^2 + eta_v^2) / (lambda_min(P) (1 - theta_q))) with
    theta_q = |lambda_max(P) - 1| / lambda_min(P), valid when
    theta_q < 1, and the recursion fixed point eta_bar / (1 - theta),
    valid when theta < 1.  The report takes whichever is available, the
    minimum when both are.
    """
    p = linalg.as_matrix(p_matrix, "p_matrix")
    if p.shape[0] != p.shape[1]:
        raise ConfigurationError(f"certificate matrix must be square, got {p.shape}")
    if not np.allclose(p, p.T, atol=1e-10):
        raise ConfigurationError("certificate matrix must be symmetric")
    eigs = np.linalg.eigvalsh(p)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    if lam_min <= 0:
        return CertificateReport(
            valid=False,
            case="indefinite",
            theta_quadratic=np.inf,
            theta_recursion=gains.theta,
            delta_x_limit=np.inf,
            delta_d_limit=np.inf,
            message=f"P is not positive definite (lambda_min = {lam_min:.3e})",
        )
    theta_q = abs(lam_max - 1.0) / lam_min
    theta_r = gains.theta
    cand_q = np.inf
    cand_r = np.inf
    if theta_q < 1.0:
        cand_q = float(rho) * np.sqrt(
            (gains.eta_w**2 + gains.eta_v**2) / (lam_min * (1.0 - theta_q))
        )
    if theta_r < 1.0:
        cand_r = gains.eta_bar / (1.0 - theta_r)
    if not np.isfinite(cand_q) and not np.isfinite(cand_r):
        return CertificateReport(
            valid=False,
            case="divergent",
            theta_quadratic=theta_q,
            theta_recursion=theta_r,
            delta_x_limit=np.inf,
            delta_d_limit=np.inf,
            message="neither contraction factor is below 1",
        )
    if np.isfinite(cand_q) and np.isfinite(cand_r):
        case = "both"
        delta_x = min(cand_q, cand_r)
    elif np.isfinite(cand_q):
        case = "quadratic"
        delta_x = cand_q
    else:
        case = "recursion"
        delta_x = cand_r
    return CertificateReport(
        valid=True,
        case=case,
        theta_quadratic=theta_q,
        theta_recursion=theta_r,
        delta_x_limit=delta_x,
        delta_d_limit=gains.beta * delta_x + gains.alpha_bar,
    )
