"""Residual definition, stacked noise-word coefficients, and thresholds.

The feedthrough-free residual at step k is an exact linear image of one
long vector ("word") collecting everything unknown up to k:

    t_k = [x_err_0 | v_0 .. v_k | w_0 .. w_{k-1} | df_0 .. df_{k-1}]

where df_j = f(x_j) - f(x-hat_{j|j}) is the realized drift mismatch.
The coefficient matrix is built from a first-step block and a one-step
downdate applied repeatedly, so all blocks for a whole horizon come out
of a single recursion.  Two computable residual-norm bounds follow:

* a triangle bound (block norms times per-block radii), cheap at any k;
* the exact maximum of the linear image over the hypercube of radii,
  by vertex enumeration, exponential in the word length and therefore
  capped.

Their minimum is the elimination threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomposition import ModeDecomposition
from .gains import ObserverGains

INV_RT2 = 1.0 / math.sqrt(2.0)


def compute_residual(
    dec: ModeDecomposition, x_star: np.ndarray, u_k: np.ndarray, y_k: np.ndarray
) -> np.ndarray:
    """Feedthrough-free innovation against the pre-correction estimate."""
    y_k = np.asarray(y_k, dtype=float).reshape(-1)
    return dec.t2 @ y_k - dec.c2 @ x_star - dec.d2 @ np.asarray(u_k, dtype=float)


@dataclass(frozen=True)
class ResidualCoefficients:
    """Blocks of the residual's word coefficients up to a horizon.

    For step k the residual equals

        a_mats[k-1] @ x_err_0
        + sum_i f_mats[i] @ df_{k-1-i}
        + sum_i j_mats[i] @ [v_{k-1-i}/sqrt2; w_{k-1-i}; v_{k-i}/sqrt2]

    with i running over 0..k-1.  Norm arrays are precomputed for the
    triangle bound; j-norms are split by the [l | n | l] sub-columns.
    """

    k_max: int
    n: int
    l: int
    a_mats: tuple[np.ndarray, ...]
    f_mats: tuple[np.ndarray, ...]
    j_mats: tuple[np.ndarray, ...]
    a_norms: np.ndarray
    f_norms: np.ndarray
    j_v_norms: np.ndarray
    j_w_norms: np.ndarray
    j_v_next_norms: np.ndarray


def _snorm(m: np.ndarray) -> float:
    if m.size == 0 or not np.any(m):
        return 0.0
    return float(np.linalg.norm(m, 2))


def build_coefficients(
    gains: ObserverGains, dec: ModeDecomposition, k_max: int
) -> ResidualCoefficients:
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    n = dec.c2.shape[1]
    l = dec.t2.shape[1]
    c2phi = dec.c2 @ gains.phi
    ephipsi = gains.e @ gains.phi @ gains.psi

    a_mats: list[np.ndarray] = []
    f_mats: list[np.ndarray] = [c2phi]
    j_mats: list[np.ndarray] = [gains.y_cal]
    prefix = -c2phi @ gains.psi  # the i = 1 downdate prefix
    for i in range(1, k_max + 1):
        a_mats.append(prefix)
        if i < k_max:
            f_mats.append(prefix @ gains.e @ gains.phi)
            j_mats.append(prefix @ gains.w_cal)
        prefix = -prefix @ ephipsi

    return ResidualCoefficients(
        k_max=k_max,
        n=n,
        l=l,
        a_mats=tuple(a_mats),
        f_mats=tuple(f_mats),
        j_mats=tuple(j_mats),
        a_norms=np.array([_snorm(m) for m in a_mats]),
        f_norms=np.array([_snorm(m) for m in f_mats]),
        j_v_norms=np.array([_snorm(m[:, :l]) for m in j_mats]),
        j_w_norms=np.array([_snorm(m[:, l : l + n]) for m in j_mats]),
        j_v_next_norms=np.array([_snorm(m[:, l + n :]) for m in j_mats]),
    )


def word_dim(k: int, n: int, l: int) -> int:
    return n + l * (k + 1) + 2 * n * k


def assemble_matrix(coeffs: ResidualCoefficients, k: int) -> np.ndarray:
    """Dense word-coefficient matrix for step k (sqrt2 factors folded in)."""
    if not 1 <= k <= coeffs.k_max:
        raise ValueError(f"k must be in 1..{coeffs.k_max}")
    n, l = coeffs.n, coeffs.l
    rows = coeffs.f_mats[0].shape[0]
    off_v = n
    off_w = n + l * (k + 1)
    off_f = off_w + n * k
    m = np.zeros((rows, word_dim(k, n, l)))
    m[:, :n] = coeffs.a_mats[k - 1]
    for i in range(k):
        j = coeffs.j_mats[i]
        step = k - 1 - i
        m[:, off_f + step * n : off_f + (step + 1) * n] += coeffs.f_mats[i]
        m[:, off_v + step * l : off_v + (step + 1) * l] += INV_RT2 * j[:, :l]
        m[:, off_w + step * n : off_w + (step + 1) * n] += j[:, l : l + n]
        m[:, off_v + (step + 1) * l : off_v + (step + 2) * l] += INV_RT2 * j[:, l + n :]
    return m


def box_radii(
    k: int,
    n: int,
    l: int,
    lipschitz: float,
    delta0: float,
    eta_v: float,
    eta_w: float,
    radius_seq: np.ndarray,
) -> np.ndarray:
    """Per-coordinate radii of the word hypercube at step k.

    radius_seq holds the a-priori state radii [delta_0, delta_1, ...];
    the drift-mismatch group for step j gets radius lipschitz * delta_j.
    """
    parts = [
        np.full(n, float(delta0)),
        np.full(l * (k + 1), float(eta_v)),
        np.full(n * k, float(eta_w)),
    ]
    for j in range(k):
        parts.append(np.full(n, lipschitz * float(radius_seq[j])))
    return np.concatenate(parts)


def delta_tri(
    coeffs: ResidualCoefficients,
    k: int,
    lipschitz: float,
    delta0: float,
    eta_v: float,
    eta_w: float,
    radius_seq: np.ndarray,
) -> float:
    """Triangle-inequality residual bound at step k."""
    if not 1 <= k <= coeffs.k_max:
        raise ValueError(f"k must be in 1..{coeffs.k_max}")

    def j_term(i: int) -> float:
        return (
            INV_RT2 * eta_v * (coeffs.j_v_norms[i] + coeffs.j_v_next_norms[i])
            + eta_w * coeffs.j_w_norms[i]
        )

    total = 0.0
    for i in range(k - 1):
        total += lipschitz * coeffs.f_norms[i] * float(radius_seq[k - 1 - i]) + j_term(i)
    total += (coeffs.a_norms[k - 1] + lipschitz * coeffs.f_norms[k - 1]) * float(delta0)
    total += j_term(k - 1)
    return float(total)


def delta_inf(
    matrix: np.ndarray, box: np.ndarray, max_vertices: int
) -> tuple[float, int, bool]:
    """Exact max of ||matrix @ t|| over the hypercube |t_i| <= box_i.

    The maximum of a convex function over a box sits on a vertex, and the
    +-t symmetry halves the vertex set, so 2^(dim-1) sign patterns are
    enumerated (first coordinate pinned positive).  Returns
    (value, vertices_enumerated, capped); a capped query reports +inf and
    enumerates nothing.
    """
    box = np.asarray(box, dtype=float).reshape(-1)
    dim = box.size
    if dim == 0:
        return 0.0, 0, False
    total = 1 << (dim - 1)
    if total > max_vertices:
        return math.inf, 0, True
    scaled = matrix * box[None, :]
    if scaled.shape[0] == 0:
        return 0.0, total, False
    base = scaled[:, 0]
    rest = scaled[:, 1:]
    free = dim - 1
    shifts = np.arange(free, dtype=np.uint64)[None, :]
    best = 0.0
    batch = 1 << 14
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total), dtype=np.uint64)[:, None]
        signs = 1.0 - 2.0 * ((idx >> shifts) & np.uint64(1))
        pts = base[:, None] + rest @ signs.T
        best = max(best, float(np.sqrt(np.max(np.sum(pts * pts, axis=0)))))
    return best, total, False


def eta_t(
    k: int,
    n: int,
    l: int,
    lipschitz: float,
    delta0: float,
    eta_v: float,
    eta_w: float,
    radius_seq: np.ndarray,
) -> float:
    """Common Euclidean norm of every vertex of the step-k word hypercube."""
    lf2 = lipschitz * lipschitz
    tail = sum(float(radius_seq[j]) ** 2 for j in range(1, k))
    return math.sqrt(
        n * ((1.0 + lf2) * delta0**2 + k * eta_w**2 + lf2 * tail)
        + l * (k + 1) * eta_v**2
    )


@dataclass(frozen=True)
class ThresholdReport:
    """Elimination threshold data for one mode at one step."""

    k: int
    delta_tri: float
    delta_inf: float
    delta_hat: float
    vertices_enumerated: int
    capped: bool


def threshold_at(
    coeffs: ResidualCoefficients,
    k: int,
    lipschitz: float,
    delta0: float,
    eta_v: float,
    eta_w: float,
    radius_seq: np.ndarray,
    max_vertices: int,
) -> ThresholdReport:
    tri = delta_tri(coeffs, k, lipschitz, delta0, eta_v, eta_w, radius_seq)
    box = box_radii(k, coeffs.n, coeffs.l, lipschitz, delta0, eta_v, eta_w, radius_seq)
    dim = box.size
    if (1 << (dim - 1)) > max_vertices:
        inf_val, count, capped = math.inf, 0, True
    else:
        inf_val, count, capped = delta_inf(assemble_matrix(coeffs, k), box, max_vertices)
    return ThresholdReport(
        k=k,
        delta_tri=tri,
        delta_inf=inf_val,
        delta_hat=min(tri, inf_val),
        vertices_enumerated=count,
        capped=capped,
    )


def build_threshold_table(
    gains: ObserverGains,
    dec: ModeDecomposition,
    delta0: float,
    k_max: int,
    max_vertices: int,
    radius_seq: np.ndarray | None = None,
) -> list[ThresholdReport]:
    """Thresholds for k = 1..k_max, sharing one coefficient recursion."""
    from .observer import radius_sequence

    if radius_seq is None:
        radius_seq = radius_sequence(gains, delta0, k_max)
    coeffs = build_coefficients(gains, dec, k_max)
    return [
        threshold_at(
            coeffs,
            k,
            gains.lipschitz,
            delta0,
            gains.eta_v,
            gains.eta_w,
            radius_seq,
            max_vertices,
        )
        for k in range(1, k_max + 1)
    ]
