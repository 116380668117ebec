"""Gain-certification SDP assembly and SDPA sparse-format export.

The gain certificate is posed as a semidefinite feasibility/minimization
problem over a quadratic-stability matrix and a set of multipliers.  Two
of its scalar parameters enter bilinearly and two rationally, so they are
frozen at export time (configurable); the remainder enter linearly and
the problem becomes a plain linear SDP.  The binary disjunction over the
eigenvalue-corridor constraints is expanded into two separate exports,
one per branch.

Solving happens outside this package.  The export targets the SDPA
sparse text format (".dat-s"):

    " comment lines start with a double quote
    m                 number of scalar decision variables
    nblocks           number of diagonal blocks in the constraint matrix
    s1 s2 ... snb     block sizes; a negative size marks a diagonal block
    c1 c2 ... cm      objective coefficients
    matno blkno i j v one entry per line, 1-based upper triangle,
                      matno 0 for the constant matrix F0

and encodes: minimize c'x subject to sum_i x_i F_i - F0 >= 0 (block
diagonal, positive semidefinite).  Strict inequalities are written with
an explicit margin; the two strict branch constraints get their own gap.

Variables are enumerated in a fixed documented order (see SdpLayout);
entries are exact `repr` of IEEE doubles, so a file parses back to
bit-identical data.

A structural caveat, stated here once: the first coupling block requires
a diagonal term of the form -(positive scalar) I - (PSD matrix) to be
positive semidefinite, which no admissible point satisfies.  The export
reproduces the certification problem faithfully rather than repairing
it; external solvers will (correctly) report infeasibility, and
`verify_certificate` in the gains module remains the entry point for
externally produced certificates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import ModeDecomposition
from .errors import ConfigurationError
from .gains import ObserverGains

BRANCHES = ("A", "B")

_SCALARS = ("obj_sq", "lip_mult", "eig_floor", "eig_cap")


def _sym_count(size: int) -> int:
    return size * (size + 1) // 2


@dataclass(frozen=True)
class SdpLayout:
    """Scalar-variable enumeration for one mode's certification SDP.

    Order: upper triangles (row-major) of the symmetric unknowns
    lyap (n), noise_mult (r), drift_mult (n), curv_mult (n),
    cross_slack (n); then the full n-by-r gain_wt row-major; then the
    scalars obj_sq, lip_mult, eig_floor, eig_cap.  Here r is the free
    output dimension and the gain of interest is lyap^-1 gain_wt.
    """

    n: int
    l: int
    r: int

    @property
    def count(self) -> int:
        return 4 * _sym_count(self.n) + _sym_count(self.r) + self.n * self.r + 4

    @property
    def names(self) -> tuple[str, ...]:
        out: list[str] = []
        for tag, size in (
            ("lyap", self.n),
            ("noise_mult", self.r),
            ("drift_mult", self.n),
            ("curv_mult", self.n),
            ("cross_slack", self.n),
        ):
            out += [
                f"{tag}[{i + 1},{j + 1}]"
                for i in range(size)
                for j in range(i, size)
            ]
        out += [
            f"gain_wt[{i + 1},{j + 1}]"
            for i in range(self.n)
            for j in range(self.r)
        ]
        out += list(_SCALARS)
        return tuple(out)

    def unpack(self, x: np.ndarray) -> "ConstraintPoint":
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.count:
            raise ConfigurationError(
                f"variable vector must have {self.count} entries, got {x.size}"
            )
        pos = 0

        def sym(size: int) -> np.ndarray:
            nonlocal pos
            mat = np.zeros((size, size))
            for i in range(size):
                for j in range(i, size):
                    mat[i, j] = mat[j, i] = x[pos]
                    pos += 1
            return mat

        lyap = sym(self.n)
        noise_mult = sym(self.r)
        drift_mult = sym(self.n)
        curv_mult = sym(self.n)
        cross_slack = sym(self.n)
        gain_wt = x[pos : pos + self.n * self.r].reshape(self.n, self.r).copy()
        pos += self.n * self.r
        obj_sq, lip_mult, eig_floor, eig_cap = x[pos : pos + 4]
        return ConstraintPoint(
            lyap=lyap,
            noise_mult=noise_mult,
            drift_mult=drift_mult,
            curv_mult=curv_mult,
            cross_slack=cross_slack,
            gain_wt=gain_wt,
            obj_sq=float(obj_sq),
            lip_mult=float(lip_mult),
            eig_floor=float(eig_floor),
            eig_cap=float(eig_cap),
        )


@dataclass(frozen=True)
class ConstraintPoint:
    """One dense assignment of the SDP unknowns."""

    lyap: np.ndarray
    noise_mult: np.ndarray
    drift_mult: np.ndarray
    curv_mult: np.ndarray
    cross_slack: np.ndarray
    gain_wt: np.ndarray
    obj_sq: float
    lip_mult: float
    eig_floor: float
    eig_cap: float


def _corner(tl: np.ndarray, tr: np.ndarray, br: np.ndarray) -> np.ndarray:
    """[[tl, tr], [tr', br]] as one dense symmetric block."""
    a, b = tl.shape[0], br.shape[0]
    out = np.zeros((a + b, a + b))
    out[:a, :a] = tl
    out[:a, a:] = tr
    out[a:, :a] = tr.T
    out[a:, a:] = br
    return out


def constraint_blocks(
    gains: ObserverGains,
    dec: ModeDecomposition,
    x: np.ndarray,
    branch: str,
    *,
    alpha: float = 0.5,
    eps1: float = 1.0,
    eps2: float = 1.0,
    margin: float = 1e-8,
    strict_gap: float = 1e-6,
) -> list[np.ndarray]:
    """Evaluate all 13 constraint blocks at a packed variable vector.

    Every block must be positive semidefinite for x to be feasible.  The
    returned list always has 13 entries in documented order; with
    degenerate dimensions some may be 0-by-0.
    """
    if branch not in BRANCHES:
        raise ConfigurationError(f"branch must be one of {BRANCHES}, got {branch!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError("alpha must lie in [0, 1]")
    if eps1 <= 0 or eps2 <= 0:
        raise ConfigurationError("eps1 and eps2 must be positive")
    n = gains.phi.shape[0]
    l = dec.t1.shape[1]
    r = dec.z2_dim
    pt = SdpLayout(n=n, l=l, r=r).unpack(x)

    phi, psi = gains.phi, gains.psi
    c2 = dec.c2
    rmat, qmat = gains.r_mat, gains.q_mat
    omega = c2 @ rmat - qmat
    lf = gains.lipschitz
    eye_n, eye_r = np.eye(n), np.eye(r)
    stacked = rmat.shape[1]  # 2l + n

    p, y = pt.lyap, pt.gain_wt
    py_phi = (p - y @ c2) @ phi
    kappa = pt.lip_mult

    blocks: list[np.ndarray] = []
    # paired coupling blocks: certificate against each interconnection image
    blocks.append(_corner(p, py_phi, -kappa * eye_n - pt.curv_mult))
    blocks.append(
        _corner(
            p,
            -py_phi @ psi,
            -kappa * lf**2 * eye_n + (1.0 - alpha) * p - pt.drift_mult,
        )
    )
    blocks.append(_corner(p, py_phi, kappa * eye_n))
    blocks.append(_corner(p, -py_phi @ psi, pt.cross_slack))
    blocks.append(
        _corner(pt.drift_mult, pt.cross_slack, psi.T @ pt.curv_mult @ psi)
    )
    # contraction of the gain product: diag(I - noise_mult, [[P, Y], [Y', I]])
    b6 = np.zeros((r + n + r, r + n + r))
    b6[:r, :r] = eye_r - pt.noise_mult
    b6[r : r + n, r : r + n] = p
    b6[r : r + n, r + n :] = y
    b6[r + n :, r : r + n] = y.T
    b6[r + n :, r + n :] = eye_r
    blocks.append(b6)
    # the main dissipation block over (stacked noise word, drift gap, state gap)
    noise_weight = pt.noise_mult + (1.0 / eps1 + 1.0 / eps2) * eye_r
    n11 = (
        pt.obj_sq * np.eye(stacked)
        + rmat.T @ y @ omega
        + omega.T @ y.T @ rmat
        - rmat.T @ p @ rmat
        - omega.T @ noise_weight @ omega
    )
    core = p @ rmat - y @ omega - c2.T @ y.T @ rmat
    n21 = psi.T @ phi.T @ core
    n31 = -phi.T @ core
    n22 = (
        -np.eye(n)
        + alpha * p
        - eps1 * psi.T @ phi.T @ c2.T @ c2 @ phi @ psi
        - lf**2 * eye_n
    )
    n33 = -eps2 * phi.T @ c2.T @ c2 @ phi + eye_n
    b7 = np.zeros((stacked + 2 * n, stacked + 2 * n))
    b7[:stacked, :stacked] = n11
    b7[stacked : stacked + n, :stacked] = n21
    b7[:stacked, stacked : stacked + n] = n21.T
    b7[stacked + n :, :stacked] = n31
    b7[:stacked, stacked + n :] = n31.T
    b7[stacked : stacked + n, stacked : stacked + n] = n22
    b7[stacked + n :, stacked + n :] = n33
    blocks.append(b7)
    # eigenvalue corridor and sign constraints
    blocks.append(p - pt.eig_floor * eye_n)
    blocks.append(pt.eig_cap * eye_n - p)
    blocks.append(pt.noise_mult - margin * eye_r)
    blocks.append(pt.drift_mult.copy())
    blocks.append(pt.curv_mult.copy())
    if branch == "A":
        diag = [
            pt.obj_sq - margin,
            kappa - margin,
            pt.eig_cap - margin,
            pt.eig_floor - 1.0,
            pt.eig_floor - pt.eig_cap + 1.0 - strict_gap,
        ]
    else:
        diag = [
            pt.obj_sq - margin,
            kappa - margin,
            pt.eig_cap - margin,
            1.0 - pt.eig_cap,
            pt.eig_floor - 0.5 - strict_gap,
        ]
    blocks.append(np.diag(diag))
    return [0.5 * (b + b.T) for b in blocks]


_DIAG_BLOCK = 12  # position of the scalar bound block in the list above


@dataclass(frozen=True)
class SdpExport:
    """Sparse data of one branch's linear SDP, ready to serialize."""

    branch: str
    label: str
    alpha: float
    eps1: float
    eps2: float
    margin: float
    strict_gap: float
    variable_names: tuple[str, ...]
    block_sizes: tuple[int, ...]
    objective: tuple[float, ...]
    entries: tuple[tuple[int, int, int, int, float], ...]


def assemble_sdp(
    gains: ObserverGains,
    dec: ModeDecomposition,
    branch: str,
    *,
    label: str = "",
    alpha: float = 0.5,
    eps1: float = 1.0,
    eps2: float = 1.0,
    margin: float = 1e-8,
    strict_gap: float = 1e-6,
) -> SdpExport:
    """Extract the sparse affine data of one branch by one-hot probing.

    For fixed (alpha, eps1, eps2) every block entry is affine in the
    variables, so F_i = blocks(e_i) - blocks(0) and F0 = -blocks(0) are
    exact; entries a variable does not touch cancel to literal 0.0 and
    are dropped.  Zero-sized blocks (degenerate dimensions) are omitted
    from the file; the remaining blocks keep their relative order.
    """
    n = gains.phi.shape[0]
    l = dec.t1.shape[1]
    layout = SdpLayout(n=n, l=l, r=dec.z2_dim)
    kwargs = dict(
        alpha=alpha, eps1=eps1, eps2=eps2, margin=margin, strict_gap=strict_gap
    )
    base = constraint_blocks(gains, dec, np.zeros(layout.count), branch, **kwargs)
    kept = [i for i, b in enumerate(base) if b.shape[0] > 0]
    block_sizes = tuple(
        -b.shape[0] if i == _DIAG_BLOCK else b.shape[0]
        for i, b in ((i, base[i]) for i in kept)
    )

    entries: list[tuple[int, int, int, int, float]] = []

    def collect(matno: int, blocks: list[np.ndarray]) -> None:
        for file_blk, idx in enumerate(kept, start=1):
            b = blocks[idx]
            size = b.shape[0]
            if idx == _DIAG_BLOCK:
                for i in range(size):
                    v = float(b[i, i])
                    if v != 0.0:
                        entries.append((matno, file_blk, i + 1, i + 1, v))
                continue
            for i in range(size):
                for j in range(i, size):
                    v = float(b[i, j])
                    if v != 0.0:
                        entries.append((matno, file_blk, i + 1, j + 1, v))

    collect(0, [-b for b in base])
    unit = np.zeros(layout.count)
    for i in range(layout.count):
        unit[i] = 1.0
        probe = constraint_blocks(gains, dec, unit, branch, **kwargs)
        collect(i + 1, [pb - bb for pb, bb in zip(probe, base)])
        unit[i] = 0.0

    names = layout.names
    objective = tuple(1.0 if name == "obj_sq" else 0.0 for name in names)
    return SdpExport(
        branch=branch,
        label=label,
        alpha=alpha,
        eps1=eps1,
        eps2=eps2,
        margin=margin,
        strict_gap=strict_gap,
        variable_names=names,
        block_sizes=block_sizes,
        objective=objective,
        entries=tuple(entries),
    )


def format_sdpa(export: SdpExport) -> str:
    """Serialize to SDPA sparse text; floats are `repr` round-trippable."""
    lines = []
    title = export.label or "gain certification"
    lines.append(f'" {title}: branch {export.branch}')
    lines.append(
        f'" fixed: alpha={repr(export.alpha)} eps1={repr(export.eps1)}'
        f" eps2={repr(export.eps2)}"
    )
    lines.append(
        f'" margins: strict={repr(export.margin)} branch_gap={repr(export.strict_gap)}'
    )
    for i, name in enumerate(export.variable_names, start=1):
        lines.append(f'" x{i} = {name}')
    lines.append(str(len(export.variable_names)))
    lines.append(str(len(export.block_sizes)))
    lines.append(" ".join(str(s) for s in export.block_sizes))
    lines.append(" ".join(repr(float(c)) for c in export.objective))
    for matno, blk, i, j, v in export.entries:
        lines.append(f"{matno} {blk} {i} {j} {repr(float(v))}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ParsedSdpa:
    """Numeric payload of an SDPA sparse file."""

    variable_count: int
    block_sizes: tuple[int, ...]
    objective: tuple[float, ...]
    entries: tuple[tuple[int, int, int, int, float], ...]


def parse_sdpa(text: str) -> ParsedSdpa:
    """Parse SDPA sparse text (tolerates {},() punctuation and comments)."""
    data_lines = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith('"') or stripped.startswith("*"):
            continue
        data_lines.append(stripped.translate(str.maketrans("{}(),", "     ")))
    if len(data_lines) < 4:
        raise ConfigurationError("truncated SDPA data: need at least 4 data lines")
    try:
        m = int(data_lines[0].split()[0])
        nblocks = int(data_lines[1].split()[0])
        sizes = tuple(int(tok) for tok in data_lines[2].split())
        objective = tuple(float(tok) for tok in data_lines[3].split())
    except ValueError as exc:
        raise ConfigurationError(f"malformed SDPA header: {exc}") from exc
    if len(sizes) != nblocks:
        raise ConfigurationError(
            f"block count {nblocks} does not match {len(sizes)} listed sizes"
        )
    if len(objective) != m:
        raise ConfigurationError(
            f"objective has {len(objective)} coefficients, expected {m}"
        )
    entries: list[tuple[int, int, int, int, float]] = []
    for line in data_lines[4:]:
        toks = line.split()
        if len(toks) != 5:
            raise ConfigurationError(f"malformed entry line: {line!r}")
        entries.append(
            (int(toks[0]), int(toks[1]), int(toks[2]), int(toks[3]), float(toks[4]))
        )
    return ParsedSdpa(
        variable_count=m,
        block_sizes=sizes,
        objective=objective,
        entries=tuple(entries),
    )
