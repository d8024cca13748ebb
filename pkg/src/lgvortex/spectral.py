"""Smallest singular triplets, numerical kernels and index reports.

Singular values are obtained from the largest eigenvalues of
(M^H M + mu)^{-1}, applied through a sparse LU factorization of the shifted
normal matrix.  The shift mu = 1e-4 (e v)^2 keeps its condition number near
1e6; M itself is never inverted, since its near-null directions would
amplify rounding in every other mode.

Naive central differences carry fermion doublers: besides the physical
species near zero momentum, the lattice operator has copies near (pi, pi),
(pi, 0) and (0, pi) that contribute extra near-null directions to D and
D^H.  Every computed triplet is therefore classified by its low-momentum
weight and the reported spectrum is the physical one; the unfiltered
("raw") counts are kept alongside for transparency.

Counting is over the real numbers: the field space is a real vector space
(the gauge fluctuations are real), so a complex singular vector u stands for
the two real directions u and i u.  Kernel dimensions are real dimensions.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from threadpoolctl import threadpool_limits

from .background import Background2D
from .errors import NoConvergence
from .operators import SparseOperator, StateVector, assemble_D

log = logging.getLogger(__name__)

# low-momentum box, in cycles per site, separating the physical species
PHYSICAL_CUTOFF = 0.25
# Gram eigenvalues inside this window mean species could not be separated
AMBIGUOUS_WEIGHT = (0.25, 0.75)
MAX_TRIPLETS = 160
RESIDUAL_TOL = 1e-8
GAP_REQUIRED = 10.0
SIGN_NOTE = (
    "witten_index = n_minus - n_plus with n_minus = dim ker D^H D and "
    "n_plus = dim ker D D^H; this evaluates to +2n. The opposite ordering "
    "gives -2n, so only |index| = 2n is asserted."
)


@dataclass(frozen=True, eq=False)
class SpectralReport:
    operator_tag: str
    sigma: np.ndarray
    vectors: list = field(repr=False)
    kernel_count: int
    gap_ratio: float
    tol_zero: float
    resolved: bool
    raw_sigma: np.ndarray = field(repr=False)
    raw_kernel_count: int = 0
    physical_weights: np.ndarray = field(default=None, repr=False)
    solver_meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "operator_tag": self.operator_tag,
            "sigma": [float(s) for s in self.sigma],
            "kernel_count": int(self.kernel_count),
            "gap_ratio": float(self.gap_ratio),
            "tol_zero": float(self.tol_zero),
            "resolved": bool(self.resolved),
            "raw_sigma": [float(s) for s in self.raw_sigma],
            "raw_kernel_count": int(self.raw_kernel_count),
            "physical_weights": [float(w) for w in self.physical_weights],
            "solver_meta": self.solver_meta,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def mode_csv(self, index: int, path) -> Path:
        """Dump one singular vector as x,y,re_c0,im_c0,re_c1,im_c1."""
        vec = self.vectors[index]
        lay = vec.layout
        xs, ys = lay.point_coords()
        N = lay.n_points
        c0, c1 = vec.values[:N], vec.values[N:]
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "re_c0", "im_c0", "re_c1", "im_c1"])
            for row in zip(xs, ys, c0.real, c0.imag, c1.real, c1.imag):
                w.writerow([format(float(v), ".17g") for v in row])
        return path

    def kernel_vectors(self) -> list:
        return list(self.vectors[: self.kernel_count])


@dataclass(frozen=True, eq=False)
class IndexReport:
    n_minus: int
    n_plus: int
    witten_index: int
    fredholm_index: int
    vorticity: int
    resolved: bool
    raw_n_minus: int
    raw_n_plus: int
    pairing_error: float | None
    sign_note: str = SIGN_NOTE
    d_report: SpectralReport | None = field(default=None, repr=False)
    adjoint_report: SpectralReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "n_minus": self.n_minus,
            "n_plus": self.n_plus,
            "witten_index": self.witten_index,
            "fredholm_index": self.fredholm_index,
            "vorticity": self.vorticity,
            "resolved": self.resolved,
            "raw_n_minus": self.raw_n_minus,
            "raw_n_plus": self.raw_n_plus,
            "pairing_error": self.pairing_error,
            "sign_note": self.sign_note,
        }


# -- solver -------------------------------------------------------------------------

class _InverseNormal:
    """x -> (M^H M + mu)^{-1} x through a sparse LU factorization."""

    def __init__(self, M: sp.spmatrix, mu: float):
        n = M.shape[1]
        A = (M.conj().T @ M + mu * sp.identity(n, dtype=complex)).tocsc()
        self.lu = spla.splu(A, permc_spec="COLAMD")
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.lu.solve(np.asarray(x, dtype=complex).reshape(-1))


def _low_momentum(op: SparseOperator, V: np.ndarray) -> np.ndarray:
    """Low-momentum Fourier coefficients of the columns of V (orthonormal FFT)."""
    lay = op.domain
    grids = lay.to_grid(V.T)  # (k, 2, m, m)
    freq = np.fft.fftfreq(lay.m_xy)
    keep = np.abs(freq) < PHYSICAL_CUTOFF
    box = np.outer(keep, keep)
    F = np.fft.fft2(grids, norm="ortho")[..., box]  # (k, 2, nbox)
    return F.reshape(F.shape[0], -1).T


def _clusters(sig: np.ndarray, tol_zero: float):
    """Index groups of (near-)degenerate values; the sub-threshold block is one group."""
    groups, cur = [], []
    for i, s in enumerate(sig):
        if not cur:
            cur = [i]
            continue
        prev = sig[cur[-1]]
        same = (s < tol_zero and prev < tol_zero) or abs(s - prev) <= 1e-6 * max(1.0, s)
        if same:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    if cur:
        groups.append(cur)
    return groups


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    out = v * (abs(v[k]) / v[k])
    out[k] = abs(v[k])  # exactly real, free of rounding in the phase
    return out


def _triplets(op: SparseOperator, n_triplets: int, seed: int, mu: float, tol: float,
              inv: _InverseNormal):
    M = op.matrix
    n = M.shape[1]
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    lin = spla.LinearOperator((n, n), matvec=inv, dtype=complex)
    try:
        _, V = spla.eigsh(lin, k=n_triplets, which="LM", v0=v0, tol=tol, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"eigensolver did not converge: {exc}") from exc
    # ARPACK's complex driver is the non-Hermitian one: Ritz vectors of
    # degenerate eigenvalues need not be orthogonal, so redo Rayleigh-Ritz
    Q, _ = np.linalg.qr(V)
    MQ = M @ Q
    B = MQ.conj().T @ MQ
    lam, Z = np.linalg.eigh(0.5 * (B + B.conj().T))
    V = Q @ Z
    sig = np.linalg.norm(M @ V, axis=0)
    order = np.argsort(sig, kind="stable")
    return sig[order], V[:, order]


def smallest_singulars(op: SparseOperator, k: int = 6, tol_zero: float | None = None,
                       seed: int = 0, physical_only: bool = True) -> SpectralReport:
    """Smallest k real singular values of ``op`` with their right singular vectors.

    ``tol_zero`` defaults to 1e-3 e v.  At least kernel_count + 1 values are
    returned so that the gap is always defined; physical values are sparse
    among the doubler modes, so fewer than k may come back when the first
    non-kernel value already lies at the edge of the computed window.
    With ``physical_only=False`` doubler modes are not filtered.  If no raw
    value falls below ``tol_zero`` and no physical triplet can be isolated
    (the vacuum, where all species are degenerate), the raw values are
    returned as lower bounds and ``solver_meta["species_filter"]`` says so.
    """
    if tol_zero is None:
        tol_zero = 1e-3 * op.ev
    M = op.matrix
    n = M.shape[1]
    mu = 1e-4 * op.ev**2
    eig_tol = 1e-12
    with threadpool_limits(1):
        inv = _InverseNormal(M, mu)
        n_trip = min(2 * k + 8, n - 2)
        while True:
            sig, V = _triplets(op, n_trip, seed, mu, eig_tol, inv)
            # the last cluster may continue beyond the computed window
            groups = _clusters(sig, tol_zero)
            complete = groups[:-1] if len(groups) > 1 else groups
            kept_sig, kept_vec, weights, ambiguity = [], [], [], []
            for g in complete:
                Vg = V[:, g]
                if physical_only:
                    W = _low_momentum(op, Vg)
                    w, U = np.linalg.eigh(W.conj().T @ W)
                    sel = w > 0.5
                    Vp = Vg @ U[:, sel][:, ::-1]
                    wp = w[sel][::-1]
                    amb = bool(np.any((w > AMBIGUOUS_WEIGHT[0]) & (w < AMBIGUOUS_WEIGHT[1])))
                else:
                    Vp, wp, amb = Vg, np.ones(len(g)), False
                if not Vp.shape[1]:
                    ambiguity.append((sig[g[0]], amb))
                    continue
                # re-diagonalize inside the subspace to attach sigma to each vector
                B = Vp.conj().T @ (M.conj().T @ (M @ Vp))
                lam, Z = np.linalg.eigh(0.5 * (B + B.conj().T))
                kept_sig.extend(np.sqrt(np.clip(lam, 0.0, None)))
                kept_vec.append(Vp @ Z)
                weights.extend(np.real(np.einsum("ij,i,ij->j", Z.conj(), wp, Z)))
                ambiguity.append((sig[g[0]], amb))
            kept_sig = np.asarray(kept_sig)
            n_kernel = int(np.sum(kept_sig < tol_zero))
            # with no raw value below threshold the physical kernel is empty
            # whatever the species content, so more triplets cannot change it
            bound_only = len(kept_sig) == 0 and sig[0] >= tol_zero
            if len(kept_sig) > n_kernel or bound_only or n_trip >= min(MAX_TRIPLETS, n - 2):
                break
            n_trip = min(2 * n_trip, MAX_TRIPLETS, n - 2)

    if bound_only:
        # raw values bound the physical spectrum from below
        log.info("%s: no physical triplet isolated; reporting raw lower bounds", op.tag)
        kept_sig, Vall = sig, V
        W = _low_momentum(op, V)
        weights = np.linalg.norm(W, axis=0) ** 2
        ambiguity = []
    elif len(kept_sig) == n_kernel:
        raise NoConvergence("no physical singular value above the kernel threshold was found")
    else:
        Vall = np.concatenate(kept_vec, axis=1)
        order = np.argsort(kept_sig, kind="stable")
        kept_sig = kept_sig[order]
        Vall = Vall[:, order]
        weights = np.asarray(weights)[order]
    sig_exact = np.linalg.norm(M @ Vall, axis=0)
    res = np.linalg.norm(M.conj().T @ (M @ Vall) - Vall * sig_exact**2, axis=0)
    max_res = float(res.max())
    if max_res > RESIDUAL_TOL:
        raise NoConvergence(f"singular triplet residual {max_res:.2e} exceeds {RESIDUAL_TOL:g}")

    # real counting: each complex triplet gives the two real directions v, i v
    n_complex = min(max((k + 1) // 2, n_kernel + 1), len(sig_exact))
    top = sig_exact[n_complex - 1]
    ambiguous = any(amb for s0, amb in ambiguity if s0 <= top * (1 + 1e-6))
    h = op.h
    sigma, vectors = [], []
    for j in range(n_complex):
        v = _canonical_phase(Vall[:, j]) / h
        for rot in (1.0, 1j):
            sigma.append(sig_exact[j])
            vectors.append(StateVector(rot * v, op.domain, h))
    sigma = np.asarray(sigma)
    kc = 2 * n_kernel
    if kc == 0:
        gap = float(sigma[0] / tol_zero)
    else:
        gap = float(sigma[kc] / max(sigma[kc - 1], np.finfo(float).tiny))
    resolved = bool(gap >= GAP_REQUIRED and not ambiguous)
    if not resolved:
        log.warning("%s: kernel count %d unresolved (gap %.3g, ambiguous species %s)",
                    op.tag, kc, gap, ambiguous)
    raw_sig = np.repeat(sig, 2)
    return SpectralReport(
        operator_tag=op.tag,
        sigma=sigma,
        vectors=vectors,
        kernel_count=kc,
        gap_ratio=gap,
        tol_zero=float(tol_zero),
        resolved=resolved,
        raw_sigma=raw_sig,
        raw_kernel_count=int(np.sum(raw_sig < tol_zero)),
        physical_weights=np.repeat(weights[:n_complex], 2),
        solver_meta={
            "method": "shift-invert Lanczos on M^H M + mu",
            "mu": mu,
            "eig_tol": eig_tol,
            "complex_triplets": int(n_trip),
            "operator_solves": int(inv.calls),
            "max_residual": max_res,
            "species_filter": ("lower_bound" if bound_only
                               else "physical" if physical_only else "none"),
            "species_ambiguous": bool(ambiguous),
            "requested_k": int(k),
            "seed": int(seed),
        },
    )


def compute_index(background: Background2D, k: int = 6, tol_zero: float | None = None,
                  seed: int = 0, scheme: str = "central2") -> IndexReport:
    """Kernel dimensions of D^H D and D D^H and the resulting index."""
    ev = background.params.ev
    tol = 1e-3 * ev if tol_zero is None else tol_zero
    D = assemble_D(background, scheme)
    rep = smallest_singulars(D, k, tol, seed)
    rep_h = smallest_singulars(D.conj_transpose("D_adjoint"), k, tol, seed)
    n_minus, n_plus = rep.kernel_count, rep_h.kernel_count
    nz = rep.sigma[rep.kernel_count]
    nz_h = rep_h.sigma[rep_h.kernel_count]
    return IndexReport(
        n_minus=n_minus,
        n_plus=n_plus,
        witten_index=n_minus - n_plus,
        fredholm_index=rep.kernel_count - rep_h.kernel_count,
        vorticity=background.params.n,
        resolved=rep.resolved and rep_h.resolved,
        raw_n_minus=rep.raw_kernel_count,
        raw_n_plus=rep_h.raw_kernel_count,
        pairing_error=float(abs(nz - nz_h) / nz),
        d_report=rep,
        adjoint_report=rep_h,
    )
