"""N=2 supersymmetric quantum mechanics built on a zero-mode operator D.

The full space is the direct sum (upper, lower) of the codomain and domain
of D.  With W = diag(I, -I):

    Q   = [[0, D], [0, 0]]        Q^H = [[0, 0], [D^H, 0]]
    H   = {Q, Q^H} = diag(D D^H, D^H D)

Q, Q^H, W and H are applied as compositions of D and D^H (no matrix products
are formed).  ``verify_algebra`` checks them against independently multiplied
sparse blocks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, UnknownSector
from .operators import SparseOperator, StateVector

DENSE_LIMIT = 48

PARITY = {"fermion_upper": +1, "fermion_lower": -1, "boson": -1}


@dataclass(frozen=True, eq=False)
class SusyBlocks:
    D: SparseOperator
    D_dag: SparseOperator

    @property
    def n_upper(self) -> int:
        return self.D.rows

    @property
    def n_lower(self) -> int:
        return self.D.cols

    @property
    def size(self) -> int:
        return self.n_upper + self.n_lower

    def split(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.size:
            raise DimensionMismatch(f"vector of length {x.shape[0]} for space of size {self.size}")
        return x[: self.n_upper], x[self.n_upper:]

    def _join(self, up, lo):
        return np.concatenate([up, lo])

    def Q(self, x):
        up, lo = self.split(x)
        return self._join(self.D.matrix @ lo, np.zeros_like(lo))

    def Q_dag(self, x):
        up, lo = self.split(x)
        return self._join(np.zeros_like(up), self.D_dag.matrix @ up)

    def W(self, x):
        up, lo = self.split(x)
        return self._join(up, -lo)

    def P_plus(self, x):
        up, lo = self.split(x)
        return self._join(up, np.zeros_like(lo))

    def P_minus(self, x):
        up, lo = self.split(x)
        return self._join(np.zeros_like(up), lo)

    def H_plus(self, up):
        return self.D.matrix @ (self.D_dag.matrix @ up)

    def H_minus(self, lo):
        return self.D_dag.matrix @ (self.D.matrix @ lo)

    def H(self, x):
        up, lo = self.split(x)
        return self._join(self.H_plus(up), self.H_minus(lo))

    # explicit matrices ---------------------------------------------------------

    def sparse_blocks(self) -> dict:
        """Q, Q^H, W and H as explicit sparse matrices (H by matrix products)."""
        D = self.D.matrix
        Dh = self.D_dag.matrix
        nu, nl = self.n_upper, self.n_lower
        zu = sp.csr_matrix((nu, nu), dtype=complex)
        zl = sp.csr_matrix((nl, nl), dtype=complex)
        zul = sp.csr_matrix((nu, nl), dtype=complex)
        zlu = sp.csr_matrix((nl, nu), dtype=complex)
        Q = sp.bmat([[zu, D], [zlu, zl]], format="csr")
        Qd = sp.bmat([[zu, zul], [Dh, zl]], format="csr")
        W = sp.diags(np.concatenate([np.ones(nu), -np.ones(nl)])).astype(complex).tocsr()
        H = sp.block_diag([(D @ Dh), (Dh @ D)], format="csr")
        return {"Q": Q, "Q_dag": Qd, "W": W, "H": H}

    def dense_blocks(self) -> dict:
        """Dense versions of ``sparse_blocks``; only for grids with m_xy <= 48."""
        if self.D.domain.m_xy > DENSE_LIMIT:
            raise DimensionMismatch(f"dense blocks only for m_xy <= {DENSE_LIMIT}")
        return {k: v.toarray() for k, v in self.sparse_blocks().items()}


def build_susy(D: SparseOperator) -> SusyBlocks:
    """Supercharges and Hamiltonian of the operator D."""
    if D.rows != D.cols:
        raise DimensionMismatch(f"D must be square, got {D.rows}x{D.cols}")
    if not D.domain.compatible(D.codomain):
        raise DimensionMismatch("domain and codomain layouts differ")
    return SusyBlocks(D, D.conj_transpose(f"{D.tag}_adjoint"))


def _rel(num, den):
    den = max(den, np.finfo(float).tiny)
    return num / den


def verify_algebra(blocks: SusyBlocks, n_vectors: int = 50, seed: int = 0) -> dict:
    """Maximum residuals of the algebra relations over random vectors.

    Structural relations are expected to vanish identically; the
    anticommutator is compared with H assembled by explicit sparse products,
    normalized by |H x|.  ``H_min_rayleigh`` is the smallest Rayleigh quotient
    x^H H x / (|H| |x|^2) seen, which must be non-negative up to rounding.
    """
    rng = np.random.default_rng(seed)
    mats = blocks.sparse_blocks()
    H_explicit = mats["H"]
    h_scale = float(abs(H_explicit).sum(axis=1).max())
    worst = {
        "Q^2": 0.0,
        "Q_dag^2": 0.0,
        "{Q,Q_dag}-H": 0.0,
        "W^2-I": 0.0,
        "{W,Q}": 0.0,
        "{W,Q_dag}": 0.0,
        "[W,H]": 0.0,
        "explicit_Q": 0.0,
        "explicit_Q_dag": 0.0,
    }
    min_rayleigh = np.inf
    for _ in range(n_vectors):
        x = rng.standard_normal(blocks.size) + 1j * rng.standard_normal(blocks.size)
        nx = np.linalg.norm(x)
        Qx, Qdx, Wx = blocks.Q(x), blocks.Q_dag(x), blocks.W(x)
        Hx = H_explicit @ x
        worst["Q^2"] = max(worst["Q^2"], np.linalg.norm(blocks.Q(Qx)))
        worst["Q_dag^2"] = max(worst["Q_dag^2"], np.linalg.norm(blocks.Q_dag(Qdx)))
        anti = blocks.Q(Qdx) + blocks.Q_dag(Qx)
        worst["{Q,Q_dag}-H"] = max(
            worst["{Q,Q_dag}-H"], _rel(np.linalg.norm(anti - Hx), np.linalg.norm(Hx))
        )
        worst["W^2-I"] = max(worst["W^2-I"], np.linalg.norm(blocks.W(Wx) - x))
        worst["{W,Q}"] = max(worst["{W,Q}"], np.linalg.norm(blocks.W(Qx) + blocks.Q(Wx)))
        worst["{W,Q_dag}"] = max(
            worst["{W,Q_dag}"], np.linalg.norm(blocks.W(Qdx) + blocks.Q_dag(Wx))
        )
        worst["[W,H]"] = max(
            worst["[W,H]"], np.linalg.norm(blocks.W(blocks.H(x)) - blocks.H(Wx))
        )
        worst["explicit_Q"] = max(worst["explicit_Q"], np.linalg.norm(mats["Q"] @ x - Qx))
        worst["explicit_Q_dag"] = max(
            worst["explicit_Q_dag"], np.linalg.norm(mats["Q_dag"] @ x - Qdx)
        )
        rq = np.vdot(x, blocks.H(x)).real / (h_scale * nx * nx)
        min_rayleigh = min(min_rayleigh, rq)
    out = {k: float(v) for k, v in worst.items()}
    out["H_min_rayleigh"] = float(min_rayleigh)
    out["H_hermitian"] = float(abs(H_explicit - H_explicit.conj().T).max())
    return out


ALGEBRA_TOLERANCES = {
    "Q^2": 0.0,
    "Q_dag^2": 0.0,
    "{Q,Q_dag}-H": 1e-12,
    "W^2-I": 0.0,
    "{W,Q}": 0.0,
    "{W,Q_dag}": 0.0,
    "[W,H]": 0.0,
    "explicit_Q": 0.0,
    "explicit_Q_dag": 0.0,
    "H_hermitian": 1e-12,
}


def algebra_passes(residuals: dict) -> bool:
    ok = all(residuals[k] <= tol for k, tol in ALGEBRA_TOLERANCES.items())
    return ok and residuals["H_min_rayleigh"] >= -1e-10


def kernel_annihilation(blocks: SusyBlocks, vectors) -> float:
    """max |H_- v| / |v| over kernel vectors of D (lower sector)."""
    worst = 0.0
    for v in vectors:
        vals = v.values if isinstance(v, StateVector) else np.asarray(v)
        worst = max(worst, np.linalg.norm(blocks.H_minus(vals)) / np.linalg.norm(vals))
    return float(worst)


@dataclass(frozen=True, eq=False)
class GradedState:
    parity: int
    payload: StateVector
    assembled: np.ndarray


def grade_state(v: StateVector, sector_rule: dict | None = None) -> GradedState:
    """Embed a sector vector into the full graded space as a W eigenvector.

    Parity -1 states live in the lower block (0, v), parity +1 in the upper
    block (v, 0); both blocks have the length of v.
    """
    rule = PARITY if sector_rule is None else sector_rule
    if v.sector not in rule:
        raise UnknownSector(v.sector)
    parity = rule[v.sector]
    zero = np.zeros_like(v.values)
    assembled = np.concatenate([v.values, zero] if parity == +1 else [zero, v.values])
    return GradedState(parity, v, assembled)


def verify_unbroken(index_report) -> str:
    """'unbroken', 'broken' or 'indeterminate' from the zero-mode counts."""
    if not index_report.resolved:
        return "indeterminate"
    if index_report.witten_index != 0:
        return "unbroken"
    if index_report.n_plus == index_report.n_minus != 0:
        return "unbroken"
    return "broken"


def algebra_report_json(residuals: dict, verdict: str) -> str:
    return json.dumps({"relations": residuals, "unbroken": verdict}, indent=2, sort_keys=True)
