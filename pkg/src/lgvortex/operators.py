"""Finite-difference assembly of the zero-mode operators on a masked 2D grid.

D acts on the lower fermion pair (psi_down, chi_up):

    D = [[ D1 + i D2 , -sqrt2 e phi ],
         [ -sqrt2 e phi*, d1 - i d2   ]],     D_j = d_j - i e A_j,

and D^H is its conjugate transpose.  The bosonic operator D' is assembled
from the linearized self-duality equations for (dphi, dA1 + i dA2) followed by
the substitution chi = (i/sqrt2)(dA1 + i dA2); it reproduces D entry for entry.

Scalar prefactors are carried as exact monomials (rational * sqrt2^k * i^j *
e^p) so that both routes to an entry evaluate the identical floating point
expression.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .background import Background2D
from .errors import InvalidParams, LayoutMismatch, SectorMismatch, StencilOverflow, UnknownSector

SQRT2 = float(np.sqrt(2.0))

SCHEMES = {
    # offset -> antisymmetric first-derivative weight
    "central2": {1: Fraction(1, 2)},
    "central4": {1: Fraction(2, 3), 2: Fraction(-1, 12)},
}
SECTORS = ("fermion_lower", "fermion_upper", "boson")


# -- exact scalar prefactors ------------------------------------------------------

@dataclass(frozen=True)
class Coef:
    """rational * sqrt2**s * i**j * e**p in canonical form (s, j in {0, 1})."""

    rational: Fraction = Fraction(1)
    s: int = 0
    j: int = 0
    p: int = 0

    @staticmethod
    def make(rational=1, s=0, j=0, p=0) -> "Coef":
        q = Fraction(rational) * Fraction(2) ** (s // 2)
        j %= 4
        if j >= 2:
            q, j = -q, j - 2
        return Coef(q, s % 2, j, p)

    def __mul__(self, other: "Coef") -> "Coef":
        return Coef.make(self.rational * other.rational, self.s + other.s,
                         self.j + other.j, self.p + other.p)

    def magnitude(self, e: float) -> float:
        m = float(self.rational)
        if self.s:
            m = m * SQRT2
        if self.p:
            m = m * e**self.p
        return m

    def apply(self, values, e: float) -> np.ndarray:
        """Multiply an array by this prefactor; i**j is applied as an exact rotation."""
        values = np.asarray(values, dtype=complex)
        m = self.magnitude(e)
        re, im = m * values.real, m * values.imag
        out = np.empty(values.shape, dtype=complex)
        if self.j:
            out.real, out.imag = -im, re
        else:
            out.real, out.imag = re, im
        return out


ONE = Coef.make()
I = Coef.make(j=1)


# -- layout -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Layout:
    """Component-major ordering: index = component * n_points + point, points
    in row-major order over the in-domain mask."""

    mask: np.ndarray
    sector: str = "fermion_lower"
    xs: np.ndarray | None = None

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise UnknownSector(self.sector)
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @property
    def m_xy(self) -> int:
        return self.mask.shape[0]

    @property
    def n_points(self) -> int:
        return int(self.mask.sum())

    @property
    def size(self) -> int:
        return 2 * self.n_points

    def point_index(self) -> np.ndarray:
        idx = -np.ones(self.mask.shape, dtype=np.int64)
        idx[self.mask] = np.arange(self.n_points)
        return idx

    def index(self, point: int, component: int) -> int:
        if component not in (0, 1) or not 0 <= point < self.n_points:
            raise LayoutMismatch(f"no slot for point {point}, component {component}")
        return component * self.n_points + point

    def to_grid(self, values) -> np.ndarray:
        """Vector (..., size) -> array (..., 2, m_xy, m_xy), zero outside the domain."""
        values = np.asarray(values)
        if values.shape[-1] != self.size:
            raise LayoutMismatch(f"vector length {values.shape[-1]} != layout size {self.size}")
        lead = values.shape[:-1]
        out = np.zeros(lead + (2,) + self.mask.shape, dtype=complex)
        N = self.n_points
        out[..., 0, self.mask] = values[..., :N]
        out[..., 1, self.mask] = values[..., N:]
        return out

    def from_grid(self, grid) -> np.ndarray:
        grid = np.asarray(grid)
        return np.concatenate([grid[..., 0, self.mask], grid[..., 1, self.mask]], axis=-1)

    def compatible(self, other: "Layout") -> bool:
        return self.mask.shape == other.mask.shape and bool(np.array_equal(self.mask, other.mask))

    def with_sector(self, sector: str) -> "Layout":
        return Layout(self.mask, sector, self.xs)

    def point_coords(self):
        """(x, y) of the in-domain points in layout order."""
        if self.xs is None:
            raise LayoutMismatch("layout carries no grid coordinates")
        X, Y = np.meshgrid(self.xs, self.xs, indexing="ij")
        return X[self.mask], Y[self.mask]


@dataclass(frozen=True, eq=False)
class StateVector:
    values: np.ndarray
    layout: Layout
    h: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.layout.size,):
            raise LayoutMismatch(f"state of length {vals.size} for layout of size {self.layout.size}")
        if not np.all(np.isfinite(vals)):
            raise InvalidParams("state vector has non-finite entries")
        object.__setattr__(self, "values", vals)

    @property
    def sector(self) -> str:
        return self.layout.sector

    def inner(self, other: "StateVector") -> complex:
        """Discrete L2 product h^2 sum conj(self) other."""
        if other.sector != self.sector:
            raise SectorMismatch(f"{self.sector} vs {other.sector}")
        return complex(self.h**2 * np.vdot(self.values, other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.h**2 * np.vdot(self.values, self.values).real))


# -- sparse operator -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SparseOperator:
    matrix: sp.csr_matrix
    domain: Layout
    codomain: Layout
    h: float
    scheme: str
    e: float
    tag: str
    v: float = 1.0
    boundary: str = "dirichlet"

    @property
    def ev(self) -> float:
        return self.e * self.v

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def layout(self) -> Layout:
        return self.domain

    def entries(self):
        """(row, col, value) arrays sorted by (row, col)."""
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data

    def max_row_entries(self) -> int:
        return int(np.diff(self.matrix.indptr).max(initial=0))

    def apply(self, state):
        """Apply to a StateVector (sector checked) or to a raw array of columns."""
        if isinstance(state, StateVector):
            if state.sector != self.domain.sector:
                raise SectorMismatch(f"{self.tag} acts on {self.domain.sector}, got {state.sector}")
            return StateVector(self.matrix @ state.values, self.codomain, self.h)
        arr = np.asarray(state)
        if arr.shape[0] != self.cols:
            raise LayoutMismatch(f"vector length {arr.shape[0]} != {self.cols}")
        return self.matrix @ arr

    def conj_transpose(self, tag: str | None = None) -> "SparseOperator":
        return SparseOperator(
            _canonical(self.matrix.conj().T), self.codomain, self.domain, self.h,
            self.scheme, self.e, tag or f"{self.tag}^H", self.v, self.boundary,
        )

    def export(self, path) -> Path:
        path = Path(path)
        r, c, vals = self.entries()
        with path.open("w") as fh:
            fh.write(f"# {self.rows} {self.cols} {self.nnz} {self.h!r} {self.scheme}\n")
            for ri, ci, v in zip(r, c, vals):
                fh.write(f"{ri} {ci} {v.real:.17g} {v.imag:.17g}\n")
        return path

    def equals(self, other: "SparseOperator") -> bool:
        """Entrywise bit-exact equality of the stored matrices."""
        a, b = self.matrix, other.matrix
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )


def load_operator_entries(path):
    """Read an exported operator back as (shape, h, scheme, csr_matrix)."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().lstrip("#").split()
    rows, cols, nnz = (int(x) for x in header[:3])
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[0] != nnz:
        raise LayoutMismatch(f"header promises {nnz} entries, found {data.shape[0]}")
    mat = sp.csr_matrix(
        (data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
        shape=(rows, cols),
    )
    return (rows, cols), float(header[3]), header[4], mat


def _canonical(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


# -- block construction ------------------------------------------------------------
# A block is a list of terms acting from one scalar field to another:
#   ("shift", axis, coef)         first-derivative stencil along axis, times coef
#   ("diag", values, coef)        pointwise multiplication by coef * values

def _stencil_entries(bg: Background2D, scheme: str, axis: int, idx: np.ndarray):
    """(rows, cols, weights) of the masked first-derivative stencil, weights as Fractions."""
    mask = bg.mask
    m = mask.shape[0]
    I, J = np.nonzero(mask)
    out = []
    for off, w in SCHEMES[scheme].items():
        for sign in (1, -1):
            I2 = I + (sign * off if axis == 0 else 0)
            J2 = J + (sign * off if axis == 1 else 0)
            ok = (I2 >= 0) & (I2 < m) & (J2 >= 0) & (J2 < m)
            ok[ok] &= mask[I2[ok], J2[ok]]
            out.append((idx[I[ok], J[ok]], idx[I2[ok], J2[ok]], sign * w))
    return out


def _block_matrix(terms, bg: Background2D, scheme: str, idx: np.ndarray, N: int):
    e, h = bg.params.e, bg.h
    rows, cols, vals = [], [], []
    for term in terms:
        if term[0] == "shift":
            _, axis, coef = term
            for r, c, w in _stencil_entries(bg, scheme, axis, idx):
                val = (Coef.make(w) * coef).apply(np.ones(1), e)[0] / h
                rows.append(r)
                cols.append(c)
                vals.append(np.full(r.shape, val))
        else:
            _, values, coef = term
            p = np.arange(N)
            rows.append(p)
            cols.append(p)
            vals.append(coef.apply(values[bg.mask], e))
    if not rows:
        return sp.csr_matrix((N, N), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N), dtype=complex,
    )


def _scale_terms(terms, coef: Coef):
    return [t[:-1] + (t[-1] * coef,) for t in terms]


def _check(bg: Background2D, scheme: str):
    if scheme not in SCHEMES:
        raise InvalidParams(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    eA = bg.params.e * np.hypot(bg.a1[bg.mask], bg.a2[bg.mask])
    worst = float(eA.max(initial=0.0)) * bg.h
    if worst >= 0.5:
        raise StencilOverflow(f"max|eA| h = {worst:.3g} >= 0.5; refine the grid")


def _assemble(blocks, bg: Background2D, scheme: str) -> sp.csr_matrix:
    idx = Layout(bg.mask).point_index()
    N = int(bg.mask.sum())
    mats = [[_block_matrix(blocks[r][c], bg, scheme, idx, N) for c in range(2)] for r in range(2)]
    return _canonical(sp.bmat(mats, format="csr"))


def _d_plus(bg):
    """D1 + i D2 = d1 + i d2 - i e (A1 + i A2)."""
    return [
        ("shift", 0, ONE),
        ("shift", 1, I),
        ("diag", bg.a1 + 1j * bg.a2, Coef.make(j=3, p=1)),
    ]


def _d_bar():
    """d1 - i d2."""
    return [("shift", 0, ONE), ("shift", 1, Coef.make(j=3))]


def assemble_D(bg: Background2D, scheme: str = "central2") -> SparseOperator:
    """Fermionic zero-mode operator on (psi_down, chi_up)."""
    _check(bg, scheme)
    yukawa = Coef.make(-1, s=1, p=1)  # -sqrt2 e
    blocks = [
        [_d_plus(bg), [("diag", bg.phi, yukawa)]],
        [[("diag", np.conj(bg.phi), yukawa)], _d_bar()],
    ]
    lay = Layout(bg.mask, "fermion_lower", bg.xs)
    return SparseOperator(_assemble(blocks, bg, scheme), lay, lay.with_sector("fermion_upper"),
                          bg.h, scheme, bg.params.e, "D", bg.params.v)


def assemble_D_adjoint(bg: Background2D, scheme: str = "central2") -> SparseOperator:
    """Conjugate transpose of assemble_D, acting on (psi_up, chi_down)."""
    return assemble_D(bg, scheme).conj_transpose("D_adjoint")


def _bosonic_equation_blocks(bg: Background2D):
    """Linearized self-duality equations in the variables (dphi, W = dA1 + i dA2):

        (D1 + i D2) dphi - i e phi W = 0
        (d1 - i d2) W + 2 i e phi* dphi = 0
    """
    return [
        [_d_plus(bg), [("diag", bg.phi, Coef.make(j=3, p=1))]],
        [[("diag", np.conj(bg.phi), Coef.make(2, j=1, p=1))], _d_bar()],
    ]


def assemble_bosonic_equations(bg: Background2D, scheme: str = "central2") -> sp.csr_matrix:
    """Matrix of the two bosonic zero-mode equations acting on (dphi, dA1 + i dA2)."""
    _check(bg, scheme)
    return _assemble(_bosonic_equation_blocks(bg), bg, scheme)


def assemble_D_boson(bg: Background2D, scheme: str = "central2") -> SparseOperator:
    """Bosonic zero-mode operator on (dphi, (i/sqrt2)(dA1 + i dA2)).

    Starts from the bosonic equations (see ``_bosonic_equation_blocks``),
    substitutes W = -i sqrt2 chi and multiplies the second equation by
    i/sqrt2 so that both equations are written for the same unknown pair.
    """
    _check(bg, scheme)
    eqs = _bosonic_equation_blocks(bg)
    col_sub = [ONE, Coef.make(s=1, j=3)]                     # W = -i sqrt2 chi
    row_scale = [ONE, Coef.make(Fraction(1, 2), s=1, j=1)]  # i / sqrt2
    blocks = [
        [_scale_terms(_scale_terms(eqs[r][c], col_sub[c]), row_scale[r]) for c in range(2)]
        for r in range(2)
    ]
    lay = Layout(bg.mask, "boson", bg.xs)
    return SparseOperator(_assemble(blocks, bg, scheme), lay, lay, bg.h, scheme,
                          bg.params.e, "D_boson", bg.params.v)
