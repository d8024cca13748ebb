"""Fermion to boson map for zero modes.

A lower-sector fermion mode (psi_down, chi_up) is read as the bosonic
fluctuation

    dphi = psi_down,      dA1 + i dA2 = -i sqrt2 chi_up,

so the pair is stored in the fermionic variables and the real gauge
fluctuations are derived on demand.  This keeps the round trip bitwise exact.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .background import Background2D
from .errors import GridMismatch, SectorMismatch, WrongKernelDimension
from .operators import Layout, StateVector, assemble_bosonic_equations

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class FluctuationPair:
    state: StateVector  # boson sector: (dphi, (i/sqrt2)(dA1 + i dA2))
    source_mode: StateVector | None = None

    @property
    def layout(self) -> Layout:
        return self.state.layout

    @property
    def h(self) -> float:
        return self.state.h

    @property
    def _chi(self) -> np.ndarray:
        return self.state.values[self.layout.n_points:]

    @property
    def delta_phi(self) -> np.ndarray:
        return self.state.values[: self.layout.n_points]

    @property
    def delta_A1(self) -> np.ndarray:
        # Re(-i sqrt2 chi) = sqrt2 Im chi
        return SQRT2 * self._chi.imag

    @property
    def delta_A2(self) -> np.ndarray:
        # Im(-i sqrt2 chi) = -sqrt2 Re chi
        return -SQRT2 * self._chi.real

    @property
    def gauge_fluctuation(self) -> np.ndarray:
        """dA1 + i dA2."""
        return self.delta_A1 + 1j * self.delta_A2

    def norm(self) -> float:
        """sqrt(h^2 sum |dphi|^2 + dA1^2 + dA2^2)."""
        tot = np.sum(np.abs(self.delta_phi) ** 2 + self.delta_A1**2 + self.delta_A2**2)
        return float(self.h * np.sqrt(tot))

    @classmethod
    def from_fields(cls, delta_phi, delta_A1, delta_A2, layout: Layout, h: float):
        """Build a pair from field samples in layout point order."""
        dA1 = np.asarray(delta_A1, dtype=float)
        dA2 = np.asarray(delta_A2, dtype=float)
        chi = (1j / SQRT2) * (dA1 + 1j * dA2)
        vals = np.concatenate([np.asarray(delta_phi, dtype=complex), chi])
        return cls(StateVector(vals, layout.with_sector("boson"), h))

    def to_csv(self, path) -> Path:
        xs, ys = self.layout.point_coords()
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "re_dphi", "im_dphi", "dA1", "dA2"])
            for row in zip(xs, ys, self.delta_phi.real, self.delta_phi.imag,
                           self.delta_A1, self.delta_A2):
                w.writerow([format(float(v), ".17g") for v in row])
        return path


def fermion_to_boson(mode: StateVector) -> FluctuationPair:
    if mode.sector != "fermion_lower":
        raise SectorMismatch(f"expected a fermion_lower mode, got {mode.sector}")
    state = StateVector(mode.values.copy(), mode.layout.with_sector("boson"), mode.h)
    return FluctuationPair(state, mode)


def boson_to_fermion(pair: FluctuationPair) -> StateVector:
    return StateVector(pair.state.values.copy(), pair.layout.with_sector("fermion_lower"),
                       pair.h)


def _check_grid(pair: FluctuationPair, bg: Background2D):
    lay = pair.layout
    if lay.mask.shape != bg.mask.shape or not np.array_equal(lay.mask, bg.mask):
        raise GridMismatch("fluctuation pair and background live on different grids")
    if not np.isclose(pair.h, bg.h, rtol=1e-12, atol=0.0):
        raise GridMismatch(f"grid spacing {pair.h} != {bg.h}")


def bosonic_equation_residuals(pair: FluctuationPair, bg: Background2D,
                               scheme: str = "central2") -> tuple[float, float]:
    """Discrete L2 norms of the two bosonic zero-mode equations."""
    _check_grid(pair, bg)
    E = assemble_bosonic_equations(bg, scheme)
    x = np.concatenate([pair.delta_phi, pair.gauge_fluctuation])
    r = E @ x
    N = pair.layout.n_points
    h = pair.h
    return float(h * np.linalg.norm(r[:N])), float(h * np.linalg.norm(r[N:]))


def bosonic_residual(pair: FluctuationPair, bg: Background2D, scheme: str = "central2") -> float:
    """Largest of the two bosonic equation residual norms."""
    return max(bosonic_equation_residuals(pair, bg, scheme))


def translation_modes(bg: Background2D) -> list[StateVector]:
    """Covariant translations of an n=1 background in (dphi, chi) variables.

    Shifting along x gives dphi = D1 phi = v f'(r) e^{i(n-1) theta} and
    dA_j = F_1j, i.e. chi = -F12 / sqrt2 = -e v^2 (1 - f^2) / sqrt2.  The shift
    along y is i times this.  Both already satisfy the background gauge
    condition, so no pure-gauge part has to be removed.
    """
    prof = bg.profile
    if prof is None:
        raise WrongKernelDimension("translation modes need the radial profile of the background")
    n, e, v = bg.params.n, bg.params.e, bg.params.v
    if n != 1:
        raise WrongKernelDimension(f"translation modes are the whole kernel only for n = 1 (n = {n})")
    X, Y = bg.coords()
    R = np.hypot(X[bg.mask], Y[bg.mask])
    f, _ = prof.evaluate(R)
    dphi = v * prof.f_prime(R)
    chi = -e * v * v * (1.0 - f * f) / SQRT2
    lay = Layout(bg.mask, "fermion_lower", bg.xs)
    mode_x = np.concatenate([dphi.astype(complex), chi.astype(complex)])
    return [StateVector(mode_x, lay, bg.h), StateVector(1j * mode_x, lay, bg.h)]


def _real_basis(vectors) -> np.ndarray:
    """Orthonormal basis (real inner product) of the real span of complex vectors."""
    cols = []
    for vec in vectors:
        vals = vec.values if isinstance(vec, StateVector) else np.asarray(vec)
        cols.append(np.concatenate([vals.real, vals.imag]))
    A = np.array(cols).T
    Q, _ = np.linalg.qr(A)
    return Q


def subspace_overlap(a, b) -> float:
    """Smallest cosine of the principal angles between two real spans."""
    Qa, Qb = _real_basis(a), _real_basis(b)
    s = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return float(min(1.0, s.min()))


def translation_mode_overlap(bg: Background2D, kernel_basis) -> float:
    """Overlap between a numerical n=1 kernel (real dimension 2) and the
    analytic translation modes."""
    if len(kernel_basis) != 2:
        raise WrongKernelDimension(f"expected a 2-dimensional kernel, got {len(kernel_basis)}")
    return subspace_overlap(kernel_basis, translation_modes(bg))
