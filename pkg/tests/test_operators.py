import dataclasses

import numpy as np
import pytest

from lgvortex.background import VortexParams, constant_background
from lgvortex.errors import (LayoutMismatch, SectorMismatch, StencilOverflow, UnknownSector)
from lgvortex.operators import (Layout, StateVector, assemble_bosonic_equations, assemble_D,
                                assemble_D_adjoint, assemble_D_boson, load_operator_entries)
from oracles import matrix_free_D

SQRT2 = np.sqrt(2.0)


def _random_state(op, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(op.cols) + 1j * rng.standard_normal(op.cols)
    return StateVector(vals, op.domain, op.h)


@pytest.mark.parametrize("scheme", ["central2", "central4"])
def test_matches_matrix_free_stencil(cache, scheme):
    bg = cache.background(1, 64)
    D = assemble_D(bg, scheme)
    u = _random_state(D, 3)
    grid = D.domain.to_grid(u.values)
    top, bot = matrix_free_D(grid[0], grid[1], bg.phi, bg.a1, bg.a2, bg.mask, bg.params.e,
                             bg.h, scheme)
    ref = D.codomain.from_grid(np.stack([top, bot]))
    got = D.apply(u).values
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_layout_and_row_structure(cache):
    bg = cache.background(1, 128)
    for scheme, cap in (("central2", 6), ("central4", 10)):
        D = assemble_D(bg, scheme)
        assert D.rows == D.cols == 2 * int(bg.mask.sum())
        assert D.max_row_entries() <= cap
        r, c, _ = D.entries()
        key = r.astype(np.int64) * D.cols + c
        assert np.all(np.diff(key) > 0)  # sorted by (row, col), no duplicates


def _test_fields(X, Y):
    """Smooth test pair with analytic derivatives."""
    g = np.exp(-(X**2 + Y**2) / 4.0)
    psi = g * np.exp(0.5j * X)
    chi = np.exp(-((X - 1.0) ** 2 + Y**2) / 3.0) + 0j
    dpsi1 = psi * (-X / 2.0 + 0.5j)
    dpsi2 = psi * (-Y / 2.0)
    dchi1 = chi * (-2.0 * (X - 1.0) / 3.0)
    dchi2 = chi * (-2.0 * Y / 3.0)
    return psi, chi, (dpsi1, dpsi2), (dchi1, dchi2)


def _continuum_error(bg, scheme):
    D = assemble_D(bg, scheme)
    X, Y = bg.coords()
    psi, chi, dp, dc = _test_fields(X, Y)
    e, phi = bg.params.e, bg.phi
    top = dp[0] + 1j * dp[1] - 1j * e * (bg.a1 + 1j * bg.a2) * psi - SQRT2 * e * phi * chi
    bot = -SQRT2 * e * np.conj(phi) * psi + dc[0] - 1j * dc[1]
    lay = D.domain
    u = lay.from_grid(np.stack([psi, chi]))
    ref = D.codomain.from_grid(np.stack([top, bot]))
    return np.max(np.abs(D.matrix @ u - ref))


@pytest.mark.parametrize("scheme,order", [("central2", 2.0), ("central4", 4.0)])
def test_convergence_order(cache, scheme, order):
    hs, errs = [], []
    for m in (64, 128, 256):
        bg = cache.background(1, m)
        hs.append(bg.h)
        errs.append(_continuum_error(bg, scheme))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - order) <= 0.3, (slope, errs)


def test_adjoint_is_exact_conjugate_transpose(cache):
    bg = cache.background(1, 64)
    D = assemble_D(bg)
    Dh = assemble_D_adjoint(bg)
    assert (Dh.matrix != D.matrix.conj().T.tocsr()).nnz == 0
    assert Dh.domain.sector == "fermion_upper" and Dh.codomain.sector == "fermion_lower"


def test_inner_product_identity(cache):
    bg = cache.background(1, 128)
    D = assemble_D(bg)
    Dh = D.conj_transpose()
    rng = np.random.default_rng(11)
    for _ in range(100):
        u = StateVector(rng.standard_normal(D.cols) + 1j * rng.standard_normal(D.cols),
                        D.domain, D.h)
        w = StateVector(rng.standard_normal(D.rows) + 1j * rng.standard_normal(D.rows),
                        D.codomain, D.h)
        lhs = D.apply(u).inner(w)
        rhs = u.inner(Dh.apply(w))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs) + 1e-12


def test_vacuum_plane_wave():
    bg = constant_background(VortexParams(0), 128)
    D = assemble_D(bg)
    Dh = D.conj_transpose()
    X, Y = bg.coords()
    k, h = 0.7, bg.h
    wave = np.exp(1j * k * X)
    R = np.hypot(X, Y)
    interior = (R < bg.params.r_max - 3 * h)[bg.mask]
    N = D.domain.n_points
    expect_deriv = 1j * k * wave[bg.mask]
    bound = k**3 * h * h / 6.0 * 1.01 + 1e-12

    out = D.matrix @ D.domain.from_grid(np.stack([wave, 0 * wave]))
    assert np.max(np.abs(out[:N] - expect_deriv)[interior]) <= bound
    assert np.max(np.abs(out[N:] + SQRT2 * wave[bg.mask])) <= 1e-14

    # adjoint: (-(d1 - i d2) psi - sqrt2 e v chi, -sqrt2 e v psi - (d1 + i d2) chi)
    out = Dh.matrix @ Dh.domain.from_grid(np.stack([wave, 0 * wave]))
    assert np.max(np.abs(out[:N] + expect_deriv)[interior]) <= bound
    assert np.max(np.abs(out[N:] + SQRT2 * wave[bg.mask])) <= 1e-14


def test_gauge_covariance(cache):
    """D[phi e^{ie L}, A + dL] = U D[phi, A] U^-1 with U = diag(e^{ie L}, 1),
    up to discretization error that shrinks with h."""
    errs = []
    for m in (64, 128):
        bg = cache.background(1, m)
        e = bg.params.e
        X, Y = bg.coords()
        lam = 0.3 * np.sin(0.4 * X) * np.cos(0.3 * Y)
        d1 = 0.12 * np.cos(0.4 * X) * np.cos(0.3 * Y)
        d2 = -0.09 * np.sin(0.4 * X) * np.sin(0.3 * Y)
        gbg = dataclasses.replace(bg, phi=bg.phi * np.exp(1j * e * lam), a1=bg.a1 + d1,
                                  a2=bg.a2 + d2)
        D, Dg = assemble_D(bg), assemble_D(gbg)
        psi, chi, _, _ = _test_fields(X, Y)
        ph = np.exp(1j * e * lam)
        lay = D.domain
        lhs = Dg.matrix @ lay.from_grid(np.stack([ph * psi, chi]))
        rhs_grid = D.codomain.to_grid(D.matrix @ lay.from_grid(np.stack([psi, chi])))
        rhs = D.codomain.from_grid(np.stack([ph * rhs_grid[0], rhs_grid[1]]))
        errs.append(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    assert errs[0] < 1e-2
    assert errs[1] < errs[0] / 3.0


@pytest.mark.parametrize("m_xy,r_max,has_null", [(34, 4.0, False), (32, 4.0, True)])
def test_zero_field_is_block_cauchy_riemann(m_xy, r_max, has_null):
    """phi = 0, A = 0: off-diagonal blocks vanish and no smooth vector is
    annihilated.  Whatever near-null directions the naive stencil has on a
    given disk are mixtures of the high-momentum doubler species."""
    with pytest.warns(RuntimeWarning):
        params = VortexParams(0, r_max=r_max)
    bg = constant_background(params, m_xy, phi_value=0.0)
    D = assemble_D(bg)
    M = D.matrix.toarray()
    N = D.domain.n_points
    assert not np.any(M[:N, N:]) and not np.any(M[N:, :N])
    lam, V = np.linalg.eigh(M.conj().T @ M)
    sigma = np.sqrt(np.clip(lam, 0.0, None))
    null = V[:, sigma < 1e-3]
    assert (null.shape[1] > 0) == has_null
    if not has_null:
        assert sigma.min() > 0.1
        return
    F = np.fft.fft2(D.domain.to_grid(null.T), norm="ortho")
    freq = np.fft.fftfreq(bg.m_xy)
    box = np.outer(np.abs(freq) < 0.25, np.abs(freq) < 0.25)
    W = F[..., box].reshape(null.shape[1], -1).T
    assert np.linalg.eigvalsh(W.conj().T @ W).max() < 0.5


def test_stencil_overflow():
    bg = constant_background(VortexParams(0), 64)
    strong = dataclasses.replace(bg, a1=np.full_like(bg.a1, 2.0))
    with pytest.raises(StencilOverflow):
        assemble_D(strong)


@pytest.mark.parametrize("n", [0, 1, 2])
@pytest.mark.parametrize("scheme", ["central2", "central4"])
def test_boson_operator_bit_identical(cache, n, scheme):
    bg = cache.background(n, 64)
    D = assemble_D(bg, scheme)
    Db = assemble_D_boson(bg, scheme)
    assert D.equals(Db)
    assert Db.domain.sector == "boson"


def test_bosonic_equations_reduce_to_D(cache):
    """Applying the substitution by hand to the bosonic equations recovers D."""
    bg = cache.background(1, 64)
    E = assemble_bosonic_equations(bg)
    D = assemble_D(bg)
    u = _random_state(D, 5).values
    N = D.domain.n_points
    x = np.concatenate([u[:N], -1j * SQRT2 * u[N:]])
    r = E @ x
    via_eqs = np.concatenate([r[:N], 1j / SQRT2 * r[N:]])
    assert np.allclose(via_eqs, D.matrix @ u, rtol=0, atol=1e-12 * np.abs(via_eqs).max())


def test_export_roundtrip(cache, tmp_path):
    D = cache.operator_D(1, 64)
    path = D.export(tmp_path / "D.txt")
    header = path.read_text().splitlines()[0]
    assert header.startswith("# ") and header.split()[1:4] == [str(D.rows), str(D.cols),
                                                                 str(D.nnz)]
    shape, h, scheme, M = load_operator_entries(path)
    assert shape == (D.rows, D.cols) and h == D.h and scheme == D.scheme
    assert (M != D.matrix).nnz == 0


def test_layout_errors(cache):
    bg = cache.background(1, 64)
    lay = Layout(bg.mask, "fermion_lower", bg.xs)
    with pytest.raises(UnknownSector):
        Layout(bg.mask, "gluon")
    with pytest.raises(LayoutMismatch):
        lay.to_grid(np.zeros(lay.size + 1))
    with pytest.raises(LayoutMismatch):
        lay.index(lay.n_points, 0)
    D = assemble_D(bg)
    wrong = StateVector(np.zeros(D.cols, complex), lay.with_sector("fermion_upper"), D.h)
    with pytest.raises(SectorMismatch):
        D.apply(wrong)


def test_state_norm_measure(cache):
    D = cache.operator_D(1, 64)
    v = StateVector(np.ones(D.cols, complex), D.domain, D.h)
    assert np.isclose(v.norm() ** 2, D.h**2 * D.cols, rtol=1e-14)
