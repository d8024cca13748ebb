import csv
import warnings

import numpy as np
import pytest

from lgvortex.background import (VortexParams, constant_background, energy, flux,
                                 sample_background, solve_profile)
from lgvortex.errors import InterpolationError, InvalidParams
from oracles import rk4_shooting_profile

# frozen from the independent fixed-step RK4 shooting oracle (tests/oracles.py)
GOLDEN = {
    1: (0.8531778659630733, 0.6897374363797018),
    2: (0.47229192684126353, 0.3695592175881458),
    3: (0.2068265302599901, 0.1611552262455416),
}


def test_oracle_reproduces_frozen_values():
    c, f1 = rk4_shooting_profile(1, 1.0)
    assert c == pytest.approx(GOLDEN[1][0], abs=1e-12)
    assert f1[0] == pytest.approx(GOLDEN[1][1], abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("method", ["relaxation", "shooting"])
def test_golden_core_and_f_at_one(cache, n, method):
    prof = cache.profile(n, method)
    f, _ = prof.evaluate(np.array([1.0]))
    assert f[0] == pytest.approx(GOLDEN[n][1], abs=1e-9)
    assert prof.core_coefficient == pytest.approx(GOLDEN[n][0], rel=1e-7)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_profile_invariants(cache, n):
    prof = cache.profile(n)
    assert prof.r[0] == 0.0 and prof.r[-1] == pytest.approx(12.0)
    assert np.all(np.diff(prof.r) > 0)
    assert prof.f[0] == 0.0 and prof.a[0] == 0.0
    assert np.all((prof.f >= 0) & (prof.f <= 1)) and np.all((prof.a >= 0) & (prof.a <= 1))
    assert np.all(np.diff(prof.f) >= 0) and np.all(np.diff(prof.a) >= 0)
    assert prof.f[-1] >= 1 - 1e-3 and prof.a[-1] >= 1 - 1e-3
    assert prof.residual_norm <= 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_shooting_matches_relaxation(cache, n):
    a, b = cache.profile(n, "relaxation"), cache.profile(n, "shooting")
    assert np.max(np.abs(a.f - b.f)) <= 1e-6
    assert np.max(np.abs(a.a - b.a)) <= 1e-6


def test_vacuum_profile():
    prof = solve_profile(VortexParams(0))
    assert np.all(prof.f == 1.0) and np.all(prof.a == 0.0)
    assert prof.residual_norm == 0.0


def test_dimensionless_collapse(cache):
    """(e, v) = (2, 0.5) and (2, 1) collapse onto the (1, 1) profile in x = e v r."""
    ref = cache.profile(1)
    x = np.linspace(0.0, 11.0, 401)
    f0, a0 = ref.evaluate(x)
    for e, v in ((2.0, 0.5), (2.0, 1.0)):
        prof = cache.profile(1, e=e, v=v)
        f, a = prof.evaluate(x / (e * v))
        assert np.max(np.abs(f - f0)) <= 1e-5 and np.max(np.abs(a - a0)) <= 1e-5


def test_invalid_params_and_warning():
    for bad in ({"n": -1}, {"e": 0.0}, {"v": -1.0}, {"m_r": 10}, {"r_max": -2.0}):
        with pytest.raises(InvalidParams):
            VortexParams(**bad)
    with pytest.warns(RuntimeWarning):
        VortexParams(1, r_max=5.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        VortexParams(1)


def test_coarse_profile_rejected_by_sampling():
    prof = solve_profile(VortexParams(1, m_r=64))
    with pytest.raises(InterpolationError):
        sample_background(prof, 128)
    with pytest.raises(InvalidParams):
        sample_background(solve_profile(VortexParams(1)), 32)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_background_invariants(cache, n):
    bg = cache.background(n)
    assert bg.winding_number() == n
    assert np.max(np.abs(bg.phi)) <= bg.params.v + 1e-9
    assert np.all(np.isfinite(bg.phi)) and np.all(np.isfinite(bg.a1)) and np.all(np.isfinite(bg.a2))


def test_phi_nearest_origin(cache):
    prof = cache.profile(1)
    # odd grid: the origin is a node and phi vanishes there
    bg = sample_background(prof, 129)
    X, Y = bg.coords()
    R = np.hypot(X, Y)
    i = np.unravel_index(np.argmin(R), R.shape)
    assert R[i] == 0.0 and abs(bg.phi[i]) == 0.0
    # fine even grid: nearest node off the origin, |phi| follows c r
    bg = sample_background(prof, 384)
    X, Y = bg.coords()
    R = np.hypot(X, Y)
    i = np.unravel_index(np.argmin(R), R.shape)
    assert abs(bg.phi[i]) < 0.05 * bg.params.v
    assert abs(bg.phi[i]) == pytest.approx(GOLDEN[1][0] * R[i], rel=1e-2)


@pytest.mark.parametrize("n", [1, 2])
def test_flux_and_energy(cache, n):
    bg = cache.background(n)
    phi = flux(bg)
    assert abs(phi / (2 * np.pi * n) - 1) < 1e-3
    assert energy(bg) / abs(phi) == pytest.approx(1.0, abs=1e-2)


def test_energy_bound_on_refined_grid(cache):
    bg = cache.background(1, 192)
    assert energy(bg) >= abs(flux(bg)) * (1 - 1e-3)


def test_flux_refinement(cache):
    errs = [abs(flux(cache.background(1, m)) / (2 * np.pi) - 1) for m in (96, 192)]
    assert errs[1] < errs[0]


def test_vacuum_observables():
    bg = sample_background(solve_profile(VortexParams(0)), 64)
    assert flux(bg) == 0.0 and energy(bg) == 0.0
    assert bg.winding_number() == 0
    zero = constant_background(VortexParams(0), 64, phi_value=0.0)
    assert np.all(zero.phi == 0)


def test_csv_exports(cache, tmp_path):
    prof = cache.profile(1)
    with prof.to_csv(tmp_path / "p.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "f", "a", "residual"]
    assert len(rows) == len(prof.r) + 1
    assert float(rows[100][1]) == prof.f[99]  # 17 significant digits round-trip
    bg = cache.background(1, 64)
    with bg.to_csv(tmp_path / "b.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "re_phi", "im_phi", "a1", "a2", "in_domain"]
    assert len(rows) == 64 * 64 + 1
