import json

import numpy as np
import pytest

from lgvortex.channels import cross_check, radial_channel_oracle, total_kernel
from lgvortex.errors import CrossCheckFailure
from lgvortex.operators import assemble_D
from lgvortex.spectral import SIGN_NOTE, smallest_singulars
from lgvortex.susy import verify_unbroken


def _real_gram(vectors):
    V = np.array([v.values for v in vectors]).T
    h = vectors[0].h
    return h * h * np.real(V.conj().T @ V)


def test_n1_kernel_and_adjoint(cache):
    rep = cache.index_report(1)
    d, dh = rep.d_report, rep.adjoint_report
    assert d.kernel_count == 2 and d.gap_ratio > 10 and d.resolved
    assert dh.kernel_count == 0 and dh.resolved
    assert dh.sigma[0] >= 0.1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_report_invariants(cache, n):
    d = cache.index_report(n).d_report
    assert np.all(np.diff(d.sigma) >= 0) and np.all(d.sigma >= 0)
    assert d.solver_meta["max_residual"] <= 1e-8
    G = _real_gram(d.vectors)
    assert np.max(np.abs(G - np.eye(len(d.vectors)))) <= 1e-9
    assert d.tol_zero == pytest.approx(1e-3)
    # raw counts include the doubler species
    assert d.raw_kernel_count == 4 * n


@pytest.mark.parametrize("n", [1, 3])
def test_index_magnitude_and_pairing(cache, n):
    rep = cache.index_report(n)
    assert rep.resolved
    assert rep.witten_index == rep.fredholm_index == rep.n_minus - rep.n_plus
    assert abs(rep.witten_index) == 2 * n
    assert rep.witten_index == 2 * n  # sign under the n_minus - n_plus convention
    assert rep.pairing_error <= 1e-8
    assert rep.sign_note == SIGN_NOTE


def test_kernel_vectors_are_annihilated(cache):
    d = cache.index_report(1).d_report
    D = cache.operator_D(1)
    for v in d.kernel_vectors():
        assert np.linalg.norm(D.matrix @ v.values) / np.linalg.norm(v.values) < 1e-3


def test_canonical_phase(cache):
    d = cache.index_report(2).d_report
    for v in d.vectors[::2]:
        k = np.argmax(np.abs(v.values))
        assert v.values[k].imag == 0.0 and v.values[k].real > 0


def test_vacuum_empty_kernel(cache):
    rep = cache.index_report(0, 64)
    assert rep.n_minus == rep.n_plus == rep.witten_index == 0
    assert rep.resolved
    assert rep.d_report.sigma[0] > 1.0
    assert verify_unbroken(rep) == "broken"


def test_verdicts(cache):
    assert verify_unbroken(cache.index_report(1)) == "unbroken"

    class Unresolved:
        resolved = False
        witten_index = 2
        n_plus = 0
        n_minus = 2

    class Paired:
        resolved = True
        witten_index = 0
        n_plus = 2
        n_minus = 2

    assert verify_unbroken(Unresolved) == "indeterminate"
    assert verify_unbroken(Paired) == "unbroken"


def test_determinism_and_json(cache, tmp_path):
    bg = cache.background(1, 96)
    a = smallest_singulars(assemble_D(bg), seed=0)
    b = smallest_singulars(assemble_D(bg), seed=0)
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json(tmp_path / "r.json"))
    for key in ("operator_tag", "sigma", "kernel_count", "gap_ratio", "tol_zero", "solver_meta"):
        assert key in d
    path = a.mode_csv(0, tmp_path / "m.csv")
    header = path.read_text().splitlines()[0]
    assert header == "x,y,re_c0,im_c0,re_c1,im_c1"


def test_small_k_still_reports_gap(cache):
    rep = smallest_singulars(cache.operator_D(1, 96), k=1)
    assert rep.kernel_count == 2 and len(rep.sigma) > rep.kernel_count


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_channel_oracle_totals(cache, n):
    prof = cache.profile(n)
    counts = radial_channel_oracle(prof)
    assert total_kernel(counts) == 2 * n
    assert total_kernel(radial_channel_oracle(prof, adjoint=True)) == 0
    for c in counts:
        assert c.kernel_count == (2 if 0 <= c.m <= n - 1 else 0)


def test_channel_cross_check(cache):
    counts = radial_channel_oracle(cache.profile(1), m_range=(-1, 2))
    cross_check(counts, 2)
    with pytest.raises(CrossCheckFailure):
        cross_check(counts, 4)


@pytest.mark.parametrize("n", [1, 2])
def test_channels_match_2d(cache, n):
    rep = cache.index_report(n)
    prof = cache.profile(n)
    assert total_kernel(radial_channel_oracle(prof)) == rep.n_minus
    assert total_kernel(radial_channel_oracle(prof, adjoint=True)) == rep.n_plus
