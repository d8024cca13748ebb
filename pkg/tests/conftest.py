"""Session-cached backgrounds and spectral reports shared across test modules."""
import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lgvortex.background import VortexParams, sample_background, solve_profile  # noqa: E402
from lgvortex.operators import assemble_D, assemble_D_boson  # noqa: E402
from lgvortex.spectral import compute_index, smallest_singulars  # noqa: E402


@functools.lru_cache(maxsize=None)
def profile(n, method="relaxation", e=1.0, v=1.0, r_max=None):
    return solve_profile(VortexParams(n=n, e=e, v=v, r_max=r_max), method)


@functools.lru_cache(maxsize=None)
def background(n, m_xy=128, r_max=None):
    return sample_background(profile(n, r_max=r_max), m_xy)


@functools.lru_cache(maxsize=None)
def index_report(n, m_xy=128, r_max=None, scheme="central2"):
    return compute_index(background(n, m_xy, r_max), scheme=scheme)


@functools.lru_cache(maxsize=None)
def boson_reports(n, m_xy=128):
    Db = assemble_D_boson(background(n, m_xy))
    return (smallest_singulars(Db), smallest_singulars(Db.conj_transpose("D_boson_adjoint")))


@functools.lru_cache(maxsize=None)
def operator_D(n, m_xy=128, scheme="central2"):
    return assemble_D(background(n, m_xy), scheme)


@pytest.fixture(scope="session")
def cache():
    """Namespace of cached builders (results persist for the whole session)."""
    class _C:
        pass

    c = _C()
    c.profile = profile
    c.background = background
    c.index_report = index_report
    c.boson_reports = boson_reports
    c.operator_D = operator_D
    return c
