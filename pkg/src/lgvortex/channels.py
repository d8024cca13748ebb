"""Angular-momentum decomposition of the zero-mode equations.

On the rotationally symmetric background the ansatz

    psi_down = u(x) e^{i m theta},   chi_up = w(x) e^{i (m + 1 - n) theta}

reduces D Psi = 0 to the real radial system (x = e v r)

    u' = ((m - n a) / x) u + sqrt2 f w,
    w' = -((m + 1 - n) / x) w + sqrt2 f u,

and the adjoint equations, with psi_up = u e^{i m theta} and
chi_down = w e^{i (m - 1 - n) theta}, to

    u' = -((m - n a) / x) u - sqrt2 f w,
    w' = ((m - 1 - n) / x) w - sqrt2 f u.

A channel contributes the intersection of the solutions regular at the origin
with the solution decaying at infinity.  Each complex solution counts as two
real kernel dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .background import RadialProfile
from .errors import ChannelNonConvergence, CrossCheckFailure

SQRT2 = float(np.sqrt(2.0))
# normalized singular values below this mean the subspaces intersect
_RANK_TOL = 1e-6
# values between the two thresholds cannot be classified
_AMBIGUOUS = 1e-3


@dataclass(frozen=True)
class ChannelCount:
    m: int
    regular_dim: int
    kernel_count: int  # real dimension
    min_normalized_sv: float


def _coefficients(m: int, n: int, adjoint: bool):
    """(p, q, s) with u' = p(a) u / x + s sqrt2 f w,  w' = q w / x + s sqrt2 f u."""
    if adjoint:
        return (lambda a: -(m - n * a)), float(m - 1 - n), -1.0
    return (lambda a: m - n * a), float(-(m + 1 - n)), 1.0


def _regular_starts(m: int, n: int, adjoint: bool, x0: float):
    """Leading small-x behaviour of solutions regular at the origin."""
    starts = []
    if adjoint:
        if m <= 0:
            starts.append([x0 ** (-m), 0.0])
        if m - 1 - n >= 0:
            starts.append([0.0, x0 ** (m - 1 - n)])
    else:
        if m >= 0:
            starts.append([x0**m, 0.0])
        if m <= n - 1:
            starts.append([0.0, x0 ** (n - 1 - m)])
    return starts


def radial_channel_oracle(profile: RadialProfile, m_range=None, adjoint: bool = False,
                          x_match: float = 2.0) -> list[ChannelCount]:
    """Per-channel real kernel dimensions for m in ``m_range`` (inclusive pair
    or iterable); the default covers every channel that can contribute."""
    params = profile.params
    n, ev = params.n, params.ev
    if m_range is None:
        m_range = range(-2, n + 3)
    elif isinstance(m_range, tuple) and len(m_range) == 2:
        m_range = range(m_range[0], m_range[1] + 1)
    if n == 0:
        # vacuum: constant mass sqrt2 e v, no normalizable zero modes
        return [ChannelCount(int(m), 0, 0, 1.0) for m in m_range]

    x_max = params.x_max
    x0 = 1e-4

    def fa(x):
        f, a = profile.evaluate(np.atleast_1d(x) / ev)
        return float(f[0]), float(a[0])

    out = []
    for m in m_range:
        p, q, s = _coefficients(int(m), n, adjoint)

        def rhs(x, y):
            f, a = fa(x)
            u, w = y
            return [p(a) * u / x + s * SQRT2 * f * w, q * w / x + s * SQRT2 * f * u]

        starts = _regular_starts(int(m), n, adjoint, x0)
        cols = []
        for y0 in starts:
            sol = solve_ivp(rhs, (x0, x_match), y0, method="DOP853", rtol=1e-10, atol=1e-300,
                            first_step=1e-2 * x0)
            if sol.status != 0:
                raise ChannelNonConvergence(f"channel m={m}: {sol.message}")
            cols.append(sol.y[:, -1])
        # decaying solution: u = -s w e^{-sqrt2 x} asymptotically
        sol = solve_ivp(rhs, (x_max, x_match), [1.0, -s], method="DOP853", rtol=1e-10,
                        atol=1e-300)
        if sol.status != 0:
            raise ChannelNonConvergence(f"channel m={m}: {sol.message}")
        cols.append(sol.y[:, -1])
        Y = np.array(cols).T
        Y = Y / np.linalg.norm(Y, axis=0)
        sv = np.linalg.svd(Y, compute_uv=False)
        sv_full = np.zeros(Y.shape[1])
        sv_full[: len(sv)] = sv
        small = sv_full[-1]
        if _RANK_TOL <= small < _AMBIGUOUS:
            raise ChannelNonConvergence(
                f"channel m={m}: matching singular value {small:.2e} is ambiguous"
            )
        rank = int(np.sum(sv_full >= _RANK_TOL))
        complex_dim = len(starts) + 1 - rank
        out.append(ChannelCount(int(m), len(starts), 2 * complex_dim, float(small)))
    return out


def total_kernel(counts) -> int:
    return int(sum(c.kernel_count for c in counts))


def cross_check(counts, kernel_count: int) -> None:
    """Raise CrossCheckFailure if the channel total differs from a 2D count."""
    total = total_kernel(counts)
    if total != kernel_count:
        raise CrossCheckFailure(
            f"radial channels give kernel dimension {total}, 2D solver gives {kernel_count}"
        )
