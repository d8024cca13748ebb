"""Self-dual vortex backgrounds of the abelian Higgs (Landau-Ginzburg) model.

The radial ansatz is

    phi = v f(r) exp(i n theta),     e A_theta = n a(r) / r,

for which the positive-flux self-duality equations reduce to

    f' = (n / r) (1 - a) f,          a' = (e^2 v^2 r / n) (1 - f^2).

Both equations only depend on the combination x = e v r, so the solvers work
in x and map back to physical radius on exit.  Two independent solvers are
provided (bisection shooting and Newton relaxation) and are used as mutual
oracles.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import k0e, k1e

from .errors import InterpolationError, InvalidParams, NonConvergence

SQRT2 = math.sqrt(2.0)

# smallest x used to start the outward shooting integration
_X_START = 1e-3


@dataclass(frozen=True)
class VortexParams:
    """Vorticity, couplings and radial discretization of a vortex background.

    ``r_max`` defaults to ``12 / (e v)``.  ``n = 0`` selects the vacuum.
    """

    n: int = 1
    e: float = 1.0
    v: float = 1.0
    r_max: float | None = None
    m_r: int = 2048

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise InvalidParams("; ".join(f"{k}: {v}" for k, v in problems.items()))
        if self.r_max is None:
            object.__setattr__(self, "r_max", 12.0 / (self.e * self.v))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "e", float(self.e))
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "r_max", float(self.r_max))
        if self.r_max * self.e * self.v < 8.0:
            warnings.warn(
                f"r_max*e*v = {self.r_max * self.e * self.v:.3g} < 8: the domain may "
                "not contain the exponential tail of the vortex",
                RuntimeWarning,
                stacklevel=3,
            )

    def violations(self) -> dict[str, str]:
        out = {}
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            out["n"] = "must be an integer"
        elif self.n < 0:
            out["n"] = "must be >= 0 (n = 0 is the vacuum)"
        for name in ("e", "v"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or not math.isfinite(val) or val <= 0:
                out[name] = "must be a finite number > 0"
        if self.r_max is not None and (
            not isinstance(self.r_max, (int, float))
            or not math.isfinite(self.r_max)
            or self.r_max <= 0
        ):
            out["r_max"] = "must be a finite number > 0"
        if not isinstance(self.m_r, (int, np.integer)) or self.m_r < 64:
            out["m_r"] = "must be an integer >= 64"
        return out

    @property
    def ev(self) -> float:
        return self.e * self.v

    @property
    def x_max(self) -> float:
        """Domain radius in units of 1/(e v)."""
        return self.ev * self.r_max


@dataclass(frozen=True, eq=False)
class RadialProfile:
    params: VortexParams
    r: np.ndarray
    f: np.ndarray
    a: np.ndarray
    residual_norm: float
    node_residual: np.ndarray
    core_coefficient: float
    method: str

    @property
    def x(self) -> np.ndarray:
        return self.params.ev * self.r

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "f", "a", "residual"])
            for row in zip(self.r, self.f, self.a, self.node_residual):
                w.writerow([_fmt17(x) for x in row])
        return path

    @cached_property
    def _splines(self):
        return CubicSpline(self.r, self.f), CubicSpline(self.r, self.a)

    @property
    def series_radius(self) -> float:
        """Below this radius values come from the small-r series."""
        return 2.0 * float(self.r[1] - self.r[0])

    def check_series_match(self) -> None:
        """Raise InterpolationError if spline and series disagree at the switch."""
        if self.params.n == 0:
            return
        rs = self.series_radius
        f_spl, a_spl = self._splines
        fs, as_ = self.series(rs)
        if abs(float(f_spl(rs)) - fs) > 1e-6 * abs(fs) + 1e-12 or abs(float(a_spl(rs)) - as_) > 1e-9:
            raise InterpolationError(
                "radial profile too coarse near the origin for the series matching"
            )

    def evaluate(self, r):
        """(f, a) at arbitrary radii: cubic spline, small-r series near the
        origin and the vacuum values beyond r_max."""
        r = np.asarray(r, dtype=float)
        if self.params.n == 0:
            return np.ones_like(r), np.zeros_like(r)
        f = np.ones_like(r)
        a = np.ones_like(r)
        near = r < self.series_radius
        mid = ~near & (r <= self.params.r_max)
        f_spl, a_spl = self._splines
        f[mid] = f_spl(r[mid])
        a[mid] = a_spl(r[mid])
        f[near], a[near] = self.series(r[near])
        return f, a

    def f_prime(self, r):
        """df/dr from the first-order equation f' = (n/r)(1 - a) f (finite at r = 0)."""
        r = np.asarray(r, dtype=float)
        n, ev = self.params.n, self.params.ev
        if n == 0:
            return np.zeros_like(r)
        f, a = self.evaluate(r)
        out = np.empty_like(r)
        pos = r > 0
        out[pos] = n * (1.0 - a[pos]) * f[pos] / r[pos]
        out[~pos] = ev * self.core_coefficient if n == 1 else 0.0
        return out

    def series(self, r):
        """Small-r expansion f ~ c x^n (1 - x^2/4), a ~ x^2/(2n)."""
        n = self.params.n
        x = self.params.ev * np.asarray(r, dtype=float)
        if n == 0:
            return np.ones_like(x), np.zeros_like(x)
        c = self.core_coefficient
        f = c * x**n * (1.0 - x * x / 4.0)
        a = x * x / (2.0 * n) - c * c * x ** (2 * n + 2) / (n * (2 * n + 2))
        return f, a


def _fmt17(x) -> str:
    return format(float(x), ".17g")


# -- residual -----------------------------------------------------------------

def _cell_residuals(n: int, x: np.ndarray, f: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Sixth-order residual of both ODEs at cell midpoints.

    Returns an array of length len(x) - 1 (one per cell); the two cells at
    each end, which lack a full six-point stencil, are reported as zero.
    """
    res = np.zeros(len(x) - 1)
    if n == 0 or len(x) < 6:
        return res
    dx = x[1] - x[0]
    i = np.arange(2, len(x) - 3)
    xm = 0.5 * (x[i] + x[i + 1])

    def mid(u):
        return (3 * (u[i - 2] + u[i + 3]) - 25 * (u[i - 1] + u[i + 2])
                + 150 * (u[i] + u[i + 1])) / 256.0

    def dmid(u):
        return (-9 * (u[i - 2] - u[i + 3]) + 125 * (u[i - 1] - u[i + 2])
                - 2250 * (u[i] - u[i + 1])) / (1920.0 * dx)

    fm, am = mid(f), mid(a)
    rf = dmid(f) - n * (1.0 - am) * fm / xm
    ra = dmid(a) - xm * (1.0 - fm * fm) / n
    res[i] = np.maximum(np.abs(rf), np.abs(ra))
    return res


def _node_residual(cell_res: np.ndarray) -> np.ndarray:
    node = np.zeros(len(cell_res) + 1)
    node[:-1] = cell_res
    node[1:] = np.maximum(node[1:], cell_res)
    return node


# -- shooting -----------------------------------------------------------------

def _shoot_rhs(n):
    def rhs(x, y):
        f, a = y
        return [n * (1.0 - a) * f / x, x * (1.0 - f * f) / n]

    return rhs


def _shoot_once(n: int, c: float, x_end: float, dense: bool = False):
    x0 = _X_START
    f0 = c * x0**n * (1.0 - x0 * x0 / 4.0)
    a0 = x0 * x0 / (2.0 * n) - c * c * x0 ** (2 * n + 2) / (n * (2 * n + 2))

    def over(x, y):
        return y[0] - 1.0

    def under(x, y):
        return y[1] - 1.0

    over.terminal = under.terminal = True
    over.direction = under.direction = 1.0
    sol = solve_ivp(
        _shoot_rhs(n), (x0, x_end), [f0, a0], method="DOP853",
        rtol=1e-13, atol=1e-16, events=(over, under), dense_output=dense,
    )
    if sol.status == -1:
        raise NonConvergence(f"shooting integration failed: {sol.message}")
    if len(sol.t_events[0]):
        verdict = +1
    elif len(sol.t_events[1]):
        verdict = -1
    else:
        verdict = 0
    return verdict, sol


def _tail_state(n: int, alpha: float, x):
    """Linearized asymptotics of (1 - f, 1 - a):
    alpha K0(sqrt2 x) and (sqrt2 alpha x / n) K1(sqrt2 x)."""
    s = SQRT2 * x
    decay = np.exp(-s)
    return alpha * k0e(s) * decay, alpha * s * k1e(s) * decay / n


def _shoot_inward(n: int, alpha: float, x_max: float, x_match: float):
    """Integrate the deviations (1 - f, 1 - a) inward from the tail; working
    with deviations keeps full relative precision in alpha."""

    def rhs(x, y):
        g, b = y
        return [-n * b * (1.0 - g) / x, -x * g * (2.0 - g) / n]

    sol = solve_ivp(
        rhs, (x_max, x_match), list(_tail_state(n, alpha, x_max)), method="DOP853",
        rtol=1e-13, atol=1e-30, dense_output=True,
    )
    if sol.status != 0:
        raise NonConvergence(f"inward tail integration failed: {sol.message}")
    return sol


def _bisect_core(n: int, x_end: float, max_iter: int = 200):
    lo, hi = 0.0, 1.0
    while _shoot_once(n, hi, x_end)[0] != +1:
        hi *= 2.0
        if hi > 1e6:
            raise NonConvergence("could not bracket the core coefficient")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        verdict = _shoot_once(n, mid, x_end)[0]
        if verdict == +1:
            hi = mid
        elif verdict == -1:
            lo = mid
        else:
            return mid
    else:
        raise NonConvergence("bisection on the core coefficient did not terminate")
    return 0.5 * (lo + hi)


def _shooting(n: int, x: np.ndarray, x_match: float = 2.0):
    """Bisection on the core coefficient, refined by matching the outward core
    trajectory to an inward trajectory started on the exponential tail.

    Pure outward shooting loses the solution once the growing mode, seeded at
    rounding level, overtakes the tail; the two-sided match keeps the whole
    profile at integrator accuracy.
    """
    x_max = float(x[-1])
    x_match = min(x_match, 0.5 * x_max)
    c0 = _bisect_core(n, x_max + 40.0)
    verdict, sol0 = _shoot_once(n, c0, x_max, dense=True)
    x_fit = min(0.5 * x_max, sol0.t[-1])
    f_fit = float(sol0.sol(x_fit)[0])
    alpha0 = (1.0 - f_fit) / (k0e(SQRT2 * x_fit) * np.exp(-SQRT2 * x_fit))

    def mismatch(p):
        c, alpha = p
        _, out = _shoot_once(n, c, x_match)
        inn = _shoot_inward(n, alpha, x_max, x_match)
        return out.y[:, -1] - (1.0 - inn.y[:, -1])

    # Newton with a forward-difference Jacobian; hybrid solvers stall on the
    # integrator's rounding noise near the root
    p = np.array([c0, alpha0])
    F = mismatch(p)
    for _ in range(30):
        if np.max(np.abs(F)) < 1e-13:
            break
        J = np.empty((2, 2))
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = 1e-7 * max(abs(p[k]), 1.0)
            J[:, k] = (mismatch(p + dp) - F) / dp[k]
        p_new = p - np.linalg.solve(J, F)
        F_new = mismatch(p_new)
        if np.max(np.abs(F_new)) >= np.max(np.abs(F)):
            break
        p, F = p_new, F_new
    if np.max(np.abs(F)) > 1e-10:
        raise NonConvergence(
            f"two-sided shooting did not match (mismatch {np.max(np.abs(F)):.2e})"
        )
    c, alpha = p

    _, out = _shoot_once(n, c, x_match, dense=True)
    inn = _shoot_inward(n, alpha, x_max, x_match)
    f = np.empty_like(x)
    a = np.empty_like(x)
    small = x < _X_START
    core = ~small & (x <= x_match)
    tail = x > x_match
    f[small] = c * x[small] ** n * (1.0 - x[small] ** 2 / 4.0)
    a[small] = x[small] ** 2 / (2.0 * n)
    f[core], a[core] = out.sol(x[core])
    g_tail, b_tail = inn.sol(x[tail])
    f[tail] = 1.0 - g_tail
    a[tail] = 1.0 - b_tail
    return f, a, float(c)


# -- relaxation ---------------------------------------------------------------

def _relax_grid(n: int, x: np.ndarray, g0: np.ndarray, a0: np.ndarray,
                tol: float = 1e-13, max_iter: int = 60):
    """Damped Newton on the box scheme for (g, a) with f = x^n g."""
    M = len(x) - 1
    dx = x[1] - x[0]
    xm = 0.5 * (x[1:] + x[:-1])
    xmn = xm**n
    xn_end = x[-1] ** n
    s_end = SQRT2 * x[-1]
    k0_end, k1_end = k0e(s_end), k1e(s_end)

    def residual(u):
        g, a = u[: M + 1], u[M + 1:]
        gm = 0.5 * (g[1:] + g[:-1])
        am = 0.5 * (a[1:] + a[:-1])
        fm = xmn * gm
        F = np.empty(2 * M + 2)
        F[0] = a[0]
        F[1: M + 1] = a[1:] - a[:-1] - dx * (xm / n) * (1.0 - fm * fm)
        F[M + 1: 2 * M + 1] = g[1:] - g[:-1] + dx * (n * am / xm) * gm
        # asymptotic tail relation n (1 - a) K0(sqrt2 x) = sqrt2 x K1(sqrt2 x) (1 - f)
        F[2 * M + 1] = n * (1.0 - a[M]) * k0_end - s_end * k1_end * (1.0 - xn_end * g[M])
        return F

    def jacobian(u):
        g, a = u[: M + 1], u[M + 1:]
        gm = 0.5 * (g[1:] + g[:-1])
        am = 0.5 * (a[1:] + a[:-1])
        cells = np.arange(M)
        rows, cols, vals = [0], [M + 1], [1.0]
        # a-equations, rows 1..M
        ra = 1 + cells
        d_fm2 = dx * (xm / n) * 2.0 * xmn * xmn * gm * 0.5
        rows += list(ra) * 4
        cols += list(M + 1 + cells + 1) + list(M + 1 + cells) + list(cells) + list(cells + 1)
        vals += [1.0] * M + [-1.0] * M + list(d_fm2) + list(d_fm2)
        # g-equations, rows M+1..2M
        rg = M + 1 + cells
        cg = dx * n / xm
        rows += list(rg) * 4
        cols += list(cells + 1) + list(cells) + list(M + 1 + cells) + list(M + 1 + cells + 1)
        vals += list(1.0 + 0.5 * cg * am) + list(-1.0 + 0.5 * cg * am)
        vals += list(0.5 * cg * gm) + list(0.5 * cg * gm)
        rows += [2 * M + 1, 2 * M + 1]
        cols += [M, 2 * M + 1]
        vals += [s_end * k1_end * xn_end, -n * k0_end]
        return sp.csc_matrix((vals, (rows, cols)), shape=(2 * M + 2, 2 * M + 2))

    u = np.concatenate([g0, a0])
    F = residual(u)
    norm = np.max(np.abs(F))
    for _ in range(max_iter):
        if norm < tol:
            break
        step = spla.spsolve(jacobian(u), -F)
        lam = 1.0
        while True:
            trial = u + lam * step
            Ft = residual(trial)
            nt = np.max(np.abs(Ft))
            if nt < (1.0 - 0.25 * lam) * norm or lam < 1e-6:
                break
            lam *= 0.5
        if lam < 1e-6:
            raise NonConvergence("damped Newton stalled")
        if np.max(np.abs(lam * step)) < 1e-15 * max(1.0, np.max(np.abs(u))):
            u, F, norm = trial, Ft, nt
            break
        u, F, norm = trial, Ft, nt
    else:
        raise NonConvergence(f"damped Newton did not converge (|F| = {norm:.2e})")
    if norm > 1e-10:
        raise NonConvergence(f"damped Newton stalled at |F| = {norm:.2e}")
    return u[: M + 1], u[M + 1:]


def _relaxation(n: int, x: np.ndarray):
    """Box-scheme relaxation on the output grid and two successive 2x
    refinements, Romberg-combined to sixth order on the output nodes."""
    f_guess = np.tanh(x) ** n
    with np.errstate(divide="ignore", invalid="ignore"):
        g_guess = np.where(x > 0, f_guess / np.where(x > 0, x, 1.0) ** n, 1.0)
    a_guess = np.tanh(x * x / (2.0 * n))
    levels = []
    grid = x
    for _ in range(3):
        g, a = _relax_grid(n, grid, g_guess, a_guess)
        stride = (len(grid) - 1) // (len(x) - 1)
        levels.append((g[::stride], a[::stride]))
        finer = np.linspace(x[0], x[-1], 2 * len(grid) - 1)
        g_guess = np.interp(finer, grid, g)
        a_guess = np.interp(finer, grid, a)
        grid = finer
    # the box scheme error expands in even powers of the spacing
    r1 = [(4.0 * fine - coarse) / 3.0 for coarse, fine in zip(levels[0], levels[1])]
    r2 = [(4.0 * fine - coarse) / 3.0 for coarse, fine in zip(levels[1], levels[2])]
    g, a = [(16.0 * q - p) / 15.0 for p, q in zip(r1, r2)]
    # g(0) itself is the least accurate node of the box scheme; read the core
    # coefficient off the first interior node using g ~ c exp(-x^2/4)
    return x**n * g, a, g[1] * math.exp(x[1] ** 2 / 4.0)


def solve_profile(params: VortexParams, method: str = "relaxation") -> RadialProfile:
    """Solve the radial self-duality equations on ``m_r`` nodes of [0, r_max]."""
    if method not in ("shooting", "relaxation"):
        raise InvalidParams(f"unknown method {method!r}")
    r = np.linspace(0.0, params.r_max, params.m_r)
    x = params.ev * r
    n = params.n
    if n == 0:
        f = np.ones_like(r)
        a = np.zeros_like(r)
        return RadialProfile(params, r, f, a, 0.0, np.zeros_like(r), 0.0, method)
    if method == "shooting":
        f, a, c = _shooting(n, x)
    else:
        f, a, c = _relaxation(n, x)
    f[0] = 0.0
    a[0] = 0.0
    np.clip(f, 0.0, 1.0, out=f)
    np.clip(a, 0.0, 1.0, out=a)
    cell = _cell_residuals(n, x, f, a)
    return RadialProfile(
        params=params, r=r, f=f, a=a,
        residual_norm=float(cell.max()),
        node_residual=_node_residual(cell),
        core_coefficient=float(c),
        method=method,
    )


# -- 2D background --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Background2D:
    """Background fields sampled on a uniform m_xy x m_xy grid covering
    [-r_max, r_max]^2.  Arrays are indexed [i, j] <-> (xs[i], xs[j]).

    ``a1``/``a2`` hold the gauge potential A_i itself (not e A_i).  Points
    with r >= r_max are outside the computational domain (``mask`` False).
    """

    params: VortexParams
    xs: np.ndarray
    phi: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    mask: np.ndarray
    profile: RadialProfile | None = field(default=None, repr=False, compare=False)

    @property
    def h(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def m_xy(self) -> int:
        return len(self.xs)

    def coords(self):
        return np.meshgrid(self.xs, self.xs, indexing="ij")

    def winding_number(self) -> int:
        """Phase winding of phi around the outermost ring of in-domain points."""
        X, Y = self.coords()
        R = np.hypot(X, Y)
        r_max = self.params.r_max
        ring = self.mask & (R > r_max - 2.5 * self.h)
        theta = np.arctan2(Y[ring], X[ring])
        order = np.argsort(theta, kind="stable")
        phase = np.angle(self.phi[ring][order])
        phase = np.append(phase, phase[0])
        total = np.sum(np.diff(np.unwrap(phase)))
        return int(round(total / (2.0 * np.pi)))

    def to_csv(self, path) -> Path:
        path = Path(path)
        X, Y = self.coords()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "re_phi", "im_phi", "a1", "a2", "in_domain"])
            for i in range(self.m_xy):
                for j in range(self.m_xy):
                    w.writerow([
                        _fmt17(X[i, j]), _fmt17(Y[i, j]),
                        _fmt17(self.phi[i, j].real), _fmt17(self.phi[i, j].imag),
                        _fmt17(self.a1[i, j]), _fmt17(self.a2[i, j]),
                        int(self.mask[i, j]),
                    ])
        return path


def _grid(r_max: float, m_xy: int):
    xs = np.linspace(-r_max, r_max, m_xy)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    R = np.hypot(X, Y)
    return xs, X, Y, R, R < r_max


def sample_background(profile: RadialProfile, m_xy: int = 128) -> Background2D:
    """Sample phi and A_i on the 2D grid from a converged radial profile.

    Cubic-spline interpolation in r, switching to the small-r series below two
    radial spacings.
    """
    if m_xy < 64:
        raise InvalidParams("m_xy must be >= 64")
    params = profile.params
    n, e, v = params.n, params.e, params.v
    xs, X, Y, R, mask = _grid(params.r_max, m_xy)

    if n == 0:
        phi = v * profile.f[0] * np.ones_like(X, dtype=complex)
        zero = np.zeros_like(X)
        return Background2D(params, xs, phi, zero, zero.copy(), mask, profile)

    profile.check_series_match()
    f, a = profile.evaluate(R)
    near = R < profile.series_radius

    # a / r^2, finite at the origin
    a_over_r2 = np.empty_like(R)
    far = ~near
    a_over_r2[far] = a[far] / R[far] ** 2
    xn = params.ev * R[near]
    c = profile.core_coefficient
    a_over_r2[near] = params.ev**2 * (
        1.0 / (2.0 * n) - c * c * xn ** (2 * n) / (n * (2 * n + 2))
    )

    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(R > 0, (X + 1j * Y) / np.where(R > 0, R, 1.0), 0.0)
    phi = v * f * unit**n
    a1 = -n * a_over_r2 * Y / e
    a2 = n * a_over_r2 * X / e
    return Background2D(params, xs, phi, a1, a2, mask, profile)


def constant_background(params: VortexParams, m_xy: int, phi_value: complex | None = None,
                        ) -> Background2D:
    """Background with constant phi (default v) and A = 0; phi_value=0 gives the
    zero field."""
    xs, X, Y, R, mask = _grid(params.r_max, m_xy)
    val = params.v if phi_value is None else phi_value
    phi = np.full(X.shape, val, dtype=complex)
    zero = np.zeros_like(X)
    return Background2D(params, xs, phi, zero, zero.copy(), mask, None)


# -- observables ----------------------------------------------------------------

def _plaquettes(bg: Background2D):
    m = bg.mask
    return m[:-1, :-1] & m[1:, :-1] & m[1:, 1:] & m[:-1, 1:]


def field_strength(bg: Background2D) -> np.ndarray:
    """F_12 on plaquettes from the trapezoidal circulation of A; shape (m-1, m-1)."""
    h = bg.h
    a1, a2 = bg.a1, bg.a2
    bottom = 0.5 * (a1[:-1, :-1] + a1[1:, :-1])
    right = 0.5 * (a2[1:, :-1] + a2[1:, 1:])
    top = 0.5 * (a1[:-1, 1:] + a1[1:, 1:])
    left = 0.5 * (a2[:-1, :-1] + a2[:-1, 1:])
    return (bottom + right - top - left) / h


def flux(bg: Background2D) -> float:
    """Magnetic flux: sum of F_12 h^2 over in-domain plaquettes."""
    F = field_strength(bg)
    return float(np.sum(F[_plaquettes(bg)]) * bg.h**2)


def energy(bg: Background2D) -> float:
    """Static energy  sum (1/2 F12^2 + |D_i phi|^2 + (e^2/2)(|phi|^2 - v^2)^2) h^2.

    Covariant differences use link phases exp(-i e h A_link) so the discrete
    energy is gauge invariant.
    """
    e, v, h = bg.params.e, bg.params.v, bg.h
    m = bg.mask
    phi = bg.phi
    F = field_strength(bg)
    mag = 0.5 * np.sum(F[_plaquettes(bg)] ** 2)

    lx = m[:-1, :] & m[1:, :]
    ux = np.exp(-1j * e * h * 0.5 * (bg.a1[:-1, :] + bg.a1[1:, :]))
    dx = (ux * phi[1:, :] - phi[:-1, :]) / h
    ly = m[:, :-1] & m[:, 1:]
    uy = np.exp(-1j * e * h * 0.5 * (bg.a2[:, :-1] + bg.a2[:, 1:]))
    dy = (uy * phi[:, 1:] - phi[:, :-1]) / h
    kin = np.sum(np.abs(dx[lx]) ** 2) + np.sum(np.abs(dy[ly]) ** 2)

    pot = 0.5 * e * e * np.sum((np.abs(phi[m]) ** 2 - v * v) ** 2)
    return float((mag + kin + pot) * h * h)
