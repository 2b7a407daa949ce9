"""Parameter sweeps, avoided-crossing gaps and the decay-to-growth threshold."""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegratorConfig, rk4_integrate
from .errors import CircuitError, DomainError, NotFoundError
from .model import build_state_space, params_from_targets
from .sigproc import estimate_modes
from .spectra import eigenvector_overlap, eigs_general, eigs_lossless_analytic, ep_lossless

GAP_ZERO_TOL = 1e-9
DEFAULT_GRID = (0.05, 0.5, 400)


class Source(str, enum.Enum):
    DIRECT_EIGEN = "DIRECT_EIGEN"
    TIME_DOMAIN = "TIME_DOMAIN"


class EpMethod(str, enum.Enum):
    DISCRIMINANT = "DISCRIMINANT"
    GOLDEN_SECTION = "GOLDEN_SECTION"


@dataclass(frozen=True)
class SweepResult:
    """Spectra along a gamma grid at fixed ``c`` and ``gamma_l``.

    ``branches`` holds the two positive-branch eigenfrequencies per grid point
    after continuity tracking. Time-domain sweeps fill ``estimates`` instead
    of ``spectra``; grid points that failed are listed in ``failures``.
    """

    c: float
    gamma_l: float
    grid: np.ndarray
    source: Source
    spectra: list = field(default_factory=list)
    coalescence: list = field(default_factory=list)
    branches: np.ndarray | None = None
    estimates: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    continuity_flags: list = field(default_factory=list)

    @property
    def real_gaps(self):
        if self.branches is not None:
            return np.abs(self.branches[:, 0].real - self.branches[:, 1].real)
        gaps = []
        for est in self.estimates:
            if est is None or len(est.frequencies) < 2:
                gaps.append(math.nan)
            else:
                gaps.append(est.frequencies[0] - est.frequencies[1])
        return np.array(gaps)


@dataclass(frozen=True)
class EpSearchResult:
    gamma_star: float
    min_gap: float
    method: EpMethod
    iterations: int


@dataclass(frozen=True)
class GapSlopeFit:
    slope: float
    residual: float
    gamma_l: np.ndarray
    gaps: np.ndarray
    gamma_at_min: np.ndarray


def default_grid(start=DEFAULT_GRID[0], stop=DEFAULT_GRID[1], count=DEFAULT_GRID[2]):
    return np.linspace(start, stop, count)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise DomainError("gamma grid must be a 1-d sequence")
    if grid.size == 0:
        return grid
    if np.any(np.diff(grid) <= 0):
        raise DomainError("gamma grid must be strictly increasing")
    if grid[0] <= 0 or grid[-1] > 5:
        raise DomainError("gamma grid must lie within (0, 5]")
    return grid


def spectrum_at(c, gamma, gamma_l, with_vectors=True):
    return eigs_general(build_state_space(params_from_targets(c, gamma, gamma_l)), with_vectors=with_vectors)


def real_gap(c, gamma, gamma_l):
    w1, w2 = spectrum_at(c, gamma, gamma_l, with_vectors=False).positive
    return abs(w1.real - w2.real)


def track_branches(grid, positives, factor=10.0, slope_floor=1e-3):
    """Order each grid point's positive pair for continuity with its predecessor.

    Returns the tracked ``(n, 2)`` array and the ``(index, branch)`` steps
    whose increment exceeds ``factor`` times the grid step times the local
    slope estimate. Those steps are reported, not reordered.
    """
    branches = np.array(positives, dtype=complex).reshape(-1, 2)
    for i in range(1, branches.shape[0]):
        prev = branches[i - 1]
        cur = branches[i]
        keep = abs(cur[0] - prev[0]) + abs(cur[1] - prev[1])
        swap = abs(cur[1] - prev[0]) + abs(cur[0] - prev[1])
        if swap < keep:
            branches[i] = cur[::-1]
    flags = []
    for i in range(2, branches.shape[0]):
        h_prev = grid[i - 1] - grid[i - 2]
        h = grid[i] - grid[i - 1]
        for b in (0, 1):
            slope = abs(branches[i - 1, b] - branches[i - 2, b]) / h_prev
            step = abs(branches[i, b] - branches[i - 1, b])
            if step > factor * h * max(slope, slope_floor):
                flags.append((i, b))
    return branches, flags


def sweep_gamma(c, gamma_l, grid=None, source=Source.DIRECT_EIGEN, config=None, channel=1,
                with_vectors=True):
    """Spectra (or time-domain estimates) over a gamma grid.

    Grid points are independent; they are evaluated in order so results are
    deterministic. A time-domain failure at one point is recorded in
    ``failures`` and the sweep carries on.
    """
    grid = _check_grid(default_grid() if grid is None else grid)
    source = Source(source)
    if source is Source.DIRECT_EIGEN:
        spectra = [spectrum_at(c, g, gamma_l, with_vectors=with_vectors) for g in grid]
        coalescence = [eigenvector_overlap(sp) for sp in spectra] if with_vectors else []
        branches, flags = track_branches(grid, [sp.positive for sp in spectra])
        return SweepResult(c=c, gamma_l=gamma_l, grid=grid, source=source, spectra=spectra,
                           coalescence=coalescence, branches=branches, continuity_flags=flags)

    config = config or IntegratorConfig()
    estimates, failures = [], {}
    for i, g in enumerate(grid):
        try:
            trace = rk4_integrate(build_state_space(params_from_targets(c, g, gamma_l)), config)
            estimates.append(estimate_modes(trace, channel))
        except CircuitError as exc:
            estimates.append(None)
            failures[i] = str(exc)
    return SweepResult(c=c, gamma_l=gamma_l, grid=grid, source=source, estimates=estimates,
                       failures=failures)


def golden_section(f, a, b, xtol=1e-8, maxiter=200):
    """Minimise a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x), iterations)``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while b - a > xtol and it < maxiter:
        it += 1
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    fx = f(x)
    best = min((fx, x), (f1, x1), (f2, x2))
    return best[1], best[0], it


def _gap_minimum(c, gamma_l, grid, gaps, xtol=1e-8):
    gaps = np.asarray(gaps, dtype=float)
    if gaps.min() <= GAP_ZERO_TOL:
        # exact coalescence: report where the zero-gap region begins
        i0 = int(np.argmax(gaps <= GAP_ZERO_TOL))
        if i0 == 0:
            return float(grid[0]), float(gaps[0]), 0
        lo, hi = float(grid[i0 - 1]), float(grid[i0])
        it = 0
        while hi - lo > xtol * 1e-2 and it < 200:
            it += 1
            mid = 0.5 * (lo + hi)
            if real_gap(c, mid, gamma_l) <= GAP_ZERO_TOL:
                hi = mid
            else:
                lo = mid
        return hi, real_gap(c, hi, gamma_l), it
    i = int(np.argmin(gaps))
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    x, fx, it = golden_section(lambda g: real_gap(c, g, gamma_l), a, b, xtol=xtol)
    if gaps[i] < fx:
        return float(grid[i]), float(gaps[i]), it
    return x, fx, it


def min_real_gap(sweep):
    """Smallest positive-branch real gap along a direct sweep, refined between grid points.

    Returns ``(gamma_at_min, gap)``. When the gap closes exactly (lossless
    inductors) the returned gamma is the onset of the zero-gap region, i.e.
    the exceptional point.
    """
    if sweep.source is not Source.DIRECT_EIGEN:
        raise DomainError("min_real_gap needs a DIRECT_EIGEN sweep")
    if len(sweep.grid) < 3:
        raise DomainError("min_real_gap needs at least 3 grid points")
    g, gap, _ = _gap_minimum(sweep.c, sweep.gamma_l, sweep.grid, sweep.real_gaps)
    return g, gap


def gap_slope_vs_gamma_l(c, gamma_l_grid, gamma_grid=None):
    """Zero-intercept least-squares slope of the minimum real gap against gamma_l."""
    gl = np.asarray(gamma_l_grid, dtype=float)
    if gl.ndim != 1 or gl.size < 4:
        raise DomainError("gamma_l grid needs at least 4 points")
    if np.any(gl <= 0) or np.any(np.diff(gl) <= 0):
        raise DomainError("gamma_l grid must be positive and strictly increasing")
    gaps, where = [], []
    for value in gl:
        sweep = sweep_gamma(c, value, gamma_grid, with_vectors=False)
        g, gap = min_real_gap(sweep)
        gaps.append(gap)
        where.append(g)
    gaps = np.array(gaps)
    slope = float(np.dot(gl, gaps) / np.dot(gl, gl))
    residual = float(np.sqrt(np.mean((gaps - slope * gl) ** 2)))
    return GapSlopeFit(slope=slope, residual=residual, gamma_l=gl, gaps=gaps, gamma_at_min=np.array(where))


def locate_ep(c, gamma_l, count=400):
    """Exceptional point (lossless) or avoided-crossing minimum (lossy inductors).

    For ``gamma_l > 0`` the gap is scanned over ``[0.25, 2.5] * gamma_c`` and
    the minimum refined by golden section.
    """
    if not (c > 0):
        raise DomainError(f"c must be positive, got {c!r}")
    if not (gamma_l >= 0):
        raise DomainError(f"gamma_l must be non-negative, got {gamma_l!r}")
    gamma_c = ep_lossless(c)[0]
    if gamma_l == 0:
        w1, w2 = eigs_lossless_analytic(c, gamma_c, with_vectors=False).positive
        return EpSearchResult(gamma_star=gamma_c, min_gap=abs(w1.real - w2.real),
                              method=EpMethod.DISCRIMINANT, iterations=0)
    grid = np.linspace(0.25 * gamma_c, min(2.5 * gamma_c, 5.0), count)
    sweep = sweep_gamma(c, gamma_l, grid, with_vectors=False)
    g, gap, it = _gap_minimum(c, gamma_l, grid, sweep.real_gaps)
    return EpSearchResult(gamma_star=g, min_gap=gap, method=EpMethod.GOLDEN_SECTION, iterations=it)


def max_growth_rate(c, gamma, gamma_l):
    return spectrum_at(c, gamma, gamma_l, with_vectors=False).max_growth


def growth_threshold(c, gamma_l, count=101, xtol=1e-12):
    """Smallest gamma at which some mode starts to grow.

    The sign change of the largest imaginary part is bracketed by a scan over
    ``[0.5, 2] * gamma_c`` and refined by bisection.

    Raises
    ------
    NotFoundError
        If the largest imaginary part does not change sign in the bracket.
    """
    if not (c > 0):
        raise DomainError(f"c must be positive, got {c!r}")
    if not (gamma_l > 0):
        raise DomainError(f"gamma_l must be positive, got {gamma_l!r}")
    gamma_c = ep_lossless(c)[0]
    grid = np.linspace(0.5 * gamma_c, min(2.0 * gamma_c, 5.0), count)
    rates = np.array([max_growth_rate(c, g, gamma_l) for g in grid])
    crossing = np.nonzero((rates[:-1] <= 0) & (rates[1:] > 0))[0]
    if crossing.size == 0:
        raise NotFoundError(f"no growth onset for gamma in [{grid[0]:.6g}, {grid[-1]:.6g}] "
                            f"at c={c!r}, gamma_l={gamma_l!r}")
    lo, hi = float(grid[crossing[0]]), float(grid[crossing[0] + 1])
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if max_growth_rate(c, mid, gamma_l) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
