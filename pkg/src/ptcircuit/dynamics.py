"""Time integration of d/dtau psi = A psi.

``rk4_integrate`` is the classical fourth-order Runge-Kutta scheme. For a
linear autonomous system one RK4 step of size ``h`` is the fixed matrix
obtained by pushing the identity through the four stages, so that matrix is
built once and applied step by step. ``exact_propagate`` uses ``exp(A h)``
from scaling and squaring and serves as the reference solution.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GrowthOverflowError
from .trace import Trace

OVERFLOW_LIMIT = 1e300
DEFAULT_DT = 0.005
DEFAULT_T_END = 400.0
DEFAULT_PSI0 = (1.0, 0.0, 0.0, 0.0)

__all__ = [
    "IntegratorConfig",
    "Trace",
    "rk4_step_matrix",
    "expm",
    "rk4_integrate",
    "exact_propagate",
    "convergence_order",
    "ConvergenceResult",
]


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    t_end: float = DEFAULT_T_END
    psi0: tuple = field(default=DEFAULT_PSI0)
    sample_stride: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise DomainError(f"t_end must be positive, got {self.t_end!r}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise DomainError(f"sample_stride must be an integer >= 1, got {self.sample_stride!r}")
        psi0 = tuple(float(x) for x in self.psi0)
        if len(psi0) != 4 or not all(math.isfinite(x) for x in psi0):
            raise DomainError(f"psi0 must be 4 finite numbers, got {self.psi0!r}")
        object.__setattr__(self, "psi0", psi0)


def rk4_step_matrix(A, h):
    """Matrix of one classical RK4 step of size ``h`` for ``y' = A y``."""
    y = np.eye(A.shape[0])
    k1 = A @ y
    k2 = A @ (y + 0.5 * h * k1)
    k3 = A @ (y + 0.5 * h * k2)
    k4 = A @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def expm(M):
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    ``M`` is scaled by ``2**-s`` until its 1-norm is below 0.5; the series is
    cut once a term's 1-norm drops under 1e-18.
    """
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M, 1)
    s = 0
    if norm >= 0.5:
        s = int(math.ceil(math.log2(norm / 0.5))) + 1
    X = M / (2.0 ** s)
    result = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for n in range(1, 60):
        term = term @ X / n
        result = result + term
        if np.linalg.norm(term, 1) < 1e-18:
            break
    for _ in range(s):
        result = result @ result
    return result


def _n_steps(dt, t_end):
    n_full = int(math.floor(t_end / dt * (1 + 1e-12)))
    remainder = t_end - n_full * dt
    if remainder <= 1e-9 * dt:
        remainder = 0.0
    return n_full, remainder


def _march(step, tail_step, cfg):
    n_full, remainder = _n_steps(cfg.dt, cfg.t_end)
    stride = int(cfg.sample_stride)
    y = np.array(cfg.psi0, dtype=float)
    out = np.empty((n_full // stride + 1, 4))
    out[0] = y
    row = 1
    for n in range(1, n_full + 1):
        y = step @ y
        if n % 64 == 0 or n == n_full:
            if not np.all(np.abs(y) <= OVERFLOW_LIMIT):
                raise GrowthOverflowError(
                    f"state exceeded {OVERFLOW_LIMIT:g} by tau={n * cfg.dt:.6g}", time_reached=n * cfg.dt)
        if n % stride == 0:
            out[row] = y
            row += 1
    out = out[:row]

    final_time = final_state = None
    last_sampled = (row - 1) * stride
    if remainder > 0 or last_sampled != n_full:
        if remainder > 0:
            y = tail_step(remainder) @ y
        if not np.all(np.abs(y) <= OVERFLOW_LIMIT):
            raise GrowthOverflowError(f"state exceeded {OVERFLOW_LIMIT:g} by tau={cfg.t_end:.6g}",
                                      time_reached=cfg.t_end)
        final_time, final_state = float(cfg.t_end), y
    if out.shape[0] < 2:
        raise DomainError("t_end shorter than two sample intervals")
    return Trace(dt=cfg.dt * stride, samples=out, t0=0.0, final_time=final_time, final_state=final_state)


def rk4_integrate(ss, cfg):
    """Classical RK4 with fixed step; a shortened last step lands on ``t_end``.

    Raises
    ------
    GrowthOverflowError
        If any component exceeds 1e300.
    """
    A = np.asarray(ss.A, dtype=float)
    return _march(rk4_step_matrix(A, cfg.dt), lambda h: rk4_step_matrix(A, h), cfg)


def exact_propagate(ss, cfg):
    A = np.asarray(ss.A, dtype=float)
    return _march(expm(A * cfg.dt), lambda h: expm(A * h), cfg)


@dataclass(frozen=True)
class ConvergenceResult:
    order: float | None
    error_coarse: float
    error_fine: float
    inconclusive: bool


def convergence_order(ss, psi0=DEFAULT_PSI0, t_end=20.0, dt=0.05):
    """Observed global order of RK4 from runs at ``dt`` and ``dt/2``.

    Errors are max-norm deviations from the exact propagator over the common
    sample times. When the coarse error sits below 1e-13 the ratio is
    roundoff and the result is marked inconclusive.
    """
    cfg = IntegratorConfig(dt=dt, t_end=t_end, psi0=psi0)
    reference = exact_propagate(ss, cfg).samples
    coarse = rk4_integrate(ss, cfg).samples
    fine = rk4_integrate(ss, IntegratorConfig(dt=dt / 2, t_end=t_end, psi0=psi0, sample_stride=2)).samples
    n = min(reference.shape[0], coarse.shape[0], fine.shape[0])
    err_coarse = float(np.max(np.abs(coarse[:n] - reference[:n])))
    err_fine = float(np.max(np.abs(fine[:n] - reference[:n])))
    if err_coarse < 1e-13 or err_fine == 0.0:
        return ConvergenceResult(order=None, error_coarse=err_coarse, error_fine=err_fine, inconclusive=True)
    return ConvergenceResult(order=math.log2(err_coarse / err_fine), error_coarse=err_coarse,
                             error_fine=err_fine, inconclusive=False)
