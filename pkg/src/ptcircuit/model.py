"""Circuit parameters, the dimensionless state-space generator and Kirchhoff checks.

Two RLC tanks, one with resistance ``-R`` (gain, node 1) and one with ``+R``
(loss, node 2), share a coupling capacitor ``C0``. Each inductor carries a
series loss resistance ``R_L``. With tau = omega0 * t the node voltages obey

    d/dtau psi = A psi,   psi = (V1, V2, dV1, dV2),   A = [[0, I], [Ma, Mb]]

and H = iA plays the role of a non-Hermitian Hamiltonian.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .trace import Trace


@dataclass(frozen=True)
class PhysicalCircuit:
    """Component values in SI units (henry, farad, ohm)."""

    L: float
    C: float
    C0: float
    R: float
    R_L: float = 0.0

    def __post_init__(self):
        for name in ("L", "C", "C0", "R"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if not (math.isfinite(self.R_L) and self.R_L >= 0):
            raise DomainError(f"R_L must be non-negative and finite, got {self.R_L!r}")


@dataclass(frozen=True)
class DimensionlessParams:
    """Coupling ratio ``c``, gain/loss ``gamma`` and inductor loss ``gamma_l``.

    ``k = R_L / R`` equals ``gamma * gamma_l``. ``omega0`` (rad/s) and ``z0``
    (ohm) are the reference scales; both are 1 for parameters built directly
    in dimensionless space.
    """

    c: float
    gamma: float
    gamma_l: float
    k: float
    omega0: float = 1.0
    z0: float = 1.0

    def __post_init__(self):
        for name in ("c", "gamma", "gamma_l", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be non-negative and finite, got {value!r}")
        for name in ("omega0", "z0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        expected = self.gamma * self.gamma_l
        if abs(self.k - expected) > 1e-12 * max(1.0, abs(expected)):
            raise DomainError(f"k={self.k!r} inconsistent with gamma*gamma_l={expected!r}")

    @property
    def is_physical(self):
        return not (self.omega0 == 1.0 and self.z0 == 1.0)


def nondimensionalize(pc):
    """Map a :class:`PhysicalCircuit` onto :class:`DimensionlessParams`."""
    z0 = math.sqrt(pc.L / pc.C)
    return DimensionlessParams(
        c=pc.C0 / pc.C,
        gamma=z0 / pc.R,
        gamma_l=pc.R_L * math.sqrt(pc.C / pc.L),
        k=pc.R_L / pc.R,
        omega0=1.0 / math.sqrt(pc.L * pc.C),
        z0=z0,
    )


def params_from_targets(c, gamma, gamma_l=0.0):
    """Dimensionless parameters with omega0 = z0 = 1."""
    for name, value in (("c", c), ("gamma", gamma), ("gamma_l", gamma_l)):
        if not (math.isfinite(value) and value >= 0):
            raise DomainError(f"{name} must be non-negative and finite, got {value!r}")
    return DimensionlessParams(c=float(c), gamma=float(gamma), gamma_l=float(gamma_l),
                               k=float(gamma) * float(gamma_l))


def as_params(p):
    if isinstance(p, PhysicalCircuit):
        return nondimensionalize(p)
    if isinstance(p, DimensionlessParams):
        return p
    raise TypeError(f"expected PhysicalCircuit or DimensionlessParams, got {type(p).__name__}")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    """Real 2x2 blocks ``Ma``, ``Mb`` and the 4x4 generator ``A``."""

    Ma: np.ndarray
    Mb: np.ndarray
    A: np.ndarray

    @classmethod
    def from_blocks(cls, Ma, Mb):
        Ma = np.asarray(Ma, dtype=float)
        Mb = np.asarray(Mb, dtype=float)
        if Ma.shape != (2, 2) or Mb.shape != (2, 2):
            raise DomainError("Ma and Mb must be 2x2")
        if not (np.all(np.isfinite(Ma)) and np.all(np.isfinite(Mb))):
            raise DomainError("state-space blocks must be finite")
        A = np.block([[np.zeros((2, 2)), np.eye(2)], [Ma, Mb]])
        return cls(Ma=_frozen(Ma), Mb=_frozen(Mb), A=_frozen(A))

    @property
    def H(self):
        return 1j * self.A


def build_state_space(p):
    p = as_params(p)
    c, g, gl, k = p.c, p.gamma, p.gamma_l, p.k
    s = 1.0 + 2.0 * c
    Ma = np.array([[(1 + c) * (k - 1), -c * (k + 1)],
                   [c * (k - 1), -(1 + c) * (k + 1)]]) / s
    Mb = np.array([[(1 + c) * g - s * gl, -c * g],
                   [c * g, -(1 + c) * g - s * gl]]) / s
    return StateSpace.from_blocks(Ma, Mb)


def assemble_generator(Ma, Mb):
    return StateSpace.from_blocks(Ma, Mb).A


@dataclass(frozen=True)
class SecondOrderCoeffs:
    """Coefficients of the two coupled second-order node equations.

    Row ``n`` reads ``V_n'' = own_velocity*V_n' + own_displacement*V_n
    + cross_acceleration*V_m'' + cross_velocity*V_m'`` with ``m`` the other node.
    """

    own_velocity: tuple
    own_displacement: tuple
    cross_acceleration: tuple
    cross_velocity: tuple

    def eliminate(self):
        """Solve out the cross accelerations and return ``(Ma, Mb)``."""
        x1, x2 = self.cross_acceleration
        coupling = np.array([[1.0, -x1], [-x2, 1.0]])
        Q = np.diag(self.own_displacement)
        P = np.array([[self.own_velocity[0], self.cross_velocity[0]],
                      [self.cross_velocity[1], self.own_velocity[1]]])
        return np.linalg.solve(coupling, Q), np.linalg.solve(coupling, P)


def second_order_coeffs(p):
    p = as_params(p)
    c, g, gl, k = p.c, p.gamma, p.gamma_l, p.k
    d = c + 1.0
    return SecondOrderCoeffs(
        own_velocity=((g - d * gl) / d, -(g + d * gl) / d),
        own_displacement=((k - 1) / d, -(k + 1) / d),
        cross_acceleration=(c / d, c / d),
        cross_velocity=(c * gl / d, c * gl / d),
    )


@dataclass(frozen=True)
class CurrentBreakdown:
    """Branch currents in units of V/z0, each of shape ``(n, 2)`` (node 1, node 2)."""

    i_R: np.ndarray
    i_C: np.ndarray
    i_L: np.ndarray
    i_C0: np.ndarray

    def balance(self):
        return self.i_R + self.i_C + self.i_L + self.i_C0


def _time_derivative(V, dt):
    dV = np.empty_like(V)
    dV[1:-1] = (V[2:] - V[:-2]) / (2 * dt)
    dV[0] = (-3 * V[0] + 4 * V[1] - V[2]) / (2 * dt)
    dV[-1] = (3 * V[-1] - 4 * V[-2] + V[-3]) / (2 * dt)
    return dV


def node_currents(p, trace):
    """Reconstruct the four branch currents at each node from the voltages.

    Capacitor and resistor currents come from the voltages and their central
    differences. The inductor current obeys ``V = gamma_l*i_L + di_L/dtau``;
    it is integrated with the trapezoidal rule, starting from the value that
    balances the node at the first sample.
    """
    p = as_params(p)
    if trace.is_single_node:
        raise DomainError("Kirchhoff check needs both node voltages")
    if trace.n_samples < 5:
        raise DomainError(f"Kirchhoff check needs at least 5 samples, got {trace.n_samples}")
    dt = trace.dt
    V = np.asarray(trace.samples[:, :2])
    dV = _time_derivative(V, dt)

    i_R = np.column_stack([-p.gamma * V[:, 0], p.gamma * V[:, 1]])
    i_C = dV
    coupling = p.c * (dV[:, 0] - dV[:, 1])
    i_C0 = np.column_stack([coupling, -coupling])

    i_L = np.empty_like(V)
    i_L[0] = -(i_R[0] + i_C[0] + i_C0[0])
    h = 0.5 * dt
    decay = (1.0 - p.gamma_l * h) / (1.0 + p.gamma_l * h)
    drive = h * (V[:-1] + V[1:]) / (1.0 + p.gamma_l * h)
    for n in range(V.shape[0] - 1):
        i_L[n + 1] = decay * i_L[n] + drive[n]
    return CurrentBreakdown(i_R=i_R, i_C=i_C, i_L=i_L, i_C0=i_C0)


def kirchhoff_residual(p, trace):
    """Node-law residual at the interior samples, shape ``(n - 2, 2)``."""
    return node_currents(p, trace).balance()[1:-1]
