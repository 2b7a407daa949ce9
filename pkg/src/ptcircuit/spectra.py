"""Complex eigenfrequencies of the generator and the coalescence metric.

Because ``A = [[0, I], [Ma, Mb]]``, an eigenpair ``A x = mu x`` has the form
``x = (u, mu*u)`` with ``(mu^2 I - mu Mb - Ma) u = 0``. The eigenvalues of
``A`` are therefore the roots of the real quartic ``det(mu^2 I - mu Mb - Ma)``
and the eigenfrequencies of ``H = iA`` are ``omega = i*mu``. A mode evolves
as ``exp(-i omega tau)``, so ``Im(omega) > 0`` means growth.
"""

import cmath
import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .model import build_state_space, params_from_targets

PAIRING_TOL = 1e-6
RESIDUAL_TOL = 1e-9
_TIE_TOL = 1e-9
_DEFECTIVE_TOL = 1e-7


@dataclass(frozen=True)
class ModePair:
    """An eigenfrequency with ``Re >= 0`` and its partner ``-conj(omega_plus)``."""

    omega_plus: complex
    omega_minus: complex
    eigenvector_plus: np.ndarray | None = None

    @property
    def mismatch(self):
        return abs(self.omega_minus + self.omega_plus.conjugate())


@dataclass(frozen=True)
class Spectrum:
    """Four eigenfrequencies in canonical order.

    The first two entries form the positive branch (sorted by real part,
    descending, ties broken by imaginary part); ``pairs`` holds them with
    their ``-conj`` partners. ``eigenvectors`` has the unit eigenvectors of
    ``A`` as columns in the same order as ``eigenfrequencies``.
    """

    eigenfrequencies: np.ndarray
    pairs: tuple
    residuals: np.ndarray
    eigenvectors: np.ndarray | None = None
    null_residuals: np.ndarray | None = None
    pairing_ok: bool = True

    @property
    def positive(self):
        return self.eigenfrequencies[:2]

    @property
    def omega_r(self):
        return self.eigenfrequencies.real

    @property
    def omega_i(self):
        return self.eigenfrequencies.imag

    @property
    def max_growth(self):
        return float(np.max(self.eigenfrequencies.imag))


@dataclass(frozen=True)
class CoalescenceReport:
    overlap: float
    real_gap: float
    imag_split: float
    defective: bool = False


def char_poly_coeffs(ss):
    """Coefficients of ``det(mu^2 I - mu Mb - Ma)``, highest power first."""
    Ma, Mb = ss.Ma, ss.Mb
    tr_a, tr_b = np.trace(Ma), np.trace(Mb)
    det_a = Ma[0, 0] * Ma[1, 1] - Ma[0, 1] * Ma[1, 0]
    det_b = Mb[0, 0] * Mb[1, 1] - Mb[0, 1] * Mb[1, 0]
    tr_ab = np.sum(Ma * Mb.T)
    return np.array([1.0, -tr_b, det_b - tr_a, tr_a * tr_b - tr_ab, det_a])


def _horner(coeffs, z):
    p = np.zeros_like(z) + coeffs[0]
    dp = np.zeros_like(z)
    for a in coeffs[1:]:
        dp = dp * z + p
        p = p * z + a
    return p, dp


def _roundoff_bound(coeffs, z):
    bound = np.zeros(z.shape)
    az = np.abs(z)
    for a in coeffs:
        bound = bound * az + abs(a)
    return 8 * np.finfo(float).eps * bound


def polynomial_roots(coeffs, maxiter=500):
    """All roots of a polynomial by Aberth-Ehrlich iteration plus Newton polishing.

    Raises
    ------
    NumericalError
        If the simultaneous iteration has not reached the roundoff level after
        ``maxiter`` sweeps.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    coeffs = coeffs / coeffs[0]
    n = coeffs.size - 1
    radius = 2 * max(abs(coeffs[k]) ** (1.0 / k) for k in range(1, n + 1)) or 1.0
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))

    for _ in range(maxiter):
        p, dp = _horner(coeffs, z)
        if np.all(np.abs(p) <= _roundoff_bound(coeffs, z)):
            break
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        repulsion = np.sum(1.0 / diff, axis=1) - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dp != 0, p / dp, 0.0)
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(np.isfinite(step), step, 0.0)
        z = z - step
        if np.max(np.abs(step)) <= 4 * np.finfo(float).eps * max(1.0, np.max(np.abs(z))):
            break
    else:
        p, _ = _horner(coeffs, z)
        raise NumericalError("polynomial root finder did not converge", best_residuals=np.abs(p))

    for _ in range(3):
        p, dp = _horner(coeffs, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = np.where(dp != 0, z - p / dp, z)
        p_trial, _ = _horner(coeffs, trial)
        better = np.abs(p_trial) < np.abs(p)
        z = np.where(better, trial, z)
    return z


def _symmetrize_conjugates(mu, tol):
    """Enforce exact conjugate symmetry of the roots of a real polynomial."""
    mu = mu.copy()
    unused = set(range(mu.size))
    while unused:
        i = min(unused)
        unused.discard(i)
        candidates = [(abs(mu[i] - mu[j].conjugate()), j) for j in unused]
        self_dist = 2 * abs(mu[i].imag)
        if candidates:
            dist, j = min(candidates)
            if dist < self_dist and dist <= tol * max(1.0, abs(mu[i])):
                centre = 0.5 * (mu[i] + mu[j].conjugate())
                mu[i], mu[j] = centre, centre.conjugate()
                unused.discard(j)
                continue
        if self_dist <= tol * max(1.0, abs(mu[i])):
            mu[i] = mu[i].real
    return mu


def _compare(a, b):
    scale = max(1.0, abs(a), abs(b))
    if abs(a.real - b.real) > _TIE_TOL * scale:
        return -1 if a.real > b.real else 1
    if a.imag != b.imag:
        return -1 if a.imag > b.imag else 1
    return 0


def canonical_order(omegas):
    return sorted(range(len(omegas)), key=functools.cmp_to_key(lambda i, j: _compare(omegas[i], omegas[j])))


def _involutions(n):
    for perm in itertools.permutations(range(n)):
        if all(perm[perm[i]] == i for i in range(n)):
            yield perm


def best_pairing(omegas):
    """Involution ``sigma`` minimising ``max |omega_j + conj(omega_sigma(j))|``."""
    best, best_err = None, math.inf
    for perm in _involutions(len(omegas)):
        err = max(abs(omegas[j] + omegas[perm[j]].conjugate()) for j in range(len(omegas)))
        if err < best_err:
            best, best_err = perm, err
    return best, best_err


def null_vector(A, mu):
    """Unit vector spanning the smallest singular direction of ``A - mu I``."""
    _, s, vh = np.linalg.svd(A - mu * np.eye(A.shape[0]))
    v = vh[-1].conj()
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    return v, s[-1]


def _assemble(ss, omegas, with_vectors=True):
    omegas = np.asarray(omegas, dtype=complex)
    order = canonical_order(list(omegas))
    omegas = omegas[order]
    coeffs = char_poly_coeffs(ss)
    p, _ = _horner(coeffs.astype(complex), -1j * omegas)
    residuals = np.abs(p)

    vectors = nulls = None
    if with_vectors:
        cols, nulls = [], []
        for w in omegas:
            v, smin = null_vector(ss.A, -1j * w)
            cols.append(v)
            nulls.append(smin)
        vectors = np.column_stack(cols)
        nulls = np.array(nulls)

    sigma, err = best_pairing(list(omegas))
    pairs = tuple(
        ModePair(omega_plus=complex(omegas[j]), omega_minus=complex(omegas[sigma[j]]),
                 eigenvector_plus=None if vectors is None else vectors[:, j])
        for j in (0, 1)
    )
    return Spectrum(eigenfrequencies=omegas, pairs=pairs, residuals=residuals,
                    eigenvectors=vectors, null_residuals=nulls, pairing_ok=err <= PAIRING_TOL)


def eigs_general(ss, with_vectors=True):
    """Eigenfrequencies of ``H = iA`` for any state space.

    Raises
    ------
    NumericalError
        If a root cannot be certified to ``|p(mu)| <= 1e-9``.
    """
    coeffs = char_poly_coeffs(ss)
    mu = polynomial_roots(coeffs)
    mu = _symmetrize_conjugates(mu, 1e-6)
    p, _ = _horner(coeffs.astype(complex), mu)
    if np.max(np.abs(p)) > RESIDUAL_TOL:
        raise NumericalError("eigenvalue residual above certification tolerance",
                             best_residuals=np.abs(p))
    return _assemble(ss, 1j * mu, with_vectors=with_vectors)


def eigs_lossless_analytic(c, gamma, with_vectors=True):
    """Closed-form spectrum for lossless inductors (``gamma_l = 0``).

    ``omega^2 = [2(1+c) - g^2 +- sqrt((g^2 - 2(1+c))^2 - 4(2c+1))] / (2(2c+1))``
    with principal square roots throughout, and ``omega_{2,4} = -omega_{1,3}``.
    """
    a = 2.0 * (1.0 + c) - gamma ** 2
    root = cmath.sqrt(complex(a * a - 4.0 * (2.0 * c + 1.0), 0.0))
    denom = 2.0 * (2.0 * c + 1.0)
    w1 = cmath.sqrt((a + root) / denom)
    w3 = cmath.sqrt((a - root) / denom)
    ss = build_state_space(params_from_targets(c, gamma, 0.0))
    return _assemble(ss, [w1, -w1, w3, -w3], with_vectors=with_vectors)


def ep_lossless(c):
    """Both gamma values where the lossless discriminant vanishes, lower first."""
    s = math.sqrt(1.0 + 2.0 * c)
    # 2(1+c) -+ 2s == (s -+ 1)^2, so the roots need no nested square root
    return s - 1.0, s + 1.0


def eigenvector_overlap(sp):
    """Overlap and gaps of the two positive-branch modes.

    At an exact exceptional point both null-space extractions return the same
    direction; the report is then flagged ``defective`` instead of failing.
    """
    if sp.eigenvectors is None:
        raise NumericalError("spectrum carries no eigenvectors")
    scale = max(1.0, float(np.max(np.abs(sp.eigenfrequencies))))
    if np.any(sp.null_residuals[:2] > 1e-6 * scale):
        raise NumericalError("eigenvector extraction failed", best_residuals=sp.null_residuals)
    v1, v2 = sp.eigenvectors[:, 0], sp.eigenvectors[:, 1]
    overlap = min(1.0, abs(np.vdot(v1, v2)))
    w1, w2 = sp.positive
    return CoalescenceReport(
        overlap=float(overlap),
        real_gap=float(abs(w1.real - w2.real)),
        imag_split=float(abs(w1.imag - w2.imag)),
        defective=bool(abs(w1 - w2) <= _DEFECTIVE_TOL * scale),
    )
