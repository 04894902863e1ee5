"""Finite-dimensional operator algebra and unitary propagation.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``; stacks of
operators carry leading batch axes ``(..., d, d)``.  Energies are in units
where hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

HERMITIAN_ATOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

PAULI = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}


class OperatorError(ValueError):
    """Raised for malformed operators (shape, Hermiticity, normalization)."""


class DomainError(ValueError):
    """Raised when a time argument falls outside an operation's domain."""


def as_operator(X, name="operator"):
    """Coerce ``X`` to a square complex matrix."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or X.shape[0] == 0:
        raise OperatorError(f"{name} must be a non-empty square matrix, got shape {X.shape}")
    return X


def hermiticity_residual(X):
    X = np.asarray(X)
    return float(np.max(np.abs(X - np.swapaxes(X, -1, -2).conj()), initial=0.0))


def check_hermitian(X, name="operator", atol=HERMITIAN_ATOL):
    X = as_operator(X, name)
    scale = max(1.0, float(np.max(np.abs(X))))
    if hermiticity_residual(X) > atol * scale:
        raise OperatorError(f"{name} is not Hermitian (residual {hermiticity_residual(X):.3e})")
    return X


def check_density_matrix(rho, name="density matrix", trace_atol=1e-12, eig_atol=1e-10):
    rho = check_hermitian(rho, name)
    tr = np.trace(rho)
    if abs(tr - 1) > trace_atol:
        raise OperatorError(f"{name} has trace {tr:.15g}, expected 1")
    lowest = np.linalg.eigvalsh(rho)[0]
    if lowest < -eig_atol:
        raise OperatorError(f"{name} has negative eigenvalue {lowest:.3e}")
    return rho


def _check_dims(A, B):
    if np.shape(A)[-2:] != np.shape(B)[-2:]:
        raise OperatorError(f"dimension mismatch: {np.shape(A)} vs {np.shape(B)}")


def commutator(A, B):
    _check_dims(A, B)
    return A @ B - B @ A


def dagger(A):
    return np.swapaxes(np.asarray(A), -1, -2).conj()


def trace(A):
    return np.trace(A, axis1=-2, axis2=-1)


def projector(psi):
    psi = np.asarray(psi, dtype=complex).ravel()
    return np.outer(psi, psi.conj())


def normalized(psi, name="state vector", atol=1e-12):
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > atol:
        raise OperatorError(f"{name} is not normalized (norm {norm:.15g})")
    return psi


class Propagator:
    """Free unitary evolution under a constant Hamiltonian.

    The Hamiltonian is diagonalized once; :meth:`apply` then computes
    ``exp(-iH dt) X exp(+iH dt)`` for any batch of durations and operators
    by phase multiplication in the eigenbasis.
    """

    def __init__(self, H):
        H = check_hermitian(H, "Hamiltonian")
        self.hamiltonian = H
        H = 0.5 * (H + H.conj().T)
        self.energies, self.eigenvectors = np.linalg.eigh(H)
        # Bohr frequencies omega_ab = E_a - E_b
        self.bohr = self.energies[:, None] - self.energies[None, :]

    @property
    def dim(self):
        return self.energies.size

    def to_eigenbasis(self, X):
        V = self.eigenvectors
        return V.conj().T @ X @ V

    def from_eigenbasis(self, X):
        V = self.eigenvectors
        return V @ X @ V.conj().T

    def apply(self, dt, X):
        """Return ``exp(-iH dt) X exp(iH dt)``; ``dt`` broadcasts against ``X[..., :, :]``."""
        dt = np.asarray(dt, dtype=float)
        X = np.asarray(X, dtype=complex)
        phases = np.exp(-1j * dt[..., None, None] * self.bohr)
        return self.from_eigenbasis(phases * self.to_eigenbasis(X))


@lru_cache(maxsize=256)
def _cached_propagator(key, shape):
    H = np.frombuffer(key, dtype=complex).reshape(shape)
    return Propagator(H)


def propagator(H):
    """Return a cached :class:`Propagator` for ``H``."""
    H = as_operator(H, "Hamiltonian")
    return _cached_propagator(np.ascontiguousarray(H).tobytes(), H.shape)


def conjugate_propagate(H, dt, X):
    """``exp(-iH dt) X exp(+iH dt)`` for Hermitian ``H``."""
    return propagator(H).apply(dt, X)


@dataclass(frozen=True, eq=False)
class HamiltonianSchedule:
    """Piecewise-constant system Hamiltonian.

    ``past`` acts for all t < 0 (back to the infinite past).  ``segments`` is
    a tuple of ``(t_start, t_end, H)`` covering ``[0, t_end_last]``
    contiguously; the last segment may extend to ``inf``.
    """

    past: np.ndarray
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "past", check_hermitian(self.past, "past Hamiltonian"))
        segs = []
        expected = 0.0
        for i, (t0, t1, H) in enumerate(self.segments):
            t0, t1 = float(t0), float(t1)
            if not np.isclose(t0, expected, rtol=0, atol=1e-12 * max(1.0, abs(expected))):
                raise OperatorError(f"segment {i} starts at {t0}, expected {expected}")
            if not t1 > t0:
                raise OperatorError(f"segment {i} is empty or reversed: [{t0}, {t1}]")
            H = check_hermitian(H, f"segment {i} Hamiltonian")
            if H.shape != self.past.shape:
                raise OperatorError("segment Hamiltonians must match the past Hamiltonian's dimension")
            segs.append((expected, t1, H))
            expected = t1
        if not segs:
            raise OperatorError("schedule needs at least one segment")
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def constant(cls, H, past=None):
        """Single segment ``H`` on ``[0, inf)``; ``past`` defaults to ``H``."""
        H = as_operator(H, "Hamiltonian")
        return cls(past=H if past is None else past, segments=((0.0, np.inf, H),))

    @classmethod
    def two_stage(cls, past, prep, tau_prep, future):
        """``prep`` on ``[0, tau_prep)`` followed by ``future``; ``tau_prep = 0`` drops the first stage."""
        if tau_prep <= 0:
            return cls.constant(future, past=past)
        return cls(past=past, segments=((0.0, tau_prep, prep), (tau_prep, np.inf, future)))

    @property
    def dim(self):
        return self.past.shape[0]

    @property
    def t_max(self):
        return self.segments[-1][1]

    def hamiltonian_at(self, t):
        if t < 0:
            return self.past
        for t0, t1, H in self.segments:
            if t0 <= t < t1:
                return H
        if t == self.t_max:
            return self.segments[-1][2]
        raise DomainError(f"t={t} beyond schedule end {self.t_max}")

    def _pieces(self):
        yield -np.inf, 0.0, self.past
        yield from self.segments

    def propagate(self, t, tau, X):
        """Apply ``G(t, tau)`` to ``X``; ``t`` and ``tau`` broadcast against ``X[..., :, :]``.

        Composes the free propagators of every piece intersecting ``[tau, t]``
        in time order.
        """
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        if np.any(t < tau):
            raise DomainError("schedule propagation requires tau <= t")
        if np.any(t > self.t_max):
            raise DomainError(f"t exceeds schedule end {self.t_max}")
        out = np.asarray(X, dtype=complex)
        for t0, t1, H in self._pieces():
            duration = np.clip(np.minimum(t, t1) - np.maximum(tau, t0), 0.0, None)
            if np.any(duration > 0):
                out = propagator(H).apply(duration, out)
        return out


def schedule_propagate(schedule, t, tau, X):
    return schedule.propagate(t, tau, X)


def mixing_operator(schedule, t, X):
    """``G_+(t, 0) G_-(0, t) X``: undo ``t`` of past evolution, then run the future branch."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("mixing operator is defined for t >= 0")
    back = propagator(schedule.past).apply(-t, X)
    return schedule.propagate(t, 0.0, back)
