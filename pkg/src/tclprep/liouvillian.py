"""Time-local generator ``L(t) = L0(t) + L2(t)`` of the reduced dynamics.

Matrix forms use column-stacking vectorization, ``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

import numpy as np

from .operators import OperatorError, as_operator, dagger, projector


def apply_L0(H, rho):
    """Unitary part ``-i [H, rho]``."""
    return -1j * (H @ rho - rho @ H)


def dissipator(L, A, rho):
    """``[L, rho A^dag - A rho]`` for one channel with coefficient value ``A``."""
    X = rho @ dagger(A) - A @ rho
    return L @ X - X @ L


def apply_L2(channels, t, rho):
    """Sum of ``[L_n, rho (A_n)^dag - A_n rho]`` over ``(L_n, coefficient_n)`` channels.

    A coefficient may be a callable of ``t`` or an already evaluated matrix.
    """
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for L, coef in channels:
        A = coef(t) if callable(coef) else coef
        out = out + dissipator(L, A, rho)
    return out


def _kron_batch(A, B):
    """Batched Kronecker product over leading axes."""
    d1, d2 = A.shape[-1], B.shape[-1]
    out = A[..., :, None, :, None] * B[..., None, :, None, :]
    return out.reshape(A.shape[:-2] + (d1 * d2, d1 * d2))


def superop_matrix(H, channels_values):
    """Matrix of ``L0 + L2`` given ``H`` and evaluated ``(L, A)`` pairs (batched over A)."""
    H = np.asarray(H, dtype=complex)
    d = H.shape[-1]
    eye = np.broadcast_to(np.eye(d, dtype=complex), H.shape)
    out = -1j * (_kron_batch(eye, H) - _kron_batch(np.swapaxes(H, -1, -2), eye))
    for L, A in channels_values:
        A = np.asarray(A, dtype=complex)
        I = np.broadcast_to(np.eye(d, dtype=complex), A.shape)
        Lb = np.broadcast_to(L, A.shape)
        LA = Lb @ A
        AdL = dagger(A) @ Lb
        # L rho A^dag - L A rho - rho A^dag L + A rho L
        out = (out + _kron_batch(A.conj(), Lb) - _kron_batch(I, LA)
               - _kron_batch(np.swapaxes(AdL, -1, -2), I)
               + _kron_batch(np.swapaxes(Lb, -1, -2), A))
    return out


def vec(rho):
    return np.swapaxes(np.asarray(rho), -1, -2).reshape(np.shape(rho)[:-2] + (-1,))


def unvec(v, d):
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (d, d)), -1, -2)


class Liouvillian:
    """Generator built from a Hamiltonian schedule and coupling channels.

    Parameters
    ----------
    schedule : HamiltonianSchedule
        Supplies ``H_S(t)`` for ``t >= 0``.
    channels : list of (ndarray, callable)
        Coupling operator ``L_n`` and its coefficient ``t -> (A <> L)_n(t)``.
    """

    def __init__(self, schedule, channels):
        self.schedule = schedule
        self.channels = [(as_operator(L, "coupling operator"), coef) for L, coef in channels]

    @property
    def dim(self):
        return self.schedule.dim

    def hamiltonian(self, t):
        return self.schedule.hamiltonian_at(t)

    def coefficient_values(self, t):
        return [(L, coef(t)) for L, coef in self.channels]

    def __call__(self, t, rho):
        return apply_L0(self.hamiltonian(t), rho) + apply_L2(self.channels, t, rho)

    def as_matrix(self, t):
        return superop_matrix(self.hamiltonian(t), self.coefficient_values(t))

    def decay_rate(self, t, excited):
        return decay_rate_from_values(self.coefficient_values(t), excited)


def decay_rate_from_values(channel_values, excited):
    """``-tr(P_e L2{P_e})`` with ``P_e = |e><e|``, vectorized over coefficient batches.

    The unitary part drops out because ``P_e`` commutes with itself.
    """
    P = projector(excited)
    if P.shape != (2, 2):
        raise OperatorError("decay rate is defined for two-level systems only")
    rate = 0.0
    for L, A in channel_values:
        rate = rate - np.trace(P @ dissipator(L, np.asarray(A), P), axis1=-2, axis2=-1)
    return np.real(rate)


def decay_rate(liouvillian, t, excited):
    return liouvillian.decay_rate(t, excited)
