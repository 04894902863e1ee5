"""Second-order master-equation coefficients ``(A <> L)(t)``.

Four variants share one representation:

``finite``
    ``int_0^t dtau alpha(t - tau) G_+(t, tau) L`` for a system that meets an
    uncorrelated bath at ``t = 0`` and then follows the schedule's
    piecewise-constant future Hamiltonians.
``switched``
    Same, with the interaction ramped on by ``theta(t)``:
    ``theta(t) int_0^t dtau theta(t - tau) alpha(tau) G_0(tau) L``.
``asymptotic``
    The ``t -> inf`` limit for the constant past Hamiltonian, assembled from
    one-sided transforms at the Bohr frequencies.
``prepared``
    Bath and system uncorrelated in the infinite past, evolving under the
    past Hamiltonian until ``t = 0``:
    ``A_+(t) - M(t){A_-(t) - A_-(inf)}`` with ``M(t) = G_+(t, 0) G_-(0, t)``.

All variants are evaluated on whole time grids at once through
:func:`tclprep.quadrature.running_transform`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import NumericalError
from .operators import (
    DomainError,
    HamiltonianSchedule,
    as_operator,
    mixing_operator,
    propagator,
)
from .quadrature import _gauss_legendre, running_transform

VARIANTS = ("finite", "switched", "asymptotic", "prepared")
STEP_HALVING_RTOL = 1e-7


@dataclass(frozen=True)
class ExponentialSwitch:
    """``theta(t) = 1 - exp(-t / tau)``."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("switch-on time must be positive")

    @property
    def decay(self):
        return 1.0 / self.tau

    def __call__(self, t):
        return -np.expm1(-np.asarray(t, dtype=float) / self.tau)


def max_bohr_frequency(*hamiltonians):
    return max((float(np.ptp(propagator(H).energies)) for H in hamiltonians), default=0.0)


def default_step(cutoff, hamiltonians=(), switch=None):
    """Panel width ``min(1/(20 cutoff), 1/(20 |H|), tau_s/20)``."""
    h = 1.0 / (20.0 * cutoff)
    spread = max_bohr_frequency(*hamiltonians)
    if spread > 0:
        h = min(h, 1.0 / (20.0 * spread))
    if switch is not None and getattr(switch, "tau", None):
        h = min(h, switch.tau / 20.0)
    return h


def _bohr_table(prop):
    freqs, inverse = np.unique(prop.bohr.ravel(), return_inverse=True)
    return freqs, inverse.reshape(prop.bohr.shape)


def _dress(prop, L, table):
    """Operator with eigenbasis entries ``L_ab * table[..., omega_ab]``."""
    freqs, inverse = _bohr_table(prop)
    L_e = prop.to_eigenbasis(L)
    return prop.from_eigenbasis(table[..., inverse] * L_e)


def finite_constant(L, H, correlation, t, step, decay=0.0):
    """``int_0^t ds exp(-decay (t - s)) alpha(s) e^{-iHs} L e^{iHs}`` on a grid."""
    prop = propagator(H)
    freqs, _ = _bohr_table(prop)
    F = running_transform(correlation, freqs, np.ravel(t), step, decay=decay)
    return _dress(prop, L, F).reshape(np.shape(t) + L.shape)


def finite_schedule(L, schedule, correlation, t, step):
    """Uncorrelated coefficient under a piecewise-constant future Hamiltonian.

    Each segment ``[s, e]`` already entered contributes
    ``G_+(t, e'){ sum_ab L_ab e^{i w D} [F_w(D + d) - F_w(D)] }`` with
    ``e' = min(e, t)``, ``D = t - e'`` and ``d = e' - s``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(t.shape + L.shape, dtype=complex)
    for s0, s1, H in schedule.segments:
        active = t > s0
        if not np.any(active):
            continue
        ta = t[active]
        end = np.minimum(s1, ta)
        lag = ta - end
        prop = propagator(H)
        freqs, _ = _bohr_table(prop)
        upper = running_transform(correlation, freqs, ta - s0, step)
        lower = running_transform(correlation, freqs, lag, step)
        table = np.exp(1j * freqs[None, :] * lag[:, None]) * (upper - lower)
        piece = _dress(prop, L, table)
        out[active] += schedule.propagate(ta, end, piece)
    return out


def asymptotic_constant(L, H, correlation, method="auto"):
    prop = propagator(H)
    freqs, _ = _bohr_table(prop)
    table = correlation.half_transform(freqs, method=method)
    return _dress(prop, L, table)


@dataclass(frozen=True, eq=False)
class DiamondCoefficient:
    """Operator-valued coefficient ``t -> (A <> L)(t)`` of one coupling channel.

    Parameters
    ----------
    variant : {"finite", "switched", "asymptotic", "prepared"}
    coupling : ndarray
        System coupling operator ``L``.
    schedule : HamiltonianSchedule
        ``past`` enters the asymptotic and prepared variants; ``segments``
        drive the time-dependent ones.  The switched variant needs a single
        constant segment.
    correlation : CorrelationFunction
    switch : ExponentialSwitch or callable, optional
        Required by the switched variant.  Callables without a ``decay``
        attribute fall back to direct quadrature, O(N^2) in the grid size.
    step : float, optional
        Quadrature panel width; defaults to :func:`default_step`.
    """

    variant: str
    coupling: np.ndarray
    schedule: HamiltonianSchedule
    correlation: object
    switch: object = None
    step: float = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        L = as_operator(self.coupling, "coupling operator")
        if L.shape != (self.schedule.dim,) * 2:
            raise ValueError("coupling operator and schedule dimensions differ")
        object.__setattr__(self, "coupling", L)
        if self.variant == "switched":
            if self.switch is None:
                raise ValueError("switched coefficient needs a switch-on function")
            if len(self.schedule.segments) != 1:
                raise ValueError("switched coefficient supports a constant Hamiltonian only")
        if self.step is None:
            hs = [self.schedule.past] + [H for *_, H in self.schedule.segments]
            object.__setattr__(self, "step",
                               default_step(self.correlation.cutoff, hs, self.switch))
        object.__setattr__(self, "_asymptote", None)

    @property
    def dim(self):
        return self.schedule.dim

    def asymptote(self):
        """``(A <> L)_-(inf)`` for the past Hamiltonian (cached)."""
        if self._asymptote is None:
            object.__setattr__(self, "_asymptote",
                               asymptotic_constant(self.coupling, self.schedule.past, self.correlation))
        return self._asymptote

    def __call__(self, t, step=None):
        """Evaluate at scalar or array ``t``; returns shape ``t.shape + (d, d)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("coefficients are defined for t >= 0")
        if np.any(t > self.schedule.t_max):
            raise DomainError(f"t beyond schedule end {self.schedule.t_max}")
        h = self.step if step is None else step
        flat = t.ravel()
        fn = getattr(self, "_" + self.variant)
        return fn(flat, h).reshape(t.shape + (self.dim, self.dim))

    def _finite(self, t, h):
        return finite_schedule(self.coupling, self.schedule, self.correlation, t, h)

    def _asymptotic(self, t, h):
        return np.broadcast_to(self.asymptote(), t.shape + (self.dim,) * 2).copy()

    def _prepared(self, t, h):
        L, past = self.coupling, self.schedule.past
        future = finite_schedule(L, self.schedule, self.correlation, t, h)
        bracket = finite_constant(L, past, self.correlation, t, h) - self.asymptote()
        return future - mixing_operator(self.schedule, t, bracket)

    def _switched(self, t, h):
        L = self.coupling
        H = self.schedule.segments[0][2]
        theta = self.switch(t)[:, None, None]
        decay = getattr(self.switch, "decay", None)
        if decay is not None:
            plain = finite_constant(L, H, self.correlation, t, h)
            damped = finite_constant(L, H, self.correlation, t, h, decay=decay)
            return theta * (plain - damped)
        return theta * self._switched_direct(L, H, t, h)

    def _switched_direct(self, L, H, t, h):
        nodes, weights = _gauss_legendre(8)
        prop = propagator(H)
        out = np.zeros((t.size,) + L.shape, dtype=complex)
        for i, ti in enumerate(t):
            n = max(1, int(np.ceil(ti / h)))
            edges = np.linspace(0.0, ti, n + 1)
            width = np.diff(edges)
            tau = (edges[:-1, None] + width[:, None] * nodes).ravel()
            w = (width[:, None] * weights).ravel()
            f = w * self.switch(ti - tau) * self.correlation(tau)
            out[i] = np.tensordot(f, prop.apply(tau, L), axes=(0, 0))
        return out

    def relative_error(self, t):
        """Step-halving error estimate ``|A_h - A_{h/2}| / |A_{h/2}|`` (max-norm)."""
        coarse = self(t)
        fine = self(t, step=self.step / 2)
        scale = np.max(np.abs(fine), axis=(-2, -1))
        diff = np.max(np.abs(coarse - fine), axis=(-2, -1))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)


def _checked(coef, t):
    value = coef(t)
    err = np.max(coef.relative_error(t), initial=0.0)
    # the absolute floor covers values that vanish identically (t = 0)
    if err > STEP_HALVING_RTOL and np.max(np.abs(value), initial=0.0) > 1e-300:
        raise NumericalError(f"{coef.variant} coefficient: step halving changed the result by "
                             f"{err:.2e} (relative), above {STEP_HALVING_RTOL:.0e}")
    return value


def diamond_finite(L, H, correlation, t, step=None):
    """``int_0^t ds alpha(s) e^{-iHs} L e^{iHs}`` for constant ``H``."""
    sched = HamiltonianSchedule.constant(H)
    return _checked(DiamondCoefficient("finite", L, sched, correlation, step=step), t)


def diamond_switched(L, H, correlation, switch, t, step=None):
    sched = HamiltonianSchedule.constant(H)
    coef = DiamondCoefficient("switched", L, sched, correlation, switch=switch, step=step)
    return _checked(coef, t)


def diamond_asymptotic(L, H_minus, correlation, method="auto"):
    return asymptotic_constant(as_operator(L), as_operator(H_minus), correlation, method=method)


def diamond_prepared(L, schedule, correlation, t, step=None):
    return _checked(DiamondCoefficient("prepared", L, schedule, correlation, step=step), t)
