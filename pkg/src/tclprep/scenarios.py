"""Initial-state preparation recipes.

A :class:`Scenario` bundles everything needed to integrate one trajectory:
Hamiltonian schedule, coupling operator, bath, zeroth-order initial state,
coefficient variant and time grid.  Two-level conventions: basis index 0 is
the ground state, index 1 the excited state, ``H0 = (omega/2) diag(-1, 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .bath import CorrelationFunction
from .coefficients import DiamondCoefficient, ExponentialSwitch, max_bohr_frequency
from .liouvillian import Liouvillian, decay_rate_from_values, dissipator, apply_L0
from .operators import (
    HamiltonianSchedule,
    OperatorError,
    as_operator,
    check_density_matrix,
    check_hermitian,
    normalized,
    projector,
    propagator,
)

KINDS = ("factorized", "switched", "equilibrium-prepared", "nonequilibrium-prepared")
JOLT_WINDOW = 50.0  # in units of 1/cutoff
SEPARATION = 0.1  # numeric reading of "much less than"


def tls_hamiltonian(omega=1.0):
    return np.diag([-0.5 * omega, 0.5 * omega]).astype(complex)


GROUND = np.array([1, 0], dtype=complex)
EXCITED = np.array([0, 1], dtype=complex)


def default_dt(cutoff, hamiltonians=(), switch_time=None):
    dt = 1.0 / (20.0 * cutoff)
    spread = max_bohr_frequency(*hamiltonians)
    if spread > 0:
        dt = min(dt, 1.0 / (20.0 * spread))
    if switch_time:
        dt = min(dt, switch_time / 20.0)
    return dt


@dataclass(frozen=True, eq=False)
class Scenario:
    """Declarative description of one simulation.

    ``ancilla_dim > 1`` marks a composite system (x) ancilla space whose
    observables are reported for the system factor only.
    """

    kind: str
    recipe: str
    H0: np.ndarray
    coupling: np.ndarray
    bath: object
    rho0: np.ndarray
    schedule: HamiltonianSchedule
    t_max: float
    dt: float
    excited: np.ndarray
    switch_time: float = None
    tau_prep: float = 0.0
    H_prep: np.ndarray = None
    ancilla_dim: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        check_density_matrix(self.rho0, "initial state")
        check_hermitian(self.H0, "H0")
        if self.switch_time is not None and not self.switch_time > 0:
            raise ValueError("switch-on time must be positive")
        if self.tau_prep < 0:
            raise ValueError("preparation time must be non-negative")
        if not (self.t_max > 0 and self.dt > 0):
            raise ValueError("t_max and dt must be positive")

    @property
    def dim(self):
        return self.schedule.dim

    @property
    def system_dim(self):
        return self.dim // self.ancilla_dim

    @property
    def cutoff(self):
        return self.bath.cutoff

    def correlation(self):
        return CorrelationFunction(self.bath)

    def coefficient(self, step=None):
        corr = self.correlation()
        if self.kind == "factorized":
            return DiamondCoefficient("finite", self.coupling, self.schedule, corr, step=step)
        if self.kind == "switched":
            return DiamondCoefficient("switched", self.coupling, self.schedule, corr,
                                      switch=ExponentialSwitch(self.switch_time), step=step)
        return DiamondCoefficient("prepared", self.coupling, self.schedule, corr, step=step)

    def asymptotic_coefficient(self):
        """Late-time coefficient of the post-preparation Hamiltonian."""
        final = self.schedule.segments[-1][2]
        sched = HamiltonianSchedule.constant(final)
        return DiamondCoefficient("asymptotic", self.coupling, sched, self.correlation()).asymptote()

    def liouvillian(self):
        return Liouvillian(self.schedule, [(self.coupling, self.coefficient())])

    def asymptotic_liouvillian(self):
        A = self.asymptotic_coefficient()
        final = self.schedule.segments[-1][2]
        return Liouvillian(HamiltonianSchedule.constant(final), [(self.coupling, lambda t: A)])

    def gamma_inf(self):
        if self.dim != 2:
            return math.nan
        return float(decay_rate_from_values([(self.coupling, self.asymptotic_coefficient())],
                                            self.excited))

    def with_cutoff(self, cutoff):
        """Same scenario against a bath with a different cutoff (grid re-derived)."""
        sd = replace(self.bath.spectral_density, cutoff=cutoff)
        bath = replace(self.bath, spectral_density=sd)
        hs = [self.schedule.past] + [H for *_, H in self.schedule.segments]
        dt = min(self.dt, default_dt(cutoff, hs, self.switch_time))
        return replace(self, bath=bath, dt=dt)

    def reduce(self, rho):
        """Partial trace over the ancilla factor (no-op without ancilla)."""
        if self.ancilla_dim == 1:
            return rho
        d, a = self.system_dim, self.ancilla_dim
        r = np.asarray(rho).reshape(rho.shape[:-2] + (d, a, d, a))
        return np.trace(r, axis1=-3, axis2=-1)


@dataclass
class PreparationReport:
    adiabatic_ratio: float = math.nan
    flags: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def clear(self):
        return not any(self.flags.values())


def _grid(cutoff, hamiltonians, t_max, dt, switch_time=None):
    if dt is None:
        dt = default_dt(cutoff, hamiltonians, switch_time)
    return float(t_max), float(dt)


def factorized(H0, coupling, bath, rho0, t_max=5.0, dt=None, excited=EXCITED):
    """System and bath uncorrelated at ``t = 0``, coupled instantly."""
    sched = HamiltonianSchedule.constant(H0)
    t_max, dt = _grid(bath.cutoff, [H0], t_max, dt)
    return Scenario("factorized", "factorized", as_operator(H0), as_operator(coupling), bath,
                    as_operator(rho0), sched, t_max, dt, np.asarray(excited, complex))


def switched(H0, coupling, bath, rho0, switch_time, t_max=5.0, dt=None, excited=EXCITED):
    """Factorized start with ``theta(t) = 1 - exp(-t / switch_time)``; ``switch_time = 0`` is instant coupling."""
    if switch_time == 0:
        return factorized(H0, coupling, bath, rho0, t_max, dt, excited)
    sched = HamiltonianSchedule.constant(H0)
    t_max, dt = _grid(bath.cutoff, [H0], t_max, dt, switch_time)
    return Scenario("switched", "switched", as_operator(H0), as_operator(coupling), bath,
                    as_operator(rho0), sched, t_max, dt, np.asarray(excited, complex),
                    switch_time=float(switch_time))


def _prepared(recipe, H0, coupling, bath, rho0, H_minus, t_max, dt, excited, **extra):
    sched = HamiltonianSchedule.constant(H0, past=H_minus)
    t_max, dt = _grid(bath.cutoff, [H0, H_minus], t_max, dt)
    return Scenario("equilibrium-prepared", recipe, as_operator(H0), as_operator(coupling), bath,
                    as_operator(rho0), sched, t_max, dt, np.asarray(excited, complex), **extra)


def _in_eigenbasis(L, rho):
    w, V = np.linalg.eigh(check_hermitian(L, "coupling operator"))
    return V, V.conj().T @ rho @ V


def prepare_by_decoherence(coupling, rho_target, bath, H0=None, H_minus=None, t_max=5.0,
                           dt=None, excited=EXCITED):
    """Past Hamiltonian commuting with ``L``: the bath decoheres the system in the L basis.

    ``rho_target`` must be an incoherent mixture of ``L`` eigenstates.
    """
    L = as_operator(coupling, "coupling operator")
    rho = check_density_matrix(rho_target, "target state")
    V, rho_l = _in_eigenbasis(L, rho)
    off = rho_l - np.diag(np.diag(rho_l))
    if np.max(np.abs(off)) > 1e-10:
        raise OperatorError("target state has coherences in the coupling eigenbasis; "
                            "decoherence can only prepare incoherent mixtures of L eigenstates")
    d = L.shape[0]
    H_minus = np.zeros((d, d), complex) if H_minus is None else check_hermitian(H_minus, "H_minus")
    H0 = H_minus if H0 is None else H0
    scen = _prepared("decoherence", H0, L, bath, rho, H_minus, t_max, dt, excited)
    # every L eigenprojector must be stationary under the past asymptotic generator
    A = DiamondCoefficient("asymptotic", L, HamiltonianSchedule.constant(H_minus),
                           scen.correlation()).asymptote()
    for k in range(d):
        P = projector(V[:, k])
        drift = apply_L0(H_minus, P) + dissipator(L, A, P)
        if np.max(np.abs(drift)) > 1e-9 * max(1.0, np.max(np.abs(A))):
            raise OperatorError("past Hamiltonian does not commute with the coupling; "
                                "L eigenprojectors are not stationary")
    return scen


def adiabatic_ratio(H_minus, coupling, rho_target, tol=1e-12):
    """Largest population ratio ``p_a / p_b`` over levels of ``H_minus`` connected by ``L``."""
    prop = propagator(H_minus)
    L_e = prop.to_eigenbasis(coupling)
    p = np.real(np.diag(prop.to_eigenbasis(rho_target)))
    ratio = 1.0
    d = p.size
    for a in range(d):
        for b in range(d):
            if a != b and abs(L_e[a, b]) > tol:
                ratio = max(ratio, p[a] / p[b] if p[b] > 0 else math.inf)
    return ratio


def _adiabatic_flags(report, ratio, bath):
    report.adiabatic_ratio = ratio
    if bath.zero_temperature:
        bad = False
    else:
        # ratio <= exp(beta cutoff) / 100, compared in logs
        bad = math.log(ratio) > bath.beta * bath.cutoff - math.log(100.0)
    report.flags["adiabatic"] = bad
    if bad:
        report.warnings.append(
            f"population ratio {ratio:.3g} is not far below exp(beta*cutoff); "
            "preparation by equilibration will not remove the jolt")


def prepare_by_equilibration(rho_target, bath, coupling, H0, t_max=5.0, dt=None,
                             excited=EXCITED):
    """Past Hamiltonian ``-T log(rho_target)`` whose thermal state is the target.

    Returns ``(scenario, report)``.
    """
    if bath.zero_temperature:
        raise ValueError("preparation by equilibration needs a finite temperature; "
                         "use prepare_by_freezing at zero temperature")
    rho = check_density_matrix(rho_target, "target state")
    p, V = np.linalg.eigh(rho)
    if p.min() <= 1e-14:
        raise OperatorError("target state is singular; pure or rank-deficient states need "
                            "preparation by freezing at zero temperature")
    H_minus = V @ np.diag(-bath.temperature * np.log(p)) @ V.conj().T
    H_minus = 0.5 * (H_minus + H_minus.conj().T)
    scen = _prepared("equilibration", H0, coupling, bath, rho, H_minus, t_max, dt, excited)
    report = validate(scen)
    return scen, report


def prepare_by_freezing(rho_target, bath, coupling, H0, depth=None, H_minus=None, t_max=5.0,
                        dt=None, excited=EXCITED):
    """Zero-temperature preparation of a pure state as the ground state of the past Hamiltonian.

    By default ``H_minus = -depth |psi0><psi0|`` with ``depth = cutoff / 100``.
    """
    if not bath.zero_temperature:
        raise ValueError("preparation by freezing requires a zero-temperature bath")
    rho = check_density_matrix(rho_target, "target state")
    p, V = np.linalg.eigh(rho)
    if abs(p[-1] - 1) > 1e-10:
        raise OperatorError("preparation by freezing needs a pure target state")
    psi0 = V[:, -1]
    if H_minus is None:
        depth = bath.cutoff / 100.0 if depth is None else depth
        H_minus = -depth * projector(psi0)
    else:
        H_minus = check_hermitian(H_minus, "H_minus")
        E, W = np.linalg.eigh(H_minus)
        if abs(abs(np.vdot(W[:, 0], psi0)) - 1) > 1e-10 or (E.size > 1 and E[1] - E[0] < 1e-12):
            raise OperatorError("target must be the non-degenerate ground state of H_minus")
    return _prepared("freezing", H0, coupling, bath, projector(psi0), H_minus, t_max, dt, excited)


def flipping_hamiltonian(psi0, tau_prep, ground=GROUND):
    """``(pi / 2 tau) (|psi0><0| + |0><psi0|)``; rotates ``|0>`` into ``psi0`` in time ``tau``."""
    psi0 = normalized(psi0, "target state")
    ground = normalized(ground, "ground state")
    overlap = np.vdot(ground, psi0)
    if abs(overlap.imag) > 1e-12:
        raise OperatorError("<0|psi0> must be real")
    if not tau_prep > 0:
        raise ValueError("preparation time must be positive")
    M = np.outer(psi0, ground.conj())
    return (np.pi / (2 * tau_prep)) * (M + M.conj().T)


def swap_operator(dim):
    S = np.zeros((dim * dim, dim * dim), complex)
    for i in range(dim):
        for j in range(dim):
            S[j * dim + i, i * dim + j] = 1.0
    return S


def swap_hamiltonian(dim, tau_prep, structure="tensor"):
    """Hamiltonian that exchanges system and ancilla in time ``tau_prep``.

    ``structure="block"`` gives ``(pi / 2 tau)[[0, 1], [1, 0]]`` on the direct
    sum system (+) ancilla (dimension ``2 dim``); ``"tensor"`` gives
    ``(pi / 2 tau) SWAP`` on system (x) ancilla (dimension ``dim**2``).  Both
    propagate to ``-i`` times the exchange operator after ``tau_prep``.
    """
    if not tau_prep > 0:
        raise ValueError("preparation time must be positive")
    scale = np.pi / (2 * tau_prep)
    if structure == "block":
        eye = np.eye(dim, dtype=complex)
        zero = np.zeros((dim, dim), complex)
        return scale * np.block([[zero, eye], [eye, zero]])
    if structure == "tensor":
        return scale * swap_operator(dim)
    raise ValueError(f"unknown structure {structure!r}")


def _equilibrium_state(H, bath):
    """Zeroth-order equilibrium of ``H``: ground projector at T=0, Gibbs state otherwise."""
    E, V = np.linalg.eigh(H)
    if bath.zero_temperature:
        return projector(V[:, 0])
    w = np.exp(-bath.beta * (E - E[0]))
    return (V * (w / w.sum())) @ V.conj().T


def prepare_by_flipping(psi0, tau_prep, bath, coupling, H0, t_max=5.0, dt=None, excited=EXCITED):
    """Equilibrate under ``H0``, then drive with the flipping Hamiltonian for ``tau_prep``."""
    H0 = check_hermitian(H0, "H0")
    E, V = np.linalg.eigh(H0)
    ground = V[:, 0]
    # phase convention: <0|psi0> real
    psi0 = normalized(psi0, "target state")
    ov = np.vdot(ground, psi0)
    if abs(ov) > 1e-15:
        psi0 = psi0 * (abs(ov) / ov)
    H_prep = flipping_hamiltonian(psi0, tau_prep, ground)
    sched = HamiltonianSchedule.two_stage(H0, H_prep, tau_prep, H0)
    t_max, dt = _grid(bath.cutoff, [H0, H_prep], t_max, dt)
    dt = _align(dt, tau_prep)
    return Scenario("nonequilibrium-prepared", "flipping", H0, as_operator(coupling), bath,
                    _equilibrium_state(H0, bath), sched, t_max, dt,
                    np.asarray(excited, complex), tau_prep=float(tau_prep), H_prep=H_prep,
                    params={"target": psi0})


def prepare_by_swapping(rho_target, tau_prep, bath, coupling, H0, t_max=5.0, dt=None,
                        excited=EXCITED):
    """Equilibrate the system under ``H0``, then swap it with an ancilla holding ``rho_target``.

    The composite system (x) ancilla is the open system; the bath couples
    through ``L (x) 1`` and the ancilla carries no Hamiltonian of its own.
    """
    H0 = check_hermitian(H0, "H0")
    rho_t = check_density_matrix(rho_target, "target state")
    d = H0.shape[0]
    eye = np.eye(d, dtype=complex)
    H0c = np.kron(H0, eye)
    Lc = np.kron(as_operator(coupling), eye)
    H_prep = swap_hamiltonian(d, tau_prep, "tensor")
    sched = HamiltonianSchedule.two_stage(H0c, H_prep, tau_prep, H0c)
    rho0 = np.kron(_equilibrium_state(H0, bath), rho_t)
    t_max, dt = _grid(bath.cutoff, [H0c, H_prep], t_max, dt)
    dt = _align(dt, tau_prep)
    return Scenario("nonequilibrium-prepared", "swapping", H0c, Lc, bath, rho0, sched, t_max, dt,
                    np.asarray(excited, complex), tau_prep=float(tau_prep), H_prep=H_prep,
                    ancilla_dim=d, params={"target": rho_t})


def _align(dt, tau):
    """Largest step ``<= dt`` that divides ``tau`` (keeps RK stages off the switch point)."""
    if tau <= 0:
        return dt
    n = math.ceil(tau / dt - 1e-9)
    return tau / n


def closed_evolution(H, t, rho):
    """Exact unitary evolution by dense matrix exponential."""
    U = expm(-1j * np.asarray(H) * t)
    return U @ rho @ U.conj().T


def validate(scenario):
    """Check the separations that keep a preparation jolt-free; warnings only."""
    s = scenario
    report = PreparationReport()
    hs = [s.schedule.past] + [H for *_, H in s.schedule.segments]
    omega = max_bohr_frequency(*hs)
    Lam = s.cutoff
    report.flags["system_frequency"] = omega / Lam > SEPARATION
    if report.flags["system_frequency"]:
        report.warnings.append(f"system frequency {omega:.3g} is not small against cutoff {Lam:.3g}")
    report.flags["preparation_time"] = bool(s.tau_prep) and 1.0 / (s.tau_prep * Lam) > SEPARATION
    if report.flags["preparation_time"]:
        report.warnings.append("preparation time is not long against 1/cutoff")
    report.flags["switch_time"] = bool(s.switch_time) and 1.0 / (s.switch_time * Lam) > SEPARATION
    if report.flags["switch_time"]:
        report.warnings.append("switch-on time is not long against 1/cutoff; a jolt survives")
    if s.recipe == "equilibration":
        _adiabatic_flags(report, adiabatic_ratio(s.schedule.past, s.coupling, s.rho0), s.bath)
    return report
