"""Fixed-step integration of ``d rho / dt = L(t) rho`` and jolt diagnostics."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .liouvillian import decay_rate_from_values, superop_matrix, unvec, vec
from .operators import hermiticity_residual

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "p_e", "re_rho01", "im_rho01", "purity", "gamma")
ERROR_TOLERANCE = 1e-6
POSITIVITY_WARN = -1e-6
_CHUNK = 4096


class IntegrationError(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    observables: dict
    dt: float
    error_estimate: float = math.nan
    min_eigenvalue: float = math.nan

    def trace_residual(self):
        tr = np.trace(self.states, axis1=-2, axis2=-1)
        return float(np.max(np.abs(tr - 1.0)))

    def hermiticity_residual(self):
        return hermiticity_residual(self.states)

    def to_csv(self, path):
        write_trajectory_csv(path, self)


@dataclass(frozen=True)
class JoltMetrics:
    peak_value: float
    peak_time: float
    settle_time: float
    cutoff_sensitivity: float = math.nan


def _rk4_step_matrices(G0, Gh, G1, dt):
    """Per-step propagators of classical RK4 for a linear, time-dependent generator."""
    eye = np.eye(G0.shape[-1], dtype=complex)
    K1 = G0
    K2 = Gh @ (eye + 0.5 * dt * K1)
    K3 = Gh @ (eye + 0.5 * dt * K2)
    K4 = G1 @ (eye + dt * K3)
    return eye + (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def _step_hamiltonians(schedule, starts, dt):
    mids = starts + 0.5 * dt
    return np.stack([schedule.hamiltonian_at(t) for t in mids]) if len(mids) else None


def _march(scenario, coupling, A_half, n_steps, dt):
    """Integrate ``n_steps`` steps given coefficients on the half-step grid (``2 n + 1`` points)."""
    d = scenario.dim
    v = vec(np.asarray(scenario.rho0, dtype=complex))
    out = np.empty((n_steps + 1, d * d), dtype=complex)
    out[0] = v
    for c0 in range(0, n_steps, _CHUNK):
        idx = np.arange(c0, min(c0 + _CHUNK, n_steps))
        H = _step_hamiltonians(scenario.schedule, idx * dt, dt)
        G0 = superop_matrix(H, [(coupling, A_half[2 * idx])])
        Gh = superop_matrix(H, [(coupling, A_half[2 * idx + 1])])
        G1 = superop_matrix(H, [(coupling, A_half[2 * idx + 2])])
        P = _rk4_step_matrices(G0, Gh, G1, dt)
        for k, i in enumerate(idx):
            v = P[k] @ v
            out[i + 1] = v
    return unvec(out, d)


def _stored_indices(n_steps, dt, window, decimate):
    idx = np.arange(n_steps + 1)
    keep = (idx * dt <= window * (1 + 1e-12)) | (idx % decimate == 0) | (idx == n_steps)
    return idx[keep]


def integrate(scenario, dt=None, t_max=None, estimate_error=True, decimate=1,
              jolt_window=None, tolerance=ERROR_TOLERANCE):
    """Run classical RK4 at fixed step over ``[0, t_max]``.

    Parameters
    ----------
    scenario : Scenario
    dt, t_max : float, optional
        Override the scenario grid.  ``dt`` may not exceed
        ``min(1/(20 cutoff), 1/(20 omega))``.
    estimate_error : bool
        Repeat the run at ``dt/2`` and report the largest state difference on
        the common grid; raises :class:`IntegrationError` above ``tolerance``.
    decimate : int
        Store every ``decimate``-th step after the jolt window
        ``[0, jolt_window]`` (default ``50 / cutoff``), which is always kept whole.
    """
    from .scenarios import JOLT_WINDOW, default_dt

    dt = scenario.dt if dt is None else float(dt)
    t_max = scenario.t_max if t_max is None else float(t_max)
    hs = [scenario.schedule.past] + [H for *_, H in scenario.schedule.segments]
    limit = default_dt(scenario.cutoff, hs)
    if dt > limit * (1 + 1e-9):
        raise ValueError(f"dt={dt:.3g} exceeds the stability/resolution bound {limit:.3g}")
    n = max(1, int(math.ceil(t_max / dt - 1e-9)))
    window = JOLT_WINDOW / scenario.cutoff if jolt_window is None else jolt_window

    coef = scenario.coefficient()
    L = scenario.coupling
    if estimate_error:
        A_q = coef(np.arange(4 * n + 1) * (dt / 4))
        A_half = A_q[::2]
    else:
        A_half = coef(np.arange(2 * n + 1) * (dt / 2))
    states = _march(scenario, L, A_half, n, dt)

    err = math.nan
    if estimate_error:
        fine = _march(scenario, L, A_q, 2 * n, dt / 2)
        err = float(np.max(np.abs(fine[::2] - states)))
        if err > tolerance:
            raise IntegrationError(f"step-halving error {err:.2e} exceeds {tolerance:.0e}; "
                                   f"reduce dt below {dt:.3g}")

    keep = _stored_indices(n, dt, window, max(1, int(decimate)))
    times = keep * dt
    kept = states[keep]
    A_steps = A_half[2 * keep]
    traj = Trajectory(times, kept, observables(scenario, kept, A_steps), dt, err)
    _check(traj, scenario)
    return traj


def observables(scenario, states, A):
    rho = scenario.reduce(states)
    e = np.asarray(scenario.excited, dtype=complex)
    p_e = np.real(np.einsum("i,...ij,j->...", e.conj(), rho, e))
    purity = np.real(np.einsum("...ij,...ji->...", rho, rho))
    if scenario.dim == 2:
        gamma = decay_rate_from_values([(scenario.coupling, A)], e)
    else:
        gamma = np.full(len(states), np.nan)
    return {"p_e": p_e, "rho01": rho[..., 0, 1], "purity": purity, "gamma": gamma}


def _check(traj, scenario):
    if traj.trace_residual() > 1e-8 or traj.hermiticity_residual() > 1e-8:
        raise IntegrationError(f"trajectory lost trace/Hermiticity (trace residual "
                               f"{traj.trace_residual():.2e}, Hermiticity residual "
                               f"{traj.hermiticity_residual():.2e})")
    herm = 0.5 * (traj.states + np.swapaxes(traj.states, -1, -2).conj())
    lowest = float(np.min(np.linalg.eigvalsh(herm)))
    traj.min_eigenvalue = lowest
    if lowest < POSITIVITY_WARN:
        log.warning("%s scenario: density matrix eigenvalue dipped to %.3e "
                    "(second-order generator is not positivity preserving)", scenario.recipe, lowest)


def gamma_series(scenario, times):
    """Decay rate straight from the coefficients, no state integration needed."""
    A = scenario.coefficient()(np.asarray(times, dtype=float))
    return decay_rate_from_values([(scenario.coupling, A)], scenario.excited)


def jolt_metrics(times, gamma, gamma_inf, cutoff, comparison_peak=None, window=None):
    """Peak, peak time and settle time of a decay-rate series.

    The series must cover ``[0, 50/cutoff]`` at resolution ``1/(20 cutoff)``
    or finer.  ``comparison_peak`` is the peak of the same scenario at twice
    the cutoff; the relative change is reported as the cutoff sensitivity.
    """
    times = np.asarray(times, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    window = 50.0 / cutoff if window is None else window
    if times.size < 2 or times[-1] < window * (1 - 1e-9):
        raise ValueError("decay-rate series does not cover the jolt window")
    inside = times <= window * (1 + 1e-9)
    spacing = np.max(np.diff(times[inside]), initial=0.0)
    if spacing > (1 + 1e-6) / (20.0 * cutoff):
        raise ValueError("decay-rate series too coarse to resolve the jolt")
    i = int(np.argmax(gamma))
    peak, t_peak = float(gamma[i]), float(times[i])
    band = np.abs(gamma[i:] - gamma_inf) <= 0.05 * abs(gamma_inf)
    settle = float(times[i + int(np.argmax(band))]) if band.any() else math.nan
    sens = math.nan
    if comparison_peak is not None:
        sens = abs(comparison_peak - peak) / abs(peak)
    return JoltMetrics(peak, t_peak, settle, sens)


def _fmt(x):
    return "%.17g" % x


def write_trajectory_csv(path, traj):
    obs = traj.observables
    cols = [traj.times, obs["p_e"], obs["rho01"].real, obs["rho01"].imag, obs["purity"], obs["gamma"]]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path):
    """Read any CSV written by this package into ``{column: array}``.

    Numeric columns come back as float arrays, text columns as string arrays.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for k, name in enumerate(header):
        col = [r[k] for r in body]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = np.array(col, dtype=str)
    return out


read_trajectory_csv = read_csv


def write_table_csv(path, header, rows):
    """Generic writer used for alpha / coefficient dumps and summaries."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
