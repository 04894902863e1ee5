"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate as spi
from scipy.linalg import expm

from tclprep import config as cfgmod
from tclprep.cli import resolve_config
from tclprep.bath import Bath, CorrelationFunction, OhmicSpectralDensity, kms_check
from tclprep.coefficients import diamond_asymptotic
from tclprep.evolve import gamma_series, integrate, jolt_metrics
from tclprep.liouvillian import unvec, vec
from tclprep.operators import SIGMA_X, projector
from tclprep.scenarios import (
    EXCITED, GROUND, closed_evolution, factorized, prepare_by_flipping, prepare_by_freezing,
    prepare_by_swapping, switched, tls_hamiltonian,
)

ETA = 0.05
H0 = tls_hamiltonian(1.0)
RHO_E = projector(EXCITED)
# freezing-prepared / unprepared peak ratio at cutoff 100, eta 0.05, first verified run
FROZEN_PEAK_RATIO = 0.063460


def zero_t(cutoff, eta=ETA):
    return Bath(OhmicSpectralDensity(cutoff, eta))


def peak_of(scenario, use_states=True):
    if use_states:
        traj = integrate(scenario, decimate=10)
        t, g = traj.times, traj.observables["gamma"]
    else:
        n = int(math.ceil(scenario.t_max / scenario.dt - 1e-9))
        t = np.arange(n + 1) * scenario.dt
        g = gamma_series(scenario, t)
    return jolt_metrics(t, g, scenario.gamma_inf(), scenario.cutoff), t, g


def test_criterion_1_kms_relation(criterion):
    start = time.perf_counter()
    grid = np.array([0.5, 1, 2, 5, -0.5, -1, -2, -5])
    worst = 0.0
    for beta in (0.5, 1.0, 5.0):
        c = CorrelationFunction(Bath(OhmicSpectralDensity(100.0, ETA), beta))
        worst = max(worst, kms_check(c, grid).max_violation)
    # the spectrum used above must be the transform of the time-domain function
    c = CorrelationFunction(Bath(OhmicSpectralDensity(100.0, ETA), 1.0))
    ft_err = 0.0
    for w in (-1.0, -2.0):
        cos_part = spi.quad(lambda t: c(t).real, 0, np.inf, weight="cos", wvar=-w, limlst=200)[0]
        sin_part = spi.quad(lambda t: c(t).imag, 0, np.inf, weight="sin", wvar=-w, limlst=200)[0]
        numeric = 2 * (cos_part - sin_part)
        ft_err = max(ft_err, abs(numeric - c.transform(w)) / c.transform(w))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and ft_err <= 1e-6 and elapsed < 10
    criterion(1, ok, f"max KMS violation {worst:.2e}, transform check {ft_err:.1e}, "
                     f"{elapsed:.1f}s")
    assert ok


def test_criterion_2_correlation_oracle(criterion):
    start = time.perf_counter()
    cutoff = 100.0
    c = CorrelationFunction(zero_t(cutoff), strategy="quadrature")
    t = np.geomspace(1e-3, 1e2, 50) / cutoff
    closed = ETA * cutoff**2 / (1 + 1j * cutoff * t) ** 2
    err = float(np.max(np.abs(c(t) - closed) / np.abs(closed)))
    elapsed = time.perf_counter() - start
    ok = err <= 1e-8 and elapsed < 10
    criterion(2, ok, f"max relative deviation {err:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_jolt_existence_and_scale(criterion):
    start = time.perf_counter()
    peaks, times, inside = [], [], True
    for cutoff in (25.0, 50.0, 100.0):
        m, _, _ = peak_of(factorized(H0, SIGMA_X, zero_t(cutoff), RHO_E))
        peaks.append(m.peak_value)
        times.append(m.peak_time)
        inside &= 0.1 / cutoff <= m.peak_time <= 10 / cutoff
    increasing = peaks[0] < peaks[1] < peaks[2]
    elapsed = time.perf_counter() - start
    ok = inside and increasing and elapsed < 300
    criterion(3, ok, "peaks " + ", ".join(f"{p:.4g}" for p in peaks) + " at t = "
              + ", ".join(f"{t:.3g}" for t in times) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_4_switch_on_suppression(criterion):
    start = time.perf_counter()
    bath = zero_t(100.0)
    peaks = []
    for k in (1, 2, 4, 8, 16):
        m, _, _ = peak_of(switched(H0, SIGMA_X, bath, RHO_E, k / 100.0))
        peaks.append(m.peak_value)
    ordered = all(a > b for a, b in zip(peaks, peaks[1:]))
    slow = switched(H0, SIGMA_X, bath, RHO_E, 16 / 100.0)
    doubled = slow.with_cutoff(200.0)
    m200, _, _ = peak_of(doubled, use_states=False)
    change = abs(m200.peak_value - peaks[-1]) / peaks[-1]
    elapsed = time.perf_counter() - start
    ok = ordered and change <= 0.10 and elapsed < 600
    criterion(4, ok, "peaks " + ", ".join(f"{p:.4g}" for p in peaks)
              + f" (strictly decreasing: {ordered}); doubling the cutoff at fixed switch time "
                f"changes the peak by {100 * change:.1f}% (limit 10%), {elapsed:.1f}s")
    assert ok


def test_criterion_5_trivial_prepared_case(criterion):
    start = time.perf_counter()
    bath = zero_t(100.0)
    scen = prepare_by_freezing(projector(GROUND), bath, SIGMA_X, H0, H_minus=H0)
    t = np.linspace(0, 5, 100)
    prepared = scen.coefficient()(t)
    asym = diamond_asymptotic(SIGMA_X, H0, scen.correlation())
    rel = float(np.max(np.linalg.norm(prepared - asym, axis=(-2, -1))) / np.linalg.norm(asym))
    elapsed = time.perf_counter() - start
    ok = rel <= 1e-7 and elapsed < 60
    criterion(5, ok, f"max relative deviation from the asymptote {rel:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_6_preparation_suppresses_jolt(criterion):
    start = time.perf_counter()
    bath = zero_t(100.0)
    plain, _, _ = peak_of(factorized(H0, SIGMA_X, bath, RHO_E))
    frozen_scen = prepare_by_freezing(RHO_E, bath, SIGMA_X, H0)
    frozen, t, g = peak_of(frozen_scen)
    gamma_inf = frozen_scen.gamma_inf()
    early = float(np.max(np.abs(g[t <= 5 / 100.0 + 1e-12])))
    ratio = frozen.peak_value / plain.peak_value
    regression = abs(ratio - FROZEN_PEAK_RATIO) <= 1e-3 * FROZEN_PEAK_RATIO
    elapsed = time.perf_counter() - start
    ok = ratio <= 0.2 and early <= 2 * gamma_inf and regression and elapsed < 300
    criterion(6, ok, f"peak ratio {ratio:.5f} (frozen {FROZEN_PEAK_RATIO}), early excursion "
                     f"{early:.4g} vs 2x gamma_inf {2 * gamma_inf:.4g}, {elapsed:.1f}s")
    assert ok


def test_criterion_7_memory_erasure(criterion):
    start = time.perf_counter()
    scen = prepare_by_freezing(RHO_E, zero_t(100.0), SIGMA_X, H0)
    late = scen.coefficient()(np.array([100.0]))[0]
    target = scen.asymptotic_coefficient()
    rel = float(np.linalg.norm(late - target) / np.linalg.norm(target))
    elapsed = time.perf_counter() - start
    ok = rel <= 0.10 and elapsed < 300
    criterion(7, ok, f"relative distance to the post-preparation asymptote at t=100: {rel:.2e}, "
                     f"{elapsed:.1f}s")
    assert ok


def shipped_points():
    """Every bundled sweep point plus every recipe the config format offers."""
    points = []
    for name in ("fig1", "fig2"):
        cfg, _ = cfgmod.load(resolve_config(name))
        points += [p for _, p in cfgmod.sweep_points(cfg)]
    for kind in cfgmod.RECIPES:
        cfg = cfgmod.normalize({"scenario": {"kind": kind}})
        if kind == "equilibration":
            cfg["scenario"].update(beta_times_omega=1.0, target=[0.9, 0.1])
        if kind == "decoherence":
            cfg["scenario"]["coupling_operator"] = "sigma_z"
        points.append(cfg)
    for p in points:
        p["grid"]["t_max_times_omega"] = 1.0
    return points


def test_criterion_8_generator_sanity(criterion):
    start = time.perf_counter()
    trace_res = herm_res = purity_drift = 0.0
    for point in shipped_points():
        traj = integrate(cfgmod.build_scenario(point), decimate=10)
        trace_res = max(trace_res, traj.trace_residual())
        herm_res = max(herm_res, traj.hermiticity_residual())
        muted = {**point, "scenario": {**point["scenario"], "coupling_eta": 0.0}}
        free = integrate(cfgmod.build_scenario(muted), decimate=10)
        purity = np.real(np.einsum("nij,nji->n", free.states, free.states))
        purity_drift = max(purity_drift, float(np.max(np.abs(purity - purity[0]))))
    scen = prepare_by_freezing(projector(GROUND), zero_t(100.0), SIGMA_X, H0, H_minus=H0,
                               t_max=2.0)
    scen = replace(scen, rho0=np.full((2, 2), 0.5, complex))  # non-stationary start
    traj = integrate(scen)
    M = scen.asymptotic_liouvillian().as_matrix(0.0)
    expm_err = max(float(np.max(np.abs(unvec(expm(M * t) @ vec(scen.rho0), 2) - rho)))
                   for t, rho in zip(traj.times[::100], traj.states[::100]))
    elapsed = time.perf_counter() - start
    ok = (trace_res <= 1e-8 and herm_res <= 1e-8 and purity_drift <= 1e-9 and expm_err <= 1e-7
          and elapsed < 120)
    criterion(8, ok, f"trace {trace_res:.1e}, Hermiticity {herm_res:.1e}, zero-coupling purity "
                     f"drift {purity_drift:.1e}, matrix-exponential deviation {expm_err:.1e}, "
                     f"{elapsed:.1f}s")
    assert ok


def test_criterion_9_closed_preparation_oracles(criterion):
    start = time.perf_counter()
    muted = zero_t(100.0, eta=0.0)
    tau = 10.0
    worst = 1.0
    # flip: integrate through the drive and compare with the dense propagator
    for psi in (EXCITED, np.array([1, 1j], complex) / np.sqrt(2)):
        scen = prepare_by_flipping(psi, tau, muted, SIGMA_X, H0, t_max=tau)
        rho = integrate(scen, estimate_error=False).states[-1]
        oracle = closed_evolution(scen.H_prep, tau, scen.rho0)
        target = scen.params["target"]
        worst = min(worst, float(np.real(np.trace(rho @ oracle))),
                    float(np.real(np.vdot(target, oracle @ target))))
    # swap: pure ancilla state lands on the system
    phi = np.array([0.6, 0.8j], complex)
    scen = prepare_by_swapping(projector(phi), tau, muted, SIGMA_X, H0, t_max=tau)
    rho = integrate(scen, estimate_error=False).states[-1]
    oracle = closed_evolution(scen.H_prep, tau, scen.rho0)
    worst = min(worst, float(np.real(np.trace(rho @ oracle))),
                float(np.real(np.vdot(phi, scen.reduce(oracle) @ phi))))
    elapsed = time.perf_counter() - start
    ok = worst >= 1 - 1e-10 and elapsed < 10
    criterion(9, ok, f"lowest fidelity 1 - {1 - worst:.1e}, {elapsed:.1f}s")
    assert ok
