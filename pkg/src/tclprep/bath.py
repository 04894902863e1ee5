"""Thermal bath correlation functions and their Fourier transforms.

Conventions (hbar = 1):

    alpha(t)       = int_0^inf dw J(w) [coth(beta w / 2) cos(w t) - i sin(w t)]
    alpha_tilde(w) = int dt alpha(t) exp(-i w t)
    alpha_hat(w)   = int_0^inf dt alpha(t) exp(-i w t)

With this sign convention emission (energy flowing into the bath) appears at
negative frequency, ``alpha_tilde(-w) = 2 pi J(w) (n(w) + 1)``, and the
detailed-balance relation reads ``alpha_tilde(w) = conj(alpha_tilde(-w)) exp(-beta w)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

QUAD_EPSREL = 1e-10
# bernoulli-number coefficients of the trigamma asymptotic series, B_{2k}
_TRIGAMMA_SERIES = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


class NumericalError(RuntimeError):
    """Quadrature or series evaluation failed to reach its tolerance."""


def trigamma(z):
    """Trigamma function for complex ``z`` with ``Re z > 0`` (vectorized).

    Recurrence ``psi1(z) = 1/z**2 + psi1(z + 1)`` moves the argument out to
    ``|z| > 10`` where the asymptotic Bernoulli series is accurate to double
    precision.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0):
        raise ValueError("trigamma implemented for Re z > 0 only")
    acc = np.zeros_like(z)
    shift = 10
    for k in range(shift):
        acc += 1.0 / (z + k) ** 2
    w = z + shift
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros_like(w)
    power = inv  # 1/w**(2k+1)
    for b in _TRIGAMMA_SERIES:
        power = power * inv2
        series += b * power
    return acc + inv + 0.5 * inv2 + series


@dataclass(frozen=True)
class OhmicSpectralDensity:
    """``J(w) = coupling * w * exp(-w / cutoff)`` for ``w >= 0``."""

    cutoff: float
    coupling: float = 0.05
    family: str = field(default="ohmic-exp-cutoff", init=False)

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = self.coupling * omega * np.exp(-np.abs(omega) / self.cutoff)
        return np.where(omega >= 0, out, 0.0)


@dataclass(frozen=True)
class Bath:
    """Spectral density plus inverse temperature; ``beta = inf`` is zero temperature."""

    spectral_density: OhmicSpectralDensity
    beta: float = math.inf

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError("beta must be positive or +inf")

    @property
    def zero_temperature(self):
        return math.isinf(self.beta)

    @property
    def temperature(self):
        return 0.0 if self.zero_temperature else 1.0 / self.beta

    @property
    def cutoff(self):
        return self.spectral_density.cutoff

    @property
    def coupling(self):
        return self.spectral_density.coupling

    def occupation(self, omega):
        """Bose function ``1 / (exp(beta w) - 1)``."""
        omega = np.asarray(omega, dtype=float)
        if self.zero_temperature:
            return np.where(omega > 0, 0.0, np.where(omega < 0, -1.0, np.nan))
        with np.errstate(over="ignore", divide="ignore"):
            return 1.0 / np.expm1(self.beta * omega)

    def symmetrized_density(self, omega):
        """``J(w) coth(beta w / 2)`` with the removable ``w -> 0`` limit handled."""
        omega = np.asarray(omega, dtype=float)
        J = self.spectral_density
        if self.zero_temperature:
            return J(omega)
        x = 0.5 * self.beta * omega
        small = np.abs(x) < 1e-4
        safe_x = np.where(small, 1.0, x)
        x_coth = np.where(small, 1.0 + x * x / 3.0, safe_x / np.tanh(safe_x))
        return J.coupling * np.exp(-omega / J.cutoff) * (2.0 / self.beta) * x_coth


def _quad(f, a, b, what, scale=0.0, **kwargs):
    kwargs.setdefault("epsabs", 0.0)
    kwargs.setdefault("epsrel", QUAD_EPSREL)
    kwargs.setdefault("limit", 500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, full_output=1, **kwargs)
    value, err = out[0], out[1]
    if len(out) > 3 and out[3] and not _acceptable(max(abs(value), scale), err, kwargs["epsrel"]):
        raise NumericalError(f"{what}: quadrature did not converge (value={value:.6e}, "
                             f"error estimate={err:.3e}): {out[3].splitlines()[0]}")
    return value


def _acceptable(value, err, epsrel):
    # QUADPACK flags roundoff even when the error estimate is tiny
    return err <= 100 * epsrel * max(abs(value), 1e-300)


class CorrelationFunction:
    """Stationary bath correlation function ``alpha(t)`` and its transforms.

    Parameters
    ----------
    bath : Bath
    strategy : {"closed-form", "quadrature"}
        How :meth:`__call__` evaluates ``alpha(t)``.  The closed form is the
        rational function ``eta L^2 / (1 + i L t)^2`` plus, at finite
        temperature, a trigamma series for the thermal part.  ``quadrature``
        integrates over the spectral density directly and is far slower.
    """

    def __init__(self, bath, strategy="closed-form"):
        if strategy not in ("closed-form", "quadrature"):
            raise ValueError(f"unknown strategy {strategy!r}")
        self.bath = bath
        self.strategy = strategy
        self._zero = None

    def __repr__(self):
        return f"CorrelationFunction({self.bath!r}, strategy={self.strategy!r})"

    @property
    def cutoff(self):
        return self.bath.cutoff

    def __call__(self, t):
        if self.strategy == "closed-form":
            return self.closed_form(t)
        return self.quadrature(t)

    def closed_form(self, t):
        t = np.asarray(t, dtype=float)
        J = self.bath.spectral_density
        a = 1.0 / J.cutoff + 1j * t
        out = J.coupling / (a * a)
        if not self.bath.zero_temperature:
            beta = self.bath.beta
            out = out + (2.0 * J.coupling / beta**2) * trigamma(1.0 + a / beta).real
        return out

    def quadrature(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.array([self._alpha_quad(float(s)) for s in t.ravel()])
        return flat.reshape(t.shape)

    def _alpha_zero(self):
        if self._zero is None:
            sym = lambda w: float(self.bath.symmetrized_density(w))
            self._zero = _quad(sym, 0.0, 40.0 * self.cutoff, "alpha(0)", points=[self.cutoff])
        return self._zero

    def _alpha_quad(self, t):
        Lam = self.cutoff
        omega_max = 40.0 * Lam
        sym = lambda w: float(self.bath.symmetrized_density(w))
        dens = lambda w: float(self.bath.spectral_density(w))
        if t == 0.0:
            return complex(self._alpha_zero())
        s = abs(t)
        # Fourier-weighted Clenshaw-Curtis handles the oscillation when Lambda t is large
        # |alpha(t)| <= alpha(0): errors are judged against that scale since parts may vanish
        scale = self._alpha_zero()
        if Lam * s > 10:
            re = _quad(sym, 0.0, omega_max, "Re alpha", scale, weight="cos", wvar=s)
            im = -_quad(dens, 0.0, omega_max, "Im alpha", scale, weight="sin", wvar=s)
        else:
            re = _quad(lambda w: sym(w) * math.cos(w * s), 0.0, omega_max, "Re alpha", scale,
                       points=[Lam])
            im = -_quad(lambda w: dens(w) * math.sin(w * s), 0.0, omega_max, "Im alpha", scale,
                        points=[Lam])
        return complex(re, im if t > 0 else -im)

    def transform(self, omega):
        """Full Fourier transform ``alpha_tilde(w)``; real and non-negative."""
        omega = np.asarray(omega, dtype=float)
        J = self.bath.spectral_density
        x = -omega  # frequency absorbed by the bath
        damp = J.coupling * np.exp(-np.abs(x) / J.cutoff)
        if self.bath.zero_temperature:
            return 2 * np.pi * np.where(x > 0, damp * x, 0.0)
        beta = self.bath.beta
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            denom = -np.expm1(-beta * x)
            ratio = np.where(x == 0, 1.0 / beta, x / np.where(x == 0, 1.0, denom))
        return 2 * np.pi * damp * ratio

    def half_transform(self, omega, method="auto"):
        """One-sided transform ``alpha_hat(w) = int_0^inf alpha(t) exp(-i w t) dt``.

        ``method`` is ``"closed-form"`` (zero temperature only), ``"pv"``
        (principal-value integral over ``alpha_tilde``) or ``"direct"``
        (time-domain quadrature).  ``"auto"`` picks the closed form when
        available and the principal-value route otherwise.
        """
        if method == "auto":
            method = "closed-form" if self.bath.zero_temperature else "pv"
        omega = np.asarray(omega, dtype=float)
        if method == "closed-form":
            return self._half_closed(omega)
        fn = {"pv": self._half_pv, "direct": self._half_direct}.get(method)
        if fn is None:
            raise ValueError(f"unknown method {method!r}")
        flat = np.array([fn(float(w)) for w in omega.ravel()], dtype=complex)
        return flat.reshape(omega.shape)

    def _half_closed(self, omega):
        if not self.bath.zero_temperature:
            raise ValueError("closed-form half transform exists only at zero temperature")
        J = self.bath.spectral_density
        x = omega / J.cutoff
        if np.any(np.abs(x) > 600):
            raise NumericalError("|omega| / cutoff too large for the closed-form half transform")
        safe = np.where(x == 0, 1.0, x)
        tail = np.where(x == 0, 0.0, omega * np.exp(safe) * special.expi(-safe))
        imag = -J.coupling * (J.cutoff + tail)
        return 0.5 * self.transform(omega) + 1j * imag

    def _half_pv(self, omega):
        # PV int f(v)/(v - w) dv  =  int (f(v) - f(w))/(v - w) dv + f(w) log((W - w)/(W + w))
        f = lambda v: float(self.transform(v)) / (2 * np.pi)
        W = 60.0 * self.cutoff + abs(omega)
        fw = f(omega)

        def g(v):
            d = v - omega
            return 0.0 if d == 0 else (f(v) - fw) / d

        pts = sorted({0.0, omega, -self.cutoff, self.cutoff})
        pv = _quad(g, -W, W, "principal-value integral", points=pts, epsabs=1e-14 * self.cutoff)
        pv += fw * math.log((W - omega) / (W + omega))
        return complex(np.pi * fw, pv)

    def _half_direct(self, omega):
        alpha = self.closed_form
        re_a = lambda t: float(alpha(t).real)
        im_a = lambda t: float(alpha(t).imag)
        t_split = 50.0 / self.cutoff
        pts = [1.0 / self.cutoff, 10.0 / self.cutoff]

        def head(part, trig):
            return _quad(lambda t: part(t) * trig(omega * t), 0.0, t_split, "direct transform",
                         points=pts)

        re = head(re_a, math.cos) + head(im_a, math.sin)
        im = head(im_a, math.cos) - head(re_a, math.sin)
        if omega == 0.0:
            re += _quad(re_a, t_split, np.inf, "direct transform tail")
            im += _quad(im_a, t_split, np.inf, "direct transform tail")
        else:
            s, sgn = abs(omega), math.copysign(1.0, omega)
            # QAWF only honours an absolute tolerance
            tail = lambda part, w: _quad(part, t_split, np.inf, "direct transform tail", weight=w,
                                         wvar=s, epsabs=1e-13 * self.bath.coupling * self.cutoff)
            cos_r, cos_i = tail(re_a, "cos"), tail(im_a, "cos")
            sin_r, sin_i = sgn * tail(re_a, "sin"), sgn * tail(im_a, "sin")
            re += cos_r + sin_i
            im += cos_i - sin_r
        return complex(re, im)


def alpha(c, t):
    return c(t)


def alpha_tilde(c, omega):
    return c.transform(omega)


def alpha_half_fourier(c, omega, method="auto"):
    return c.half_transform(omega, method=method)


@dataclass(frozen=True)
class KMSReport:
    max_violation: float
    frequencies: np.ndarray
    violations: np.ndarray
    tolerance: float = 1e-6

    @property
    def passed(self):
        return bool(self.max_violation <= self.tolerance)


def kms_check(c, omega_grid, tolerance=1e-6):
    """Relative violation of ``alpha_tilde(w) = conj(alpha_tilde(-w)) exp(-beta w)``.

    At zero temperature the relation degenerates to ``alpha_tilde(w > 0) = 0``
    and the reported violation is ``|alpha_tilde(w)|`` relative to the scale
    ``2 pi eta cutoff`` for the positive frequencies of the grid.
    """
    w = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    lhs = c.transform(w)
    if c.bath.zero_temperature:
        scale = 2 * np.pi * c.bath.coupling * c.cutoff
        viol = np.where(w > 0, np.abs(lhs) / scale, 0.0)
    else:
        rhs = np.conj(c.transform(-w)) * np.exp(-c.bath.beta * w)
        denom = np.maximum(np.abs(lhs), np.abs(rhs))
        viol = np.where(denom > 0, np.abs(lhs - rhs) / np.where(denom > 0, denom, 1.0), 0.0)
    return KMSReport(float(np.max(viol, initial=0.0)), w, viol, tolerance)
