"""Running (cumulative) Fourier-type integrals of a correlation function.

Everything the coefficient module needs reduces to

    F(x) = int_0^x exp(-g (x - s)) alpha(s) exp(-i w s) ds

evaluated at many upper limits ``x`` for a handful of frequencies ``w``.
The range is cut into uniform panels, each integrated by Gauss-Legendre;
panel sums are accumulated with a first-order recurrence so a whole grid of
upper limits costs O(number of panels) correlation evaluations.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

DEFAULT_ORDER = 8


def _gauss_legendre(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights  # mapped to [0, 1]


def running_transform(alpha, omegas, x, panel, decay=0.0, order=DEFAULT_ORDER):
    """Cumulative damped transform of ``alpha`` at upper limits ``x``.

    Parameters
    ----------
    alpha : callable
        Vectorized correlation function ``alpha(s)``.
    omegas : array_like, shape (K,)
        Frequencies ``w``.
    x : array_like, shape (N,)
        Non-negative upper limits, in any order.
    panel : float
        Panel width of the composite rule.
    decay : float
        Exponential memory rate ``g >= 0``.

    Returns
    -------
    ndarray, shape (N, K)
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise ValueError("upper limits must be non-negative")
    if not panel > 0:
        raise ValueError("panel width must be positive")
    nodes, weights = _gauss_legendre(order)
    n_panels = int(np.ceil(x.max(initial=0.0) / panel)) if x.size else 0

    starts = panel * np.arange(n_panels)
    s = starts[:, None] + panel * nodes[None, :]
    a_full = alpha(s) if n_panels else np.zeros((0, order), complex)

    j = np.clip(np.floor(x / panel).astype(int), 0, n_panels)
    rem = x - panel * j  # partial panel length, may be ~ -eps
    sp = (panel * j)[:, None] + rem[:, None] * nodes[None, :]
    a_part = alpha(sp)
    keep = np.exp(-decay * panel)

    out = np.empty((x.size, omegas.size), dtype=complex)
    for k, w in enumerate(omegas):
        if n_panels:
            f = a_full * np.exp(-1j * w * s - decay * (starts[:, None] + panel - s))
            sums = panel * (f @ weights)
            if decay == 0.0:
                cum = np.concatenate(([0.0], np.cumsum(sums)))
            else:
                cum = np.concatenate(([0.0], lfilter([1.0], [1.0, -keep], sums)))
        else:
            cum = np.zeros(1, complex)
        fp = a_part * np.exp(-1j * w * sp - decay * (x[:, None] - sp))
        out[:, k] = np.exp(-decay * rem) * cum[j] + rem * (fp @ weights)
    return out
