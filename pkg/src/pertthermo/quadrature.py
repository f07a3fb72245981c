"""Cumulative quadrature and finite differences along the leading time axis."""

import numpy as np
from scipy.integrate import cumulative_trapezoid


def cumtrapz(y, dt):
    """Running trapezoidal integral with ``out[0] = 0``."""
    return cumulative_trapezoid(np.asarray(y), dx=dt, axis=0, initial=0)


def cumstieltjes(f, g):
    """Running trapezoidal Stieltjes integral ``int_0^t f dg``.

    Uses the increments of ``g`` directly, so that
    ``cumstieltjes(f, g) + cumstieltjes(g, f) == f*g - f[0]*g[0]`` holds to
    rounding (discrete integration by parts).
    """
    f = np.asarray(f)
    g = np.asarray(g)
    inc = 0.5 * (f[1:] + f[:-1]) * (g[1:] - g[:-1])
    out = np.zeros((inc.shape[0] + 1,) + inc.shape[1:], dtype=inc.dtype)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def derivative(y, dt):
    """Second-order central differences, one-sided (second order) at the ends."""
    return np.gradient(np.asarray(y), dt, axis=0, edge_order=2)
