"""Closed-form results for a two-level system under a harmonic drive.

The drive is ``V(t) = eps [[0, e^{i w t}], [e^{-i w t}, 0]]`` on
``H0 = diag(e1, e2)``, with the state initially diagonal in the energy basis.
All functions broadcast over ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .core import DriveSpec, SystemSpec, TimeGrid
from .errors import ResonantInput, ValidationError

SERIES_CUTOFF = 1e-6


@dataclass(frozen=True)
class TwoLevelParams:
    hbar: float = 1.0
    epsilon: float = 0.3
    omega: float = 1.2
    omega21: float = 1.0
    e1: float = 0.0
    e2: float = 1.0
    rho1: float = 0.8
    rho2: float = 0.2

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive", key="hbar")
        if abs(self.rho1 + self.rho2 - 1) > 1e-12:
            raise ValidationError("rho1 + rho2 must equal 1", key="rho1")
        if not self.e2 > self.e1:
            raise ValidationError("need e2 > e1", key="e2")
        if abs(self.hbar * self.omega21 - (self.e2 - self.e1)) > 1e-12:
            raise ValidationError("hbar * omega21 must equal e2 - e1", key="omega21")

    @classmethod
    def from_levels(cls, e1=0.0, e2=1.0, hbar=1.0, **kw):
        return cls(hbar=hbar, e1=e1, e2=e2, omega21=(e2 - e1) / hbar, **kw)

    @property
    def detuning(self):
        return self.omega - self.omega21

    def system(self, t_max, steps):
        """The matching :class:`SystemSpec` for the numerical engines."""
        eps = self.epsilon
        return SystemSpec(
            h0=np.array([self.e1, self.e2]),
            rho0=np.array([self.rho1, self.rho2]),
            drive=DriveSpec.harmonic([[0.0, eps], [eps, 0.0]], self.omega),
            grid=TimeGrid(t_max, steps),
            hbar=self.hbar,
        )


def sinc_kernel(delta, t):
    """``K(delta, t) = sin^2(delta t / 2) / (delta / 2)^2``.

    Switches to the series ``t^2 (1 - x^2/12 + x^4/360)``, ``x = delta t``,
    when ``|x| < 1e-6``.
    """
    delta = np.asarray(delta, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("t must be non-negative", key="t")
    x = delta * t
    small = np.abs(x) < SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        full = np.sin(0.5 * x) ** 2 / (0.5 * delta) ** 2
    series = t ** 2 * (1 - x ** 2 / 12 + x ** 4 / 360)
    out = np.where(small, series, full)
    return out[()] if out.ndim == 0 else out


def transition_probability(p, t):
    """``|c1_21(t)|^2 = |c1_12(t)|^2 = (eps/hbar)^2 K(omega - omega21, t)``."""
    return (p.epsilon / p.hbar) ** 2 * sinc_kernel(p.detuning, t)


def transition_rate(p, t):
    """``d|c1_21|^2/dt = (eps/hbar)^2 * 2 sin(delta t) / delta``."""
    d = p.detuning
    t = np.asarray(t, dtype=float)
    if abs(d) < SERIES_CUTOFF / max(1.0, float(np.max(t))):
        return (p.epsilon / p.hbar) ** 2 * 2 * t
    return (p.epsilon / p.hbar) ** 2 * 2 * np.sin(d * t) / d


def excited_population_exact(p, t):
    """Level-2 population from the rotating-frame (Rabi) solution."""
    rabi2 = (0.5 * p.detuning) ** 2 + (p.epsilon / p.hbar) ** 2
    amp = (p.epsilon / p.hbar) ** 2 / rabi2
    return p.rho2 + (p.rho1 - p.rho2) * amp * np.sin(np.sqrt(rabi2) * np.asarray(t)) ** 2


def _w1_bracket(w, w21, t):
    return (1 - np.cos(w * t)) / w - (1 - np.cos(w21 * t)) / w21


def work1(p, t):
    """Closed-form first-order work (off-resonant drive only)."""
    d = p.detuning
    if d == 0:
        raise ResonantInput("omega == omega21; use resonant_w1", key="omega")
    pref = 4 * p.epsilon ** 2 * p.omega * (p.rho1 - p.rho2) / (p.hbar * d)
    return pref * _w1_bracket(p.omega, p.omega21, np.asarray(t, dtype=float))


def resonant_w1(p, t):
    """``omega -> omega21`` limit of the first-order work."""
    w = p.omega21
    t = np.asarray(t, dtype=float)
    pref = 4 * p.epsilon ** 2 * w * (p.rho1 - p.rho2) / p.hbar
    return pref * (t * np.sin(w * t) / w - (1 - np.cos(w * t)) / w ** 2)


@dataclass(frozen=True)
class ClosedForms:
    W1: np.ndarray
    w1: np.ndarray
    U1: np.ndarray
    q1: np.ndarray
    Q2: np.ndarray
    q2: np.ndarray
    U2: np.ndarray
    W2: np.ndarray
    w2: np.ndarray


def closed_forms(p, t):
    """All first- and second-order closed forms at times ``t``."""
    t = np.asarray(t, dtype=float)
    w1_total = work1(p, t)
    k = (p.epsilon / p.hbar) ** 2 * sinc_kernel(p.detuning, t)
    zero = np.zeros_like(w1_total)
    q2 = (p.rho1 * p.e2 + p.rho2 * p.e1) * k
    heat2 = p.hbar * p.omega21 * (p.rho2 - p.rho1) * k
    u2 = (p.rho1 * p.e1 + p.rho2 * p.e2) * k
    forms = ClosedForms(W1=w1_total, w1=-0.5 * w1_total, U1=0.5 * w1_total, q1=zero,
                        Q2=heat2, q2=q2, U2=u2, W2=zero, w2=zero)
    assert np.allclose(forms.Q2 + forms.q2, forms.U2, rtol=0, atol=1e-14 * max(1.0, abs(p.e2)))
    assert np.array_equal(forms.U1, -forms.w1)
    return forms


def _sinc2(u):
    return (np.sin(u) / u) ** 2 if u != 0 else 1.0


def kernel_integral(t, half_width=20.0):
    """``int K(delta, t) d delta`` over ``|delta| <= half_width / t``.

    ``half_width=None`` integrates over the whole line, whose exact value is
    ``2 pi t``. Works in ``u = delta t / 2``, where ``K d delta =
    2 t sin^2(u)/u^2 du``, one ``sin^2`` lobe at a time; the whole-line tail
    beyond ``u = 40 pi`` is ``int (1 - cos 2u) / (2 u^2)`` done by a Fourier
    quadrature.
    """
    if t <= 0:
        raise ValidationError("t must be positive", key="t")
    umax = 40 * np.pi if half_width is None else 0.5 * half_width
    edges = np.append(np.arange(0.0, umax, np.pi), umax)
    total = sum(quad(_sinc2, a, b, epsabs=1e-14, epsrel=1e-12)[0]
                for a, b in zip(edges[:-1], edges[1:]))
    if half_width is None:
        flat, _ = quad(lambda u: 0.5 / u ** 2, umax, np.inf, epsabs=1e-14)
        wave, _ = quad(lambda u: 0.5 / u ** 2, umax, np.inf, weight="cos", wvar=2.0)
        total += flat - wave
    return 2 * 2 * t * total


def golden_rule_checks(p, t_max, half_width=20.0):
    """Finite-time faces of the golden rule.

    ``kernel_ratio`` is ``int K d delta / (2 pi t_max)`` over the window
    ``|delta| <= half_width / t_max`` (``None`` for the whole line).
    ``resonant_growth`` is ``P_1(t)/t^2`` at exact resonance, which should
    equal ``rho1 (eps/hbar)^2``.
    """
    ratio = kernel_integral(t_max, half_width) / (2 * np.pi * t_max)
    resonant = TwoLevelParams(hbar=p.hbar, epsilon=p.epsilon, omega=p.omega21,
                              omega21=p.omega21, e1=p.e1, e2=p.e2, rho1=p.rho1, rho2=p.rho2)
    growth = p.rho1 * transition_probability(resonant, t_max) / t_max ** 2
    return {
        "t": float(t_max),
        "half_width": None if half_width is None else float(half_width),
        "kernel_ratio": float(ratio),
        "kernel_within_2pct": bool(0.98 <= ratio <= 1.02),
        "resonant_growth": float(growth),
        "resonant_growth_expected": float(p.rho1 * (p.epsilon / p.hbar) ** 2),
    }
