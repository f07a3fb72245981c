"""Interaction-picture drive, first-order amplitudes and density corrections.

Index conventions: ``n`` runs over the energy basis, ``k`` over the basis in
which the initial state is diagonal. ``c1[i, n, k]`` is the first-order
transition amplitude at grid time ``t_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import GridTooCoarse, ValidationError
from .quadrature import cumtrapz, derivative

PAPER_PRINTED = "paper_printed"
INDEPENDENT = "independent"
MODES = (PAPER_PRINTED, INDEPENDENT)

ALIASING_LIMIT = 0.1  # radians of fastest phase per grid step


def interaction_drive(sys, times):
    """``V_I(t)`` in the energy basis for every entry of ``times``."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    phi = sys.phases(t)
    rot = np.exp(1j * (phi[:, :, None] - phi[:, None, :]))
    return sys.drive_matrix(t) * rot


def interaction_picture_drive(sys, t):
    """``V_I(t) = exp(i H0 t / hbar) V(t) exp(-i H0 t / hbar)`` at one time."""
    if t < 0:
        raise ValidationError("t must be non-negative", key="t")
    return interaction_drive(sys, [t])[0]


@dataclass(frozen=True, eq=False)
class AmplitudeSet:
    """First-order amplitudes and the probabilities derived from them.

    ``c1_dot`` holds the exact integrand ``-(i/hbar) <n|V_I(t)|k>`` so that
    rates can also be formed without finite differences. ``pk``,
    ``pn_tilde`` and ``rates`` stay ``None`` until
    :func:`transition_probabilities` fills them.
    """

    times: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c1_dot: np.ndarray
    p1sq: np.ndarray
    pk: Optional[np.ndarray] = None
    pn_tilde: Optional[np.ndarray] = None
    rates: Optional[np.ndarray] = None

    @property
    def dt(self):
        return self.times[1] - self.times[0]

    def rates_from_integrand(self):
        """``d|c1|^2/dt = 2 Re(conj(c1) dc1/dt)`` evaluated pointwise."""
        return 2.0 * np.real(self.c1.conj() * self.c1_dot)

    def in_state_basis(self, basis):
        """Amplitudes ``<j|...|k>`` with both indices in the state basis."""
        return basis.conj().T @ self.c1


def check_grid(sys):
    """Raise :class:`GridTooCoarse` if the fastest phase aliases on the grid."""
    step_phase = sys.grid.dt * sys.max_transition_frequency()
    if step_phase > ALIASING_LIMIT:
        raise GridTooCoarse(
            f"dt * max frequency = {step_phase:.3g} rad exceeds {ALIASING_LIMIT}",
            key="grid/steps")


def first_order_amplitudes(sys):
    """``c1_nk(t) = -(i/hbar) int_0^t <n|V_I(t')|k> dt'`` by cumulative trapezoid."""
    check_grid(sys)
    t = sys.grid.times
    integrand = (-1j / sys.hbar) * (interaction_drive(sys, t) @ sys.basis)
    c1 = cumtrapz(integrand, sys.grid.dt)
    c1[0] = 0.0
    return AmplitudeSet(times=t, c0=sys.basis, c1=c1, c1_dot=integrand,
                        p1sq=np.abs(c1) ** 2)


def transition_probabilities(amps, sys):
    """Fill ``P_k``, ``P~_n`` and the rates ``R_{n<-k} = d|c1_nk|^2/dt``.

    Rates come from central differences on the grid.
    """
    rho = sys.populations
    p = amps.p1sq
    pk = rho[None, :] * p.sum(axis=1)
    pn = p @ rho
    rates = derivative(p, amps.dt)
    return replace(amps, pk=pk, pn_tilde=pn, rates=rates)


@dataclass(frozen=True, eq=False)
class DensityCorrections:
    """Diagonal corrections ``rho_k^(1)(t)``, ``rho_k^(2)(t)`` in the state basis."""

    times: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray
    mode: str


def rho_first_order_integrand(sys, times=None):
    """``<k|[V_I(t), rho(0)]|k>`` on ``times`` (the grid by default)."""
    t = sys.grid.times if times is None else np.atleast_1d(times)
    vi = interaction_drive(sys, t)
    rho = sys.rho0_energy
    comm = vi @ rho - rho @ vi
    b = sys.basis
    return np.einsum("nk,inm,mk->ik", b.conj(), comm, b)


def rho_first_order(sys):
    """``rho_k^(1)(t) = -(i/hbar) int_0^t <k|[V_I, rho(0)]|k>``."""
    integrand = rho_first_order_integrand(sys)
    r1 = cumtrapz((-1j / sys.hbar) * integrand, sys.grid.dt)
    return np.real(r1)


def rho_second_order(sys, amps, mode=INDEPENDENT):
    """Second-order population corrections in the state basis.

    ``independent`` is the gain-loss form
    ``sum_n rho_n |a_kn|^2 - rho_k sum_n |a_nk|^2`` that follows from the
    second Dyson term; ``paper_printed`` carries the opposite overall sign.
    ``a`` are the amplitudes with both indices in the state basis, equal to
    ``c1`` when that basis is the energy basis.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}", key="mode")
    a2 = np.abs(amps.in_state_basis(sys.basis)) ** 2
    rho = sys.populations
    gain = a2 @ rho
    loss = rho[None, :] * a2.sum(axis=1)
    rho2 = gain - loss if mode == INDEPENDENT else loss - gain
    return DensityCorrections(times=amps.times, rho1=rho_first_order(sys), rho2=rho2, mode=mode)
