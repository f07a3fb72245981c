"""Order-by-order work, heat and coherence and the per-order first law.

Energies entering the bookkeeping are the diagonal elements of ``H(t)`` in
the energy basis, ``E_n(t) = <n|H(t)|n>``; their rates are the
Feynman-Hellmann values ``<n|dH/dt|n>``. First-order work and coherent work
use the full operator ``dH/dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .dyson import (
    INDEPENDENT,
    MODES,
    PAPER_PRINTED,
    first_order_amplitudes,
    interaction_drive,
    rho_second_order,
    transition_probabilities,
)
from .errors import GridMismatch, NonRealResult, ValidationError
from .quadrature import cumstieltjes, cumtrapz, derivative

IMAG_RTOL = 1e-8


def energy_scale(sys):
    """Largest ``|E_n|``, the unit for absolute tolerances (1 if all vanish)."""
    s = float(np.max(np.abs(sys.energies)))
    return s if s > 0 else 1.0


def _real(z, scale, what):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        worst = float(np.max(np.abs(z.imag))) if z.size else 0.0
        if worst > IMAG_RTOL * scale:
            raise NonRealResult(f"imaginary residue {worst:.3e} exceeds {IMAG_RTOL:g} * scale",
                                key=what)
        return np.ascontiguousarray(z.real)
    return z


def level_energies(sys, times=None):
    """``E_n(t) = <n|H(t)|n>``, shape ``(N, d)``."""
    t = sys.grid.times if times is None else times
    h = sys.hamiltonian(t)
    return np.real(np.diagonal(h, axis1=1, axis2=2)).copy()


def state_energies(sys, times=None):
    """``<k|H(t)|k>`` in the state basis, shape ``(N, d)``."""
    t = sys.grid.times if times is None else times
    b = sys.basis
    return np.real(np.einsum("nk,inm,mk->ik", b.conj(), sys.hamiltonian(t), b))


def commutator_integral(sys):
    """``M(t) = int_0^t [V_I(t'), rho(0)] dt'`` in the energy basis."""
    vi = interaction_drive(sys, sys.grid.times)
    rho = sys.rho0_energy
    return cumtrapz(vi @ rho - rho @ vi, sys.grid.dt)


def _work1_integrand(sys, m):
    # tr(M(t') dH/dt(t'))
    hdot = sys.hamiltonian_rate(sys.grid.times)
    return np.einsum("inm,imn->i", m, hdot)


def work_order0(sys):
    """``W0(t) = sum_n [E_n(t) - E_n(0)] <n|rho(0)|n>`` from the scheduled levels."""
    t = sys.grid.times
    e = sys.scheduled_energies(t)
    pops = np.real(np.diag(sys.rho0_energy))
    return (e - e[0]) @ pops


def work_order1(sys, m=None):
    """``W1(t) = -(2i/hbar) int_0^t dt' tr(M(t') dH/dt(t'))``."""
    if m is None:
        m = commutator_integral(sys)
    val = (-2j / sys.hbar) * cumtrapz(_work1_integrand(sys, m), sys.grid.dt)
    return _real(val, energy_scale(sys), "W1")


def work_order2(sys, amps, mode=PAPER_PRINTED):
    """Second-order work.

    ``paper_printed``: ``int sum_k <k|dH/dt|k> P_k``. ``independent``: the
    same construction with the gain-loss ``rho^(2)``, i.e.
    ``int sum_k rho_k^(2) d<k|H|k> + int sum_n P~_n dE_n``.
    Integrals over ``dH`` use the increments of ``H`` on the grid.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}", key="mode")
    if amps.pk is None:
        amps = transition_probabilities(amps, sys)
    h = state_energies(sys)
    if mode == PAPER_PRINTED:
        return cumstieltjes(amps.pk, h).sum(axis=1)
    rho2 = rho_second_order(sys, amps, INDEPENDENT).rho2
    e = level_energies(sys)
    return cumstieltjes(rho2, h).sum(axis=1) + cumstieltjes(amps.pn_tilde, e).sum(axis=1)


@dataclass(frozen=True, eq=False)
class HeatSeries:
    """Heat through second order.

    ``Q2`` is the transition form ``int sum rho_k (E_k - E_n) d|c1_nk|^2``
    (sign reversed in the independent mode); ``Q2_rate`` is the same
    integral written with the rates ``R_{n<-k}``; ``Q2_populations`` is
    ``int sum_k <k|H|k> d rho_k^(2)``.
    """

    Q0: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q2_rate: np.ndarray
    Q2_populations: np.ndarray
    mode: str


def heat_orders(sys, dens, amps):
    if amps.pk is None:
        amps = transition_probabilities(amps, sys)
    sign = 1.0 if dens.mode == PAPER_PRINTED else -1.0
    h = state_energies(sys)
    rho = sys.populations
    a2 = np.abs(amps.in_state_basis(sys.basis)) ** 2
    if np.array_equal(sys.basis, np.eye(sys.dim)):
        rates = amps.rates
    else:
        rates = derivative(a2, amps.dt)
    # gap[i, j, k] = h_k - h_j
    gap = h[:, None, :] - h[:, :, None]
    weight = sign * rho[None, None, :] * gap
    q2 = cumstieltjes(weight, a2).sum(axis=(1, 2))
    q2_rate = cumtrapz(np.sum(weight * rates, axis=(1, 2)), amps.dt)
    q1 = cumstieltjes(h, dens.rho1).sum(axis=1)
    q2_pop = cumstieltjes(h, dens.rho2).sum(axis=1)
    return HeatSeries(Q0=np.zeros_like(q2), Q1=q1, Q2=q2, Q2_rate=q2_rate,
                      Q2_populations=q2_pop, mode=dens.mode)


def coherence_order1(sys, m=None):
    """``(C1, q1, w1)`` with ``C1 = q1 + w1``.

    ``q1(t) = -(i/hbar) tr(M(t) H_d(t))`` where ``H_d(t)`` is the diagonal of
    ``H(t)`` in the energy basis, evaluated at the endpoint ``t``;
    ``w1(t) = (i/hbar) int_0^t tr(M dH/dt)``.
    """
    if m is None:
        m = commutator_integral(sys)
    scale = energy_scale(sys)
    e = level_energies(sys)
    q1 = _real((-1j / sys.hbar) * np.einsum("inn,in->i", m, e), scale, "q1")
    w1 = _real((1j / sys.hbar) * cumtrapz(_work1_integrand(sys, m), sys.grid.dt), scale, "w1")
    return q1 + w1, q1, w1


def coherence_order1_direct(sys, amps):
    """First-order coherence straight from the transition-coefficient form.

    Returns ``(C1, boundary, remainder)`` with
    ``C1 = int sum rho_k E_n d[2 Re(conj(c0_nk) c1_nk)]``,
    ``boundary = sum rho_k E_n(t) 2 Re(...)`` and
    ``remainder = -int sum rho_k 2 Re(...) dE_n``.
    """
    g = 2.0 * np.real(amps.c0.conj()[None] * amps.c1) @ sys.populations
    e = level_energies(sys)
    c1 = cumstieltjes(e, g).sum(axis=1)
    boundary = np.sum(e * g, axis=1)
    remainder = -cumstieltjes(g, e).sum(axis=1)
    return c1, boundary, remainder


def coherence_order2(sys, amps):
    """``(C2, q2, w2)``.

    ``C2 = int sum_n E_n dP~_n``, ``q2 = sum_n E_n(t) P~_n(t)`` and
    ``w2 = -int sum_n P~_n dE_n``.
    """
    if amps.pn_tilde is None:
        amps = transition_probabilities(amps, sys)
    e = level_energies(sys)
    p = amps.pn_tilde
    c2 = cumstieltjes(e, p).sum(axis=1)
    q2 = np.sum(e * p, axis=1)
    w2 = -cumstieltjes(p, e).sum(axis=1)
    return c2, q2, w2


_SERIES = ("W0", "W1", "W2", "Q0", "Q1", "Q2", "C0", "C1", "C2", "q1", "w1", "q2", "w2")


@dataclass(frozen=True, eq=False)
class LedgerSeries:
    """Per-order first-law bookkeeping on one time grid."""

    times: np.ndarray
    mode: str
    scale: float
    W0: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    Q0: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    q1: np.ndarray
    w1: np.ndarray
    q2: np.ndarray
    w2: np.ndarray
    orders: tuple = (0, 1, 2)
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def U0(self):
        return self.W0 + self.Q0 + self.C0

    @property
    def U1(self):
        return self.W1 + self.Q1 + self.C1

    @property
    def U2(self):
        return self.W2 + self.Q2 + self.C2

    @property
    def U_sum(self):
        parts = {0: self.U0, 1: self.U1, 2: self.U2}
        return sum((parts[n] for n in self.orders), np.zeros_like(self.times))

    @property
    def W_eff1(self):
        return self.W1 + self.w1

    @property
    def Q_eff1(self):
        return self.Q1 + self.q1

    @property
    def W_eff2(self):
        return self.W2 + self.w2

    @property
    def Q_eff2(self):
        return self.Q2 + self.q2

    def column(self, name):
        if name == "t":
            return self.times
        if name in self.extras:
            return self.extras[name]
        return getattr(self, name)


def first_law_ledger(times, mode, scale, orders=(0, 1, 2), extras=None, **series):
    """Assemble a :class:`LedgerSeries`, checking every series shares the grid."""
    missing = [s for s in _SERIES if s not in series]
    if missing:
        raise ValidationError(f"missing series {missing}", key="ledger")
    n = len(times)
    for name, arr in list(series.items()) + list((extras or {}).items()):
        if np.shape(arr) != (n,):
            raise GridMismatch(f"series has shape {np.shape(arr)}, grid has {n} points", key=name)
    bad = [o for o in orders if o not in (0, 1, 2)]
    if bad:
        raise ValidationError(f"unsupported orders {bad}", key="orders")
    return LedgerSeries(times=times, mode=mode, scale=scale, orders=tuple(sorted(orders)),
                        extras=dict(extras or {}), **series)


def perturbative_ledger(sys, mode=PAPER_PRINTED, orders=(0, 1, 2), amps=None):
    """Run every perturbative operation on ``sys`` and assemble the ledger."""
    if amps is None:
        amps = first_order_amplitudes(sys)
    if amps.pk is None:
        amps = transition_probabilities(amps, sys)
    dens = rho_second_order(sys, amps, mode)
    m = commutator_integral(sys)
    heat = heat_orders(sys, dens, amps)
    c1, q1, w1 = coherence_order1(sys, m)
    c2, q2, w2 = coherence_order2(sys, amps)
    zeros = np.zeros(len(amps.times))
    return first_law_ledger(
        amps.times, mode, energy_scale(sys), orders=orders,
        extras={"Q2_rate": heat.Q2_rate, "Q2_populations": heat.Q2_populations},
        W0=work_order0(sys), W1=work_order1(sys, m), W2=work_order2(sys, amps, mode),
        Q0=heat.Q0, Q1=heat.Q1, Q2=heat.Q2, C0=zeros,
        C1=c1, C2=c2, q1=q1, w1=w1, q2=q2, w2=w2,
    )
