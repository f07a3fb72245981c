"""Exact closed-system propagation and the non-perturbative energy ledgers.

The state is propagated with midpoint matrix exponentials. Eigen-trajectories
of ``rho(t)`` and ``H(t)`` are tracked step to step by overlap matching so the
spectral decompositions vary continuously. The three decompositions (Alicki,
entropy-based, work/heat/coherence) are then evaluated by finite differences
and trapezoidal quadrature on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import eigendecompose, validate_system
from .errors import ContinuityLoss, NonPositiveTemperature, StepUnstable
from .quadrature import cumtrapz, derivative
from .thermo import energy_scale

UNITARITY_TOL = 1e-12
MATCH_THRESHOLD = 0.9
MAX_REFINE = 64
CLUSTER_TOL = 1e-8


def _dagger(m):
    return np.swapaxes(m, -1, -2).conj()


def midpoint_propagators(h_mid, dt, hbar):
    """``exp(-i H dt / hbar)`` for a stack of Hermitian matrices."""
    lam, vec = np.linalg.eigh(h_mid)
    ph = np.exp(-1j * lam * (dt / hbar))
    u = (vec * ph[..., None, :]) @ _dagger(vec)
    eye = np.eye(h_mid.shape[-1])
    err = np.abs(_dagger(u) @ u - eye).max(axis=(-1, -2))
    if err.size and not err.max() <= UNITARITY_TOL:  # also catches nan
        i = int(np.nanargmax(err)) if np.any(np.isfinite(err)) else 0
        raise StepUnstable(f"step {i}: |u^dag u - 1| = {err[i]:.2e}", key="propagator")
    return u


# ---------------------------------------------------------------- tracking

def _clusters(vals, tol):
    cuts = np.flatnonzero(np.diff(vals) > tol) + 1
    return np.split(np.arange(len(vals)), cuts)


def _lowdin(x):
    s = _dagger(x) @ x
    ev, vec = np.linalg.eigh(s)
    if ev.min() <= 1e-300:
        return None
    return x @ ((vec * ev ** -0.5) @ _dagger(vec))


def _match(prev_vals, prev, vals, vecs, tol):
    """Continue tracked columns ``prev`` onto a fresh eigensystem.

    Eigenvalue clusters (gaps below ``tol``) are handled as subspaces: the
    previous columns assigned to a cluster are projected onto it and
    Lowdin-orthonormalized, which also fixes their phases. Returns
    ``(vals, vecs, min_overlap)``; overlap 0 signals a failed assignment.
    """
    d = len(vals)
    groups = _clusters(vals, tol)
    w = np.abs(_dagger(prev) @ vecs) ** 2
    weight = np.stack([w[:, g].sum(axis=1) for g in groups], axis=1)
    cap = [len(g) for g in groups]
    owner = np.full(d, -1)
    for flat in np.argsort(-weight, axis=None, kind="stable"):
        j, c = divmod(int(flat), len(groups))
        if owner[j] < 0 and cap[c] > 0:
            owner[j] = c
            cap[c] -= 1
    out_vecs = np.empty_like(prev)
    out_vals = np.empty(d)
    for c, g in enumerate(groups):
        js = np.flatnonzero(owner == c)
        js = js[np.argsort(prev_vals[js], kind="stable")]
        r = vecs[:, g]
        y = _lowdin(r @ (_dagger(r) @ prev[:, js]))
        if y is None:
            return vals, vecs, 0.0
        out_vecs[:, js] = y
        out_vals[js] = vals[g]
    overlap = np.abs(np.einsum("ij,ij->j", prev.conj(), out_vecs)).min()
    return out_vals, out_vecs, float(overlap)


@dataclass(frozen=True)
class Tracked:
    """Continuous eigen-trajectory: ``values[i, j]`` belongs to ``vectors[i, :, j]``."""

    values: np.ndarray
    vectors: np.ndarray
    min_overlap: float
    refined_steps: int


def _fast_track(vals, vecs, tol):
    # vectorized path: no clusters anywhere and every step a clean permutation
    if vals.shape[1] > 1 and np.diff(vals, axis=1).min() <= tol:
        return None
    r = _dagger(vecs[:-1]) @ vecs[1:]
    a = np.abs(r)
    perm = a.argmax(axis=2)
    n, d = perm.shape
    if n and not np.all(np.sort(perm, axis=1) == np.arange(d)):
        return None
    sigma = np.empty((n + 1, d), dtype=int)
    sigma[0] = np.arange(d)
    moved = np.flatnonzero(np.any(perm != np.arange(d), axis=1))
    cur = sigma[0]
    last = 0
    for i in moved:
        sigma[last + 1:i + 1] = cur
        cur = perm[i][cur]
        sigma[i + 1] = cur
        last = i + 1
    sigma[last + 1:] = cur
    steps = np.arange(n)[:, None]
    o = r[steps, sigma[:-1], sigma[1:]]
    mag = np.abs(o)
    if n and mag.min() < MATCH_THRESHOLD:
        return None
    phase = np.ones((n + 1, d), dtype=complex)
    phase[1:] = np.cumprod(o.conj() / mag, axis=0)
    idx = np.arange(n + 1)[:, None]
    out_vals = vals[idx, sigma]
    out_vecs = np.take_along_axis(vecs, sigma[:, None, :], axis=2) * phase[:, None, :]
    return Tracked(out_vals, out_vecs, float(mag.min()) if n else 1.0, 0)


def track_eigensystem(mats, refine=None, name="eigensystem", tol=CLUSTER_TOL):
    """Track the eigen-decomposition of a stack of Hermitian matrices.

    Parameters
    ----------
    mats : (N, d, d) Hermitian
    refine : callable ``(i, m) -> (m - 1, d, d)``, optional
        Matrices at ``m - 1`` interior points of step ``i -> i + 1``; used to
        subdivide a step whose matching overlap drops below 0.9.
    """
    mats = np.asarray(mats, dtype=complex)
    vals, vecs = np.linalg.eigh(mats)
    first = eigendecompose(mats[0])
    vals[0], vecs[0] = first.eigenvalues, first.eigenvectors
    fast = _fast_track(vals, vecs, tol)
    if fast is not None:
        return fast
    n = len(mats)
    out_vals = np.empty_like(vals)
    out_vecs = np.empty_like(vecs)
    out_vals[0], out_vecs[0] = vals[0], vecs[0]
    worst = 1.0
    refined = 0
    for i in range(n - 1):
        pv, pc = out_vals[i], out_vecs[i]
        nv, nc, ov = _match(pv, pc, vals[i + 1], vecs[i + 1], tol)
        if ov < MATCH_THRESHOLD:
            nv, nc, ov = _refined_match(pv, pc, vals[i + 1], vecs[i + 1], i, refine, tol, name)
            refined += 1
        out_vals[i + 1], out_vecs[i + 1] = nv, nc
        worst = min(worst, ov)
    return Tracked(out_vals, out_vecs, worst, refined)


def _refined_match(pv, pc, vals, vecs, i, refine, tol, name):
    if refine is not None:
        m = 2
        while m <= MAX_REFINE:
            sub_vals, sub_vecs = np.linalg.eigh(refine(i, m))
            cv, cc, ok = pv, pc, True
            for sv, sc in zip(sub_vals, sub_vecs):
                cv, cc, ov = _match(cv, cc, sv, sc, tol)
                if ov < MATCH_THRESHOLD:
                    ok = False
                    break
            if ok:
                cv, cc, ov = _match(cv, cc, vals, vecs, tol)
                if ov >= MATCH_THRESHOLD:
                    return cv, cc, ov
            m *= 2
    raise ContinuityLoss(f"eigenvector overlap below {MATCH_THRESHOLD} at step {i}", key=name)


# ---------------------------------------------------------------- trajectory

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Exact state and Hamiltonian on the grid, in the energy basis of ``h0``.

    ``rho_eig`` tracks ``rho(t) = sum_k rho_k(t) |k(t)><k(t)|`` and ``h_eig``
    tracks ``H(t) = sum_n E_n(t) |n(t)><n(t)|``.
    """

    times: np.ndarray
    rho: np.ndarray
    hamiltonian: np.ndarray
    hbar: float
    scale: float
    rho_eig: Tracked
    h_eig: Tracked

    @property
    def dt(self):
        return self.times[1] - self.times[0]

    @property
    def overlaps(self):
        """``|c_nk(t)|^2 = |<n(t)|k(t)>|^2``, shape ``(N, d, d)``."""
        return np.abs(_dagger(self.h_eig.vectors) @ self.rho_eig.vectors) ** 2


def _propagate(rho0, u):
    out = np.empty((len(u) + 1,) + rho0.shape, dtype=complex)
    out[0] = rho0
    r = rho0
    for i, step in enumerate(u):
        r = step @ r @ step.conj().T
        out[i + 1] = r
    return out


def propagate_exact(sys):
    """Propagate ``rho`` with ``u = exp(-i H(t + dt/2) dt / hbar)`` per step."""
    sys = validate_system(sys)
    grid = sys.grid
    t = grid.times
    dt = grid.dt
    hbar = sys.hbar
    u = midpoint_propagators(sys.hamiltonian(t[:-1] + 0.5 * dt), dt, hbar)
    rho = _propagate(sys.rho0_energy.astype(complex), u)
    ham = sys.hamiltonian(t)

    def rho_refine(i, m):
        h = dt / m
        sub_t = t[i] + (np.arange(m - 1) + 0.5) * h
        us = midpoint_propagators(sys.hamiltonian(sub_t), h, hbar)
        return _propagate(rho[i], us)[1:]

    def h_refine(i, m):
        return sys.hamiltonian(t[i] + dt * np.arange(1, m) / m)

    return Trajectory(
        times=t, rho=rho, hamiltonian=ham, hbar=hbar, scale=energy_scale(sys),
        rho_eig=track_eigensystem(rho, rho_refine, "rho"),
        h_eig=track_eigensystem(ham, h_refine, "hamiltonian"),
    )


# ---------------------------------------------------------------- observables

def _trace_product(a, b):
    return np.real(np.einsum("inm,imn->i", a, b))


def internal_energy(traj):
    """``U(t) = tr[rho H]``; returns ``(U, Delta U)``."""
    u = _trace_product(traj.rho, traj.hamiltonian)
    return u, u - u[0]


def purity(traj):
    return _trace_product(traj.rho, traj.rho)


def von_neumann_entropy(traj):
    """``S = -sum rho_k ln rho_k`` over tracked eigenvalues (``0 ln 0 = 0``)."""
    p = np.clip(traj.rho_eig.values, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def alicki_decomposition(traj):
    """``W_A = int tr[rho dH/dt]`` and ``Q_A = int tr[drho/dt H]``."""
    dt = traj.dt
    hdot = derivative(traj.hamiltonian, dt)
    rdot = derivative(traj.rho, dt)
    w = cumtrapz(_trace_product(traj.rho, hdot), dt)
    q = cumtrapz(_trace_product(rdot, traj.hamiltonian), dt)
    return w, q


def energy_basis_populations(traj):
    """``rho_n(t) = <n(t)|rho(t)|n(t)>`` in the tracked eigenbasis of ``H(t)``."""
    v = traj.h_eig.vectors
    return np.real(np.einsum("inj,inm,imj->ij", v.conj(), traj.rho, v))


def alicki_eigenbasis(traj):
    """Eigenbasis forms ``int sum rho_n dE_n`` and ``int sum E_n d rho_n``."""
    dt = traj.dt
    e = traj.h_eig.values
    pn = energy_basis_populations(traj)
    w = cumtrapz(np.sum(pn * derivative(e, dt), axis=1), dt)
    q = cumtrapz(np.sum(e * derivative(pn, dt), axis=1), dt)
    return w, q


def bertulio_decomposition(traj):
    """Work, heat and coherence from ``E_n(t)``, ``rho_k(t)`` and ``|c_nk(t)|^2``."""
    dt = traj.dt
    e = traj.h_eig.values
    p = traj.rho_eig.values
    c2 = traj.overlaps
    w = cumtrapz(np.einsum("ink,ik,in->i", c2, p, derivative(e, dt)), dt)
    q = cumtrapz(np.einsum("ink,in,ik->i", c2, e, derivative(p, dt)), dt)
    c = cumtrapz(np.einsum("in,ik,ink->i", e, p, derivative(c2, dt)), dt)
    return w, q, c


def state_energies(traj):
    """``<k(t)|H(t)|k(t)>`` along the tracked eigenvectors of ``rho``."""
    v = traj.rho_eig.vectors
    return np.real(np.einsum("inj,inm,imj->ij", v.conj(), traj.hamiltonian, v))


def entropy_based_decomposition(traj):
    """``W_E = int sum rho_k d<k|H|k>`` and ``Q_E = int sum d rho_k <k|H|k>``."""
    dt = traj.dt
    p = traj.rho_eig.values
    h = state_energies(traj)
    w = cumtrapz(np.sum(p * derivative(h, dt), axis=1), dt)
    q = cumtrapz(np.sum(derivative(p, dt) * h, axis=1), dt)
    return w, q


@dataclass(frozen=True)
class HeatCurrents:
    total: np.ndarray
    pop: np.ndarray
    coh: np.ndarray
    phi_pop: np.ndarray
    phi_coh: np.ndarray


def heat_current_split(traj, temperature):
    """Split the heat current into population and coherence parts.

    ``total`` is ``sum_n E_n d rho_n/dt`` in the eigenbasis of ``H(t)``; the
    entropy fluxes are ``phi = -Qdot / T``.
    """
    if not np.isfinite(temperature) or temperature <= 0:
        raise NonPositiveTemperature(f"T = {temperature!r}", key="temperature")
    dt = traj.dt
    e = traj.h_eig.values
    p = traj.rho_eig.values
    c2 = traj.overlaps
    total = np.sum(e * derivative(energy_basis_populations(traj), dt), axis=1)
    pop = np.einsum("in,ink,ik->i", e, c2, derivative(p, dt))
    coh = np.einsum("in,ik,ink->i", e, p, derivative(c2, dt))
    return HeatCurrents(total, pop, coh, -pop / temperature, -coh / temperature)


def state_basis_populations(sys, traj):
    """Exact ``rho_k(t) = <k|rho_I(t)|k>`` in the fixed basis of ``rho(0)``.

    The interaction picture is taken with respect to the scheduled free
    energies, matching the perturbative expansion.
    """
    sys = validate_system(sys)
    ph = np.exp(1j * sys.phases(traj.times))
    rho_i = ph[:, :, None] * traj.rho * ph.conj()[:, None, :]
    b = sys.basis
    return np.real(np.einsum("nk,inm,mk->ik", b.conj(), rho_i, b))
