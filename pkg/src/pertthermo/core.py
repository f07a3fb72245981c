"""Problem statement: Hamiltonians, drives, initial states and time grids.

All matrices supplied by the user live in a fixed computational basis.
:func:`validate_system` diagonalises the static Hamiltonian once and every
downstream module works in its energy eigenbasis ``{|n>}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateBasisAmbiguity,
    NonHermitian,
    NotDensityMatrix,
    NotDiagonalInDeclaredBasis,
    OutOfTable,
    ValidationError,
)

HERMITIAN_ATOL = 1e-12
DENSITY_ATOL = 1e-12
MAX_DIM = 64


def as_hermitian(m, name="matrix", atol=HERMITIAN_ATOL):
    """Return ``m`` as a read-only complex square array, checking Hermiticity.

    A 1-D input is taken as the diagonal of a diagonal matrix.
    """
    a = np.asarray(m, dtype=complex)
    if a.ndim == 1:
        a = np.diag(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}", key=name)
    if a.shape[0] < 2:
        raise ValidationError("dimension must be at least 2", key=name)
    if a.shape[0] > MAX_DIM:
        raise ValidationError(f"dimension {a.shape[0]} exceeds {MAX_DIM}", key=name)
    if not np.all(np.isfinite(a)):
        raise ValidationError("non-finite entries", key=name)
    dev = np.max(np.abs(a - a.conj().T))
    if dev > atol:
        raise NonHermitian(f"max |m - m^dagger| = {dev:.3e} > {atol:g}", key=name)
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues and matching unitary eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _pivot_index(vec, rtol=1e-9):
    mod = np.abs(vec)
    return int(np.flatnonzero(mod >= mod.max() * (1.0 - rtol))[0])


def _canonical_block(vectors):
    # Basis of span(vectors) that depends only on the projector onto it.
    m = vectors.shape[1]
    residual = vectors @ vectors.conj().T
    chosen = []
    for _ in range(m):
        norms = np.linalg.norm(residual, axis=0)
        j = _pivot_index(norms)
        v = residual[:, j] / norms[j]
        chosen.append(v)
        residual = residual - np.outer(v, v.conj() @ residual)
    return np.column_stack(chosen)


def eigendecompose(m, degeneracy_tol=1e-9):
    """Diagonalise a Hermitian matrix with a reproducible eigenvector gauge.

    Eigenvalues come out ascending. Inside a degenerate block the basis is
    rebuilt from the block projector, the vectors are ordered by the index of
    their largest-modulus component, and every column is rotated so that
    component is real and positive.
    """
    a = as_hermitian(m)
    w, v = np.linalg.eigh(a)
    tol = degeneracy_tol * max(1.0, float(np.max(np.abs(w))))
    vecs = v.copy()
    start = 0
    n = len(w)
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = _canonical_block(vecs[:, start:stop])
            order = sorted(range(block.shape[1]), key=lambda j: _pivot_index(block[:, j]))
            vecs[:, start:stop] = block[:, order]
            w[start:stop] = np.mean(w[start:stop])
        start = stop
    for j in range(n):
        p = _pivot_index(vecs[:, j])
        vecs[:, j] *= np.exp(-1j * np.angle(vecs[p, j]))
        vecs[p, j] = abs(vecs[p, j])
    w.flags.writeable = False
    vecs.flags.writeable = False
    return Spectrum(w, vecs)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * t_max / steps`` for ``i = 0..steps``."""

    t_max: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise ValidationError("t_max must be positive", key="grid/t_max")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValidationError("steps must be an integer >= 2", key="grid/steps")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "t_max", float(self.t_max))

    @property
    def dt(self):
        return self.t_max / self.steps

    @property
    def times(self):
        return np.linspace(0.0, self.t_max, self.steps + 1)

    def __len__(self):
        return self.steps + 1


HARMONIC = "harmonic"
CUSTOM_SAMPLED = "custom_sampled"


@dataclass(frozen=True, eq=False)
class DriveSpec:
    """External perturbation ``V(t)``.

    For ``harmonic`` drives the strictly lower triangle of ``coupling``
    oscillates as ``v_nk exp(-i omega t)``, the upper triangle carries the
    conjugate phase and the diagonal is static. ``custom_sampled`` drives are
    linearly interpolated between ``(sample_times[j], sample_values[j])``.
    """

    kind: str
    coupling: Optional[np.ndarray] = None
    omega: float = 0.0
    sample_times: Optional[np.ndarray] = None
    sample_values: Optional[np.ndarray] = None

    @classmethod
    def harmonic(cls, coupling, omega):
        return cls(HARMONIC, coupling=as_hermitian(coupling, "drive/coupling"), omega=float(omega))

    @classmethod
    def custom(cls, times, values):
        t = np.asarray(times, dtype=float)
        vals = np.asarray(values, dtype=complex)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValidationError("sample times must be strictly increasing, >= 2 entries",
                                  key="drive/samples")
        if vals.ndim != 3 or vals.shape[0] != len(t):
            raise ValidationError("need one square matrix per sample time", key="drive/samples")
        for j, m in enumerate(vals):
            as_hermitian(m, f"drive/samples/{j}")
        vals = vals.copy()
        vals.flags.writeable = False
        return cls(CUSTOM_SAMPLED, sample_times=t, sample_values=vals)

    @property
    def dim(self):
        if self.kind == HARMONIC:
            return self.coupling.shape[0]
        return self.sample_values.shape[1]

    def components(self):
        """``(lower, diagonal)`` parts of a harmonic coupling."""
        v = self.coupling
        return np.tril(v, -1), np.diag(np.diag(v))

    def values(self, times):
        """``V(t)`` stacked along the first axis, shape ``(len(times), d, d)``."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        if self.kind == HARMONIC:
            lower, diag = self.components()
            ph = np.exp(-1j * self.omega * t)[:, None, None]
            return lower * ph + lower.conj().T * ph.conj() + diag
        idx, frac = self._locate(t)
        v = self.sample_values
        return v[idx] * (1 - frac)[:, None, None] + v[idx + 1] * frac[:, None, None]

    def rates(self, times):
        """Time derivative ``dV/dt`` on ``times``."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        if self.kind == HARMONIC:
            lower, _ = self.components()
            ph = np.exp(-1j * self.omega * t)[:, None, None]
            w = self.omega
            return -1j * w * lower * ph + 1j * w * lower.conj().T * ph.conj()
        ts, v = self.sample_times, self.sample_values
        slopes = (v[1:] - v[:-1]) / np.diff(ts)[:, None, None]
        idx, frac = self._locate(t)
        out = slopes[idx].copy()
        # at an interior knot use the mean of the two adjacent slopes
        knot = (frac == 0) & (idx > 0)
        out[knot] = 0.5 * (slopes[idx[knot] - 1] + slopes[idx[knot]])
        return out

    def _locate(self, t):
        ts = self.sample_times
        lo, hi = ts[0], ts[-1]
        span = hi - lo
        if np.any(t < lo - 1e-12 * span) or np.any(t > hi + 1e-12 * span):
            raise OutOfTable(f"t outside sample table [{lo:g}, {hi:g}]", key="drive/samples")
        t = np.clip(t, lo, hi)
        idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
        frac = (t - ts[idx]) / (ts[idx + 1] - ts[idx])
        return idx, frac


def drive_value(d, t):
    """``V(t)`` for a single time."""
    if t < 0:
        raise ValidationError("t must be non-negative", key="t")
    return d.values([t])[0]


ENERGY_BASIS = "energy"
CUSTOM_BASIS = "custom"


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Full problem statement.

    ``h0`` and ``rho0`` accept 1-D arrays as diagonal shortcuts.
    ``rho0_basis="custom"`` takes the basis ``{|k>}`` from the columns of
    ``rho0_basis_vectors`` or, when those are omitted, from the eigenvectors
    of ``rho0``. ``energy_ramp`` holds optional rates ``dE_n/dt`` that make
    the free levels drift linearly, ``E_n(t) = E_n + g_n t``.
    """

    h0: np.ndarray
    rho0: np.ndarray
    drive: DriveSpec
    grid: TimeGrid
    hbar: float = 1.0
    rho0_basis: str = ENERGY_BASIS
    rho0_basis_vectors: Optional[np.ndarray] = None
    energy_ramp: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class ValidatedSystem:
    """A checked :class:`SystemSpec` with cached energy-basis data.

    Attributes
    ----------
    energies : (d,) ascending eigenvalues ``E_n`` of ``h0``.
    transform : unitary whose columns are ``|n>`` in the computational basis.
    basis : columns are ``|k>`` in the energy basis, so ``basis[n, k] = <n|k>``.
    populations : ``rho_k^(0)``.
    rho0_energy : initial state in the energy basis.
    bohr : ``omega_nk = (E_n - E_k) / hbar`` at ``t = 0``.
    ramp : ``dE_n/dt`` (zeros when the spectrum is static).
    """

    spec: SystemSpec
    hbar: float
    energies: np.ndarray
    transform: np.ndarray
    basis: np.ndarray
    populations: np.ndarray
    rho0_energy: np.ndarray
    bohr: np.ndarray
    ramp: np.ndarray
    _drive_parts: tuple = field(repr=False, default=())

    @property
    def dim(self):
        return len(self.energies)

    @property
    def grid(self):
        return self.spec.grid

    @property
    def drive(self):
        return self.spec.drive

    @property
    def static_spectrum(self):
        return not np.any(self.ramp)

    def __eq__(self, other):
        if not isinstance(other, ValidatedSystem):
            return NotImplemented
        pairs = [
            (self.energies, other.energies),
            (self.transform, other.transform),
            (self.basis, other.basis),
            (self.populations, other.populations),
            (self.ramp, other.ramp),
        ]
        return (
            self.hbar == other.hbar
            and self.grid == other.grid
            and all(a.shape == b.shape and np.array_equal(a, b) for a, b in pairs)
        )

    __hash__ = None

    def scheduled_energies(self, times):
        """Scheduled free energies ``E_n(t)``, shape ``(len(times), d)``."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return self.energies[None, :] + self.ramp[None, :] * t[:, None]

    def phases(self, times):
        """Dynamical phases ``(1/hbar) int_0^t E_n``, shape ``(len(times), d)``."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return (self.energies[None, :] * t[:, None]
                + 0.5 * self.ramp[None, :] * t[:, None] ** 2) / self.hbar

    def drive_matrix(self, times):
        """``V(t)`` in the energy basis, shape ``(len(times), d, d)``."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        d = self.drive
        if d.kind == HARMONIC:
            lower, diag = self._drive_parts
            ph = np.exp(-1j * d.omega * t)[:, None, None]
            return lower * ph + lower.conj().T * ph.conj() + diag
        s = self.transform
        return s.conj().T @ d.values(t) @ s

    def drive_rate(self, times):
        """``dV/dt`` in the energy basis."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        d = self.drive
        if d.kind == HARMONIC:
            lower, _ = self._drive_parts
            ph = np.exp(-1j * d.omega * t)[:, None, None]
            return -1j * d.omega * lower * ph + 1j * d.omega * lower.conj().T * ph.conj()
        s = self.transform
        return s.conj().T @ d.rates(t) @ s

    def hamiltonian(self, times):
        """Total ``H(t)`` in the energy basis."""
        h = self.drive_matrix(times)
        e = self.scheduled_energies(times)
        idx = np.arange(self.dim)
        h[:, idx, idx] += e
        return h

    def hamiltonian_rate(self, times):
        """``dH/dt`` in the energy basis (ramp plus drive)."""
        h = self.drive_rate(times)
        idx = np.arange(self.dim)
        h[:, idx, idx] += self.ramp
        return h

    def max_transition_frequency(self):
        """Largest angular frequency present in ``V_I(t)`` over the grid."""
        t_end = self.grid.t_max
        e0 = self.energies
        e1 = self.scheduled_energies([t_end])[0]
        w = np.maximum(np.abs(np.subtract.outer(e0, e0)), np.abs(np.subtract.outer(e1, e1)))
        w = w / self.hbar
        d = self.drive
        if d.kind != HARMONIC:
            return float(w.max())
        lower, diag = self._drive_parts
        present = np.abs(lower) > 0
        cands = [np.abs(np.where(np.abs(diag) > 0, w, 0.0)).max()]
        # lower part oscillates at omega_nk - omega, its adjoint at omega_nk + omega
        signed = np.subtract.outer(e0, e0) / self.hbar
        if present.any():
            cands.append(np.abs(signed - d.omega)[present].max())
            cands.append(np.abs(signed + d.omega)[present.T].max())
        return float(max(cands))


def validate_system(spec):
    """Check a :class:`SystemSpec` and cache its energy-basis representation.

    Validating an already validated system re-derives it from its spec.
    """
    if isinstance(spec, ValidatedSystem):
        spec = spec.spec
    if not (np.isfinite(spec.hbar) and spec.hbar > 0):
        raise ValidationError("hbar must be positive", key="hbar")
    h0 = as_hermitian(spec.h0, "h0")
    rho0 = as_hermitian(spec.rho0, "rho0")
    dim = h0.shape[0]
    if rho0.shape != h0.shape:
        raise ValidationError(f"shape {rho0.shape} differs from h0 {h0.shape}", key="rho0")
    if spec.drive.dim != dim:
        raise ValidationError(f"drive dimension {spec.drive.dim} differs from h0 ({dim})",
                              key="drive")
    if not isinstance(spec.grid, TimeGrid):
        raise ValidationError("grid must be a TimeGrid", key="grid")

    tr = np.trace(rho0)
    if abs(tr - 1) > DENSITY_ATOL:
        raise NotDensityMatrix(f"trace {tr.real:.15g} != 1", key="rho0")
    lam_min = np.linalg.eigvalsh(rho0).min()
    if lam_min < -DENSITY_ATOL:
        raise NotDensityMatrix(f"negative eigenvalue {lam_min:.3e}", key="rho0")

    spectrum = eigendecompose(h0)
    s = spectrum.eigenvectors
    energies = spectrum.eigenvalues
    rho_e = s.conj().T @ rho0 @ s

    if spec.rho0_basis == ENERGY_BASIS:
        basis = np.eye(dim, dtype=complex)
        off = rho_e - np.diag(np.diag(rho_e))
        if np.max(np.abs(off)) > DENSITY_ATOL:
            tol = 1e-9 * max(1.0, float(np.max(np.abs(energies))))
            same_level = np.abs(np.subtract.outer(energies, energies)) <= tol
            if np.all(np.abs(off[~same_level]) <= DENSITY_ATOL):
                raise DegenerateBasisAmbiguity(
                    "rho0 mixes states inside a degenerate level of h0; declare a custom basis",
                    key="rho0_basis")
            raise NotDiagonalInDeclaredBasis(
                f"max off-diagonal {np.max(np.abs(off)):.3e} in the energy basis", key="rho0")
    elif spec.rho0_basis == CUSTOM_BASIS:
        if spec.rho0_basis_vectors is None:
            basis_c = eigendecompose(rho0).eigenvectors
        else:
            basis_c = np.asarray(spec.rho0_basis_vectors, dtype=complex)
            if basis_c.shape != h0.shape:
                raise ValidationError("basis shape mismatch", key="rho0_basis_vectors")
            dev = np.max(np.abs(basis_c.conj().T @ basis_c - np.eye(dim)))
            if dev > 1e-10:
                raise ValidationError(f"basis not unitary (deviation {dev:.2e})",
                                      key="rho0_basis_vectors")
        basis = s.conj().T @ basis_c
        in_k = basis.conj().T @ rho_e @ basis
        off = in_k - np.diag(np.diag(in_k))
        if np.max(np.abs(off)) > DENSITY_ATOL:
            raise NotDiagonalInDeclaredBasis(
                f"max off-diagonal {np.max(np.abs(off)):.3e} in the declared basis", key="rho0")
    else:
        raise ValidationError(f"unknown basis label {spec.rho0_basis!r}", key="rho0_basis")

    populations = np.real(np.einsum("nk,nm,mk->k", basis.conj(), rho_e, basis))
    if spec.energy_ramp is None:
        ramp = np.zeros(dim)
    else:
        ramp = np.asarray(spec.energy_ramp, dtype=float)
        if ramp.shape != (dim,):
            raise ValidationError(f"expected {dim} rates", key="energy_ramp")
    bohr = np.subtract.outer(energies, energies) / spec.hbar

    parts = ()
    if spec.drive.kind == HARMONIC:
        lower, diag = spec.drive.components()
        # V_e(t) = A e^{-iwt} + A^dagger e^{iwt} + D; A need not stay triangular
        parts = (s.conj().T @ lower @ s, s.conj().T @ diag @ s)
    for arr in (basis, populations, rho_e, bohr, ramp):
        arr.flags.writeable = False
    return ValidatedSystem(
        spec=spec,
        hbar=float(spec.hbar),
        energies=energies,
        transform=s,
        basis=basis,
        populations=populations,
        rho0_energy=rho_e,
        bohr=bohr,
        ramp=ramp,
        _drive_parts=parts,
    )
