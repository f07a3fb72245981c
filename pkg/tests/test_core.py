import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pertthermo import (
    DegenerateBasisAmbiguity,
    DriveSpec,
    NonHermitian,
    NotDensityMatrix,
    NotDiagonalInDeclaredBasis,
    OutOfTable,
    SystemSpec,
    TimeGrid,
    ValidationError,
    eigendecompose,
    validate_system,
)
from pertthermo.core import drive_value

from conftest import random_hermitian, random_unitary


def two_level(rho0, h0=(0.0, 1.0), **kw):
    return SystemSpec(h0=np.array(h0), rho0=np.asarray(rho0),
                      drive=DriveSpec.harmonic([[0, 0.3], [0.3, 0]], 1.2),
                      grid=TimeGrid(2 * np.pi, 1000), **kw)


class TestValidation:
    def test_benchmark_system_accepted(self):
        sys = validate_system(two_level([0.8, 0.2]))
        assert np.allclose(sys.bohr, [[0, -1], [1, 0]])
        assert np.allclose(sys.populations, [0.8, 0.2])

    def test_bad_trace(self):
        with pytest.raises(NotDensityMatrix):
            validate_system(two_level([0.5, 0.6]))

    def test_negative_eigenvalue(self):
        with pytest.raises(NotDensityMatrix):
            validate_system(two_level([1.2, -0.2]))

    def test_off_diagonal_in_declared_basis(self):
        with pytest.raises(NotDiagonalInDeclaredBasis):
            validate_system(two_level([[0.8, 0.1], [0.1, 0.2]]))

    def test_non_hermitian(self):
        with pytest.raises(NonHermitian):
            validate_system(two_level([[0.8, 0.1], [0.0, 0.2]]))

    def test_degenerate_level_ambiguity(self):
        rho = [[0.4, 0.1, 0], [0.1, 0.4, 0], [0, 0, 0.2]]
        spec = SystemSpec(h0=np.array([1.0, 1.0, 2.0]), rho0=np.array(rho),
                          drive=DriveSpec.harmonic(np.zeros((3, 3)), 1.0),
                          grid=TimeGrid(1.0, 100))
        with pytest.raises(DegenerateBasisAmbiguity):
            validate_system(spec)

    def test_custom_basis_from_rho(self):
        rho = np.array([[0.6, 0.2], [0.2, 0.4]])
        sys = validate_system(two_level(rho, rho0_basis="custom"))
        back = sys.basis @ np.diag(sys.populations) @ sys.basis.conj().T
        assert np.allclose(back, sys.rho0_energy, atol=1e-14)

    def test_custom_basis_not_unitary(self):
        with pytest.raises(ValidationError, match="rho0_basis_vectors"):
            validate_system(two_level([0.8, 0.2], rho0_basis="custom",
                                      rho0_basis_vectors=np.array([[1, 0], [1, 1.0]])))

    def test_idempotent(self):
        sys = validate_system(two_level([0.8, 0.2]))
        assert validate_system(sys) == sys

    def test_dimension_guards(self):
        with pytest.raises(ValidationError):
            validate_system(two_level([1.0], h0=[0.0]))

    def test_grid_guards(self):
        with pytest.raises(ValidationError):
            TimeGrid(1.0, 1)
        with pytest.raises(ValidationError):
            TimeGrid(-1.0, 10)
        g = TimeGrid(2.0, 4)
        assert len(g) == 5 and g.dt == 0.5 and g.times[-1] == 2.0


class TestEigendecompose:
    def test_already_diagonal(self):
        s = eigendecompose(np.diag([1.0, 0.0]))
        assert np.array_equal(s.eigenvalues, [0.0, 1.0])
        assert np.allclose(np.abs(s.eigenvectors), [[0, 1], [1, 0]])

    def test_sigma_x(self):
        s = eigendecompose([[0, 1], [1, 0]])
        assert np.allclose(s.eigenvalues, [-1, 1])
        r = 1 / np.sqrt(2)
        assert np.allclose(s.eigenvectors, [[r, r], [-r, r]])

    def test_random_reconstruction(self):
        m = random_hermitian(np.random.default_rng(4), 4)
        assert np.abs(eigendecompose(m).reconstruct() - m).max() < 1e-10

    def test_degenerate_block_is_basis_independent(self):
        rng = np.random.default_rng(1)
        u = random_unitary(rng, 4)
        m = u @ np.diag([1.0, 1.0, 1.0, 3.0]) @ u.conj().T
        # rotate inside the degenerate block: the gauge must not change
        block = random_unitary(rng, 3)
        rot = np.eye(4, dtype=complex)
        rot[:3, :3] = block
        u2 = u @ rot
        m2 = u2 @ np.diag([1.0, 1.0, 1.0, 3.0]) @ u2.conj().T
        a, b = eigendecompose(m), eigendecompose(m2)
        assert np.allclose(a.eigenvectors, b.eigenvectors, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**31 - 1))
    def test_reconstruction_property(self, d, seed):
        rng = np.random.default_rng(seed)
        m = random_hermitian(rng, d)
        s = eigendecompose(m)
        v = s.eigenvectors
        assert np.all(np.diff(s.eigenvalues) >= 0)
        assert np.abs(v.conj().T @ v - np.eye(d)).max() < 1e-10
        assert np.abs(s.reconstruct() - m).max() < 1e-10


class TestDrive:
    d = DriveSpec.harmonic([[0, 0.3], [0.3, 0]], 1.2)

    def test_t0(self):
        assert np.allclose(drive_value(self.d, 0.0), [[0, 0.3], [0.3, 0]])

    def test_half_period(self):
        assert np.allclose(drive_value(self.d, np.pi / 1.2), [[0, -0.3], [-0.3, 0]])

    def test_phase_pattern(self):
        v = drive_value(self.d, 0.7)
        assert np.isclose(v[0, 1], 0.3 * np.exp(1.2j * 0.7))
        assert np.isclose(v[1, 0], 0.3 * np.exp(-1.2j * 0.7))

    def test_zero_drive(self):
        z = DriveSpec.harmonic(np.zeros((2, 2)), 1.2)
        assert not np.any(z.values(np.linspace(0, 5, 11)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**31 - 1), st.floats(0, 50))
    def test_hermitian_everywhere(self, d, seed, t):
        rng = np.random.default_rng(seed)
        drive = DriveSpec.harmonic(random_hermitian(rng, d), rng.uniform(0.1, 3))
        v = drive_value(drive, t)
        assert np.abs(v - v.conj().T).max() <= 1e-12

    def test_custom_interpolation(self):
        vals = np.array([[[0, 0], [0, 0]], [[0, 1], [1, 0]]], dtype=complex)
        d = DriveSpec.custom([0.0, 2.0], vals)
        assert np.allclose(drive_value(d, 0.5), [[0, 0.25], [0.25, 0]])
        assert np.allclose(d.rates([1.0])[0], [[0, 0.5], [0.5, 0]])
        with pytest.raises(OutOfTable):
            drive_value(d, 2.5)

    def test_negative_time(self):
        with pytest.raises(ValidationError):
            drive_value(self.d, -1.0)
