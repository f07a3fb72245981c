import numpy as np
import pytest

from pertthermo import DriveSpec, SystemSpec, TimeGrid, validate_system
from pertthermo.twolevel import TwoLevelParams

TWO_PI = 2 * np.pi


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_driven_system(seed, steps=20_000, t_max=10.0, pure=False):
    """Random 3- or 4-level system with a drifting spectrum and a rotated state."""
    rng = np.random.default_rng(seed)
    d = 3 + seed % 2
    energies = np.sort(rng.uniform(0.0, 3.0, d))
    coupling = random_hermitian(rng, d, 0.15)
    p = np.eye(d)[0] if pure else rng.dirichlet(np.ones(d))
    q = random_unitary(rng, d)
    return SystemSpec(
        h0=energies,
        rho0=(q * p) @ q.conj().T,
        drive=DriveSpec.harmonic(coupling, rng.uniform(0.5, 2.0)),
        grid=TimeGrid(t_max, steps),
        rho0_basis="custom",
        rho0_basis_vectors=q,
        energy_ramp=rng.normal(scale=0.05, size=d),
    )


@pytest.fixture
def benchmark_params():
    return TwoLevelParams(epsilon=0.3, omega=1.2)


@pytest.fixture
def validity_params():
    return TwoLevelParams(epsilon=0.05, omega=1.5)


@pytest.fixture
def benchmark_system(benchmark_params):
    return validate_system(benchmark_params.system(TWO_PI, 10_000))


@pytest.fixture
def validity_system(validity_params):
    return validate_system(validity_params.system(TWO_PI, 10_000))
