import numpy as np
import pytest

from pertthermo import (
    INDEPENDENT,
    MODES,
    PAPER_PRINTED,
    GridTooCoarse,
    first_order_amplitudes,
    rho_first_order,
    rho_second_order,
    transition_probabilities,
    validate_system,
)
from pertthermo.dyson import interaction_picture_drive, rho_first_order_integrand
from pertthermo.twolevel import TwoLevelParams, transition_probability, transition_rate

from conftest import TWO_PI, random_driven_system

# |c1|^2 = (eps/hbar)^2 sin^2(delta t/2)/(delta/2)^2 at eps=0.05, delta=0.5, t=2 pi
C1SQ_VALIDITY = 0.04


def amplitudes(p, steps=10_000, t_max=TWO_PI):
    sys = validate_system(p.system(t_max, steps))
    return sys, transition_probabilities(first_order_amplitudes(sys), sys)


class TestInteractionPicture:
    def test_diagonal_drive_unchanged(self):
        p = TwoLevelParams()
        spec = p.system(1.0, 100)
        from pertthermo import DriveSpec
        import dataclasses
        spec = dataclasses.replace(spec, drive=DriveSpec.harmonic(np.diag([0.1, -0.2]), 1.2))
        sys = validate_system(spec)
        for t in (0.0, 0.3, 0.9):
            assert np.allclose(interaction_picture_drive(sys, t), sys.drive_matrix([t])[0])

    def test_two_level_element(self):
        p = TwoLevelParams(epsilon=0.3, omega=1.2)
        sys = validate_system(p.system(1.0, 100))
        t = 0.77
        vi = interaction_picture_drive(sys, t)
        assert np.isclose(vi[0, 1], 0.3 * np.exp(1j * 0.2 * t), atol=1e-15)
        assert np.abs(vi - vi.conj().T).max() < 1e-15

    def test_t0(self):
        sys = validate_system(TwoLevelParams().system(1.0, 100))
        assert np.allclose(interaction_picture_drive(sys, 0.0), sys.drive_matrix([0.0])[0])


class TestAmplitudes:
    def test_validity_value(self, validity_params):
        sys, a = amplitudes(validity_params)
        assert abs(a.p1sq[-1, 1, 0] - C1SQ_VALIDITY) < 1e-6
        assert abs(a.p1sq[-1, 0, 1] - C1SQ_VALIDITY) < 1e-6
        assert np.all(a.c1[0] == 0)

    def test_matches_sinc_closed_form(self, benchmark_params):
        sys, a = amplitudes(benchmark_params)
        ref = transition_probability(benchmark_params, a.times)
        assert np.abs(a.p1sq[:, 1, 0] - ref).max() / ref.max() < 1e-4

    def test_zero_drive(self):
        sys, a = amplitudes(TwoLevelParams(epsilon=0.0))
        assert not np.any(a.c1) and not np.any(a.pk) and not np.any(a.rates)

    def test_resonance_quadratic(self):
        p = TwoLevelParams(epsilon=0.05, omega=1.0)
        sys, a = amplitudes(p)
        assert np.allclose(a.p1sq[:, 1, 0], (0.05 * a.times) ** 2, rtol=1e-12, atol=1e-18)

    def test_near_resonance_limit(self):
        p = TwoLevelParams(epsilon=0.05, omega=1.0 + 1e-6)
        sys, a = amplitudes(p)
        assert np.isclose(a.p1sq[-1, 1, 0], (0.05 * TWO_PI) ** 2, rtol=1e-6)

    def test_probabilities(self, validity_params):
        sys, a = amplitudes(validity_params)
        assert abs(a.pk[-1, 0] - 0.032) < 1e-6
        assert abs(a.pn_tilde[-1, 1] - 0.032) < 1e-6

    def test_rates_match_closed_form(self, benchmark_params):
        sys, a = amplitudes(benchmark_params)
        ref = transition_rate(benchmark_params, a.times)
        assert np.abs(a.rates[:, 1, 0] - ref).max() / np.abs(ref).max() < 1e-4

    def test_symmetric_moduli(self):
        sys = validate_system(random_driven_system(2, steps=5000))
        a2 = np.abs(first_order_amplitudes(sys).in_state_basis(sys.basis)) ** 2
        assert np.abs(a2 - np.swapaxes(a2, 1, 2)).max() < 1e-12

    def test_basis_unitarity(self):
        sys = validate_system(random_driven_system(3, steps=1000))
        a = first_order_amplitudes(sys)
        assert np.allclose((np.abs(a.c0) ** 2).sum(axis=0), 1, atol=1e-10)

    def test_aliasing_guard(self):
        p = TwoLevelParams(epsilon=0.05, omega=30.0)
        with pytest.raises(GridTooCoarse):
            first_order_amplitudes(validate_system(p.system(100.0, 1000)))

    def test_epsilon_scaling(self):
        _, a = amplitudes(TwoLevelParams(epsilon=0.02))
        _, b = amplitudes(TwoLevelParams(epsilon=0.04))
        assert np.isclose(np.abs(b.c1).max(), 2 * np.abs(a.c1).max(), rtol=1e-6)
        ra = rho_second_order(validate_system(TwoLevelParams(epsilon=0.02).system(TWO_PI, 10_000)), a)
        rb = rho_second_order(validate_system(TwoLevelParams(epsilon=0.04).system(TWO_PI, 10_000)), b)
        assert np.isclose(np.abs(rb.rho2).max(), 4 * np.abs(ra.rho2).max(), rtol=1e-6)


class TestDensityCorrections:
    def test_rho1_vanishes_for_diagonal_state(self, benchmark_system):
        assert np.abs(rho_first_order(benchmark_system)).max() <= 1e-12

    def test_rho1_integrand_identically_zero(self, benchmark_system):
        assert not np.any(rho_first_order_integrand(benchmark_system))

    def test_rho1_zero_drive(self):
        sys = validate_system(TwoLevelParams(epsilon=0.0).system(1.0, 100))
        assert not np.any(rho_first_order(sys))

    def test_gain_loss_values(self, validity_params):
        sys, a = amplitudes(validity_params)
        r = rho_second_order(sys, a, INDEPENDENT).rho2
        assert np.allclose(r[-1], [-0.024, 0.024], atol=1e-6)
        printed = rho_second_order(sys, a, PAPER_PRINTED).rho2
        assert np.array_equal(printed, -r)

    @pytest.mark.parametrize("mode", MODES)
    def test_trace_preserved(self, mode):
        sys = validate_system(random_driven_system(5, steps=5000))
        a = transition_probabilities(first_order_amplitudes(sys), sys)
        d = rho_second_order(sys, a, mode)
        total = sys.populations.sum() + d.rho1.sum(axis=1) + d.rho2.sum(axis=1)
        assert np.abs(total - 1).max() < 1e-10
        assert np.abs(d.rho2.sum(axis=1)).max() < 1e-10

    @pytest.mark.parametrize("mode", MODES)
    def test_equal_populations(self, mode):
        sys, a = amplitudes(TwoLevelParams(rho1=0.5, rho2=0.5))
        assert np.abs(rho_second_order(sys, a, mode).rho2).max() < 1e-15

    def test_unknown_mode(self, benchmark_system):
        a = first_order_amplitudes(benchmark_system)
        with pytest.raises(Exception, match="mode"):
            rho_second_order(benchmark_system, a, "other")
