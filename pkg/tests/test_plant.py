"""
Tests for the generalized plant service
"""
import pytest
import numpy as np

from src.models.lti import RationalTransfer, TransferMatrix
from src.models.plant import GeneralizedPlant, LinearScheme
from src.services.lti_algebra import freq_response, poles
from src.services.plant_service import (
    closed_loop_T,
    closed_loop_realization,
    delay_augment,
    is_internally_stable,
    loop_variance_terms,
    min_stabilizing_rate,
    realize_plant,
    snr_and_variance,
    snr_and_variance_absorbed,
    unstable_poles,
    validate_assumption1,
)
from src.services.verification_service import VerificationService, benchmark_plant, scalar_plant
from src.utils.errors import InvalidSystemError, UnstableSystemError

STABLE = RationalTransfer(num=[0.0, 1.0], den=[1.0, -0.5])


class TestValidation:
    """Test plant well-posedness checks"""

    def test_benchmark_passes(self):
        """Test the benchmark plant passes every check"""
        report = validate_assumption1(benchmark_plant())
        assert report.passed
        assert [c.name for c in report.checks] == [
            "proper",
            "G22 strictly proper",
            "no unstable hidden modes",
            "stabilizable and detectable",
        ]

    def test_biproper_G22(self):
        """Test a biproper G22 fails strict propriety"""
        biproper = RationalTransfer(num=[1.0, -0.1], den=[1.0, -0.5])
        G = GeneralizedPlant.from_siso(STABLE, STABLE, STABLE, biproper)
        report = validate_assumption1(G)
        assert not report.passed
        assert not report.check("G22 strictly proper").passed
        assert report.check("proper").passed

    def test_hidden_unstable_mode(self):
        """Test (z - 2)/((z - 2)(z - 0.5)) in G22 is reported"""
        cancelled = RationalTransfer(num=[0.0, 1.0, -2.0], den=[1.0, -2.5, 1.0])
        G = GeneralizedPlant.from_siso(STABLE, STABLE, STABLE, cancelled)
        report = validate_assumption1(G)
        assert not report.check("no unstable hidden modes").passed
        assert "G22" in report.check("no unstable hidden modes").detail

    def test_undetectable(self):
        """Test an unstable mode invisible in y"""
        unstable = RationalTransfer(num=[0.0, 1.0], den=[1.0, -2.0])
        zero = RationalTransfer.constant(0.0)
        G = GeneralizedPlant.from_siso(unstable, unstable, zero, zero)
        report = validate_assumption1(G)
        assert not report.check("stabilizable and detectable").passed

    def test_strict_realization(self):
        """Test realize_plant refuses direct feedthrough in G22"""
        G = GeneralizedPlant.from_siso(STABLE, STABLE, STABLE, RationalTransfer.constant(1.0))
        with pytest.raises(InvalidSystemError):
            realize_plant(G)


class TestDelayAugment:
    """Test delay absorption into the plant"""

    def test_zero_delay(self):
        """Test h=0 leaves the plant unchanged"""
        G = benchmark_plant()
        assert delay_augment(G, 0) == G

    def test_benchmark_h2(self):
        """Test G12 and G22 gain z^-2 while G11 and G21 stay"""
        G = benchmark_plant()
        G_a = delay_augment(G, 2)
        assert G_a.G11 == G.G11
        assert G_a.G21 == G.G21
        assert G_a.G22.num == (0.0, 0.0, 0.0, 0.0, 0.165)
        assert G_a.G12[0, 0].num == (0.0, 0.0, 0.0, 0.0, 0.165)

    def test_delay_poles(self):
        """Test the delayed entry gains h poles at the origin"""
        G_a = delay_augment(benchmark_plant(), 2)
        p = poles(G_a.G22)
        assert len(p) == 4
        assert sum(1 for root in p if abs(root) < 1e-12) == 2

    def test_negative_delay(self):
        """Test negative delays are rejected"""
        with pytest.raises(ValueError):
            delay_augment(benchmark_plant(), -1)

    def test_unstable_poles(self):
        """Test the minimum rate for stability is log2(2)"""
        G = benchmark_plant()
        assert [abs(p) for p in unstable_poles(G)] == pytest.approx([2.0])
        assert min_stabilizing_rate(G) == pytest.approx(1.0)
        assert min_stabilizing_rate(delay_augment(G, 2)) == pytest.approx(1.0)


class TestClosedLoop:
    """Test the closed-loop transfer matrix"""

    def test_zero_feedback(self):
        """Test B_r = 0, B_y = 0, J = 1 gives M = 1"""
        G = scalar_plant(0.5)
        zero = RationalTransfer.constant(0.0)
        T = closed_loop_T(G, LinearScheme(Br=zero, By=zero, sigma_eta_sq=1.0), 1)
        assert T.shape == (4, 4)
        assert T[2, 0] == RationalTransfer.constant(1.0)
        assert T[0, 1] == G.G11[0, 0]
        assert is_internally_stable(T)

    def test_delay_absorption(self):
        """Test T built with the delay in the channel equals T on the delay-absorbed plant"""
        G = benchmark_plant()
        scheme = LinearScheme(
            Br=RationalTransfer(num=[0.2], den=[1.0, -0.1]),
            By=RationalTransfer(num=[-5.0, 2.0], den=[1.0, 0.3]),
            J=RationalTransfer(num=[1.0, 0.2], den=[1.0, -0.4]),
            sigma_eta_sq=0.5,
        )
        omega = np.linspace(-np.pi, np.pi, 128, endpoint=False) + np.pi / 128
        for h in range(3):
            T = closed_loop_T(G, scheme, h)
            T_a = closed_loop_T(delay_augment(G, h), scheme, 0)
            assert np.allclose(freq_response(T, omega), freq_response(T_a, omega), rtol=1e-9, atol=1e-9)

    def test_unstable_entry(self):
        """Test a pole at z=2 makes T unstable"""
        one = RationalTransfer.constant(1.0)
        unstable = RationalTransfer(num=[0.0, 1.0], den=[1.0, -2.0])
        assert not is_internally_stable(TransferMatrix(entries=[[one, unstable]]))
        zero = RationalTransfer.constant(0.0)
        assert is_internally_stable(TransferMatrix(entries=[[zero, zero], [zero, zero]]))

    def test_open_loop_benchmark_unstable(self):
        """Test the benchmark plant without feedback is not internally stable"""
        zero = RationalTransfer.constant(0.0)
        T = closed_loop_T(benchmark_plant(), LinearScheme(Br=zero, By=zero, sigma_eta_sq=1.0), 0)
        assert not is_internally_stable(T)

    def test_realization_outputs(self):
        """Test the loop realization has outputs [z', y', r, u', t]"""
        G = scalar_plant(0.5)
        loop = closed_loop_realization(G, LinearScheme.static(-0.5, 1.0), 1)
        assert loop.n_outputs == G.n_z + 4
        assert loop.n_inputs == G.n_w + 3


class TestSnrAndVariance:
    """Test the H2 expressions for SNR and output variance"""

    def test_open_loop(self):
        """Test zero feedback: snr = 0, var_z = |G11|^2 + |G12|^2 sigma"""
        G = scalar_plant(0.5)
        zero = RationalTransfer.constant(0.0)
        snr, var_z = snr_and_variance(G, LinearScheme(Br=zero, By=zero, sigma_eta_sq=2.0), 0)
        assert snr == pytest.approx(0.0, abs=1e-14)
        assert var_z == pytest.approx(4.0 / 3.0 + 4.0 / 3.0 * 2.0, rel=1e-9)

    def test_static_scheme(self):
        """Test the static scheme with closed-loop pole 1/3"""
        G = scalar_plant(0.5)
        snr, var_z = snr_and_variance(G, LinearScheme.static(-1.0 / 6.0, 1.0 / 15.0), 0)
        assert snr == pytest.approx(0.5, rel=1e-9)
        assert var_z == pytest.approx(1.2, rel=1e-9)

    def test_matches_lyapunov_terms(self):
        """Test the frequency-domain expressions against the loop realization"""
        G = scalar_plant(0.5)
        scheme = LinearScheme.static(-0.5, 0.3)
        snr, var_z = snr_and_variance(G, scheme, 1)
        terms = loop_variance_terms(G, scheme, 1)
        assert terms.snr(scheme.sigma_eta_sq) == pytest.approx(snr, rel=1e-8)
        assert terms.var_z(scheme.sigma_eta_sq) == pytest.approx(var_z, rel=1e-8)

    def test_absorbed_equal(self):
        """Test channel delay and absorbed delay give the same SNR and variance"""
        G = scalar_plant(0.5)
        scheme = LinearScheme.static(-0.5, 0.3)
        for h in range(3):
            snr, var_z = snr_and_variance(G, scheme, h)
            snr_a, var_a = snr_and_variance_absorbed(delay_augment(G, h), scheme)
            assert snr_a == pytest.approx(snr, rel=1e-8)
            assert var_a == pytest.approx(var_z, rel=1e-8)

    def test_unstable_loop(self):
        """Test an unstable loop is rejected"""
        with pytest.raises(UnstableSystemError):
            snr_and_variance(benchmark_plant(), LinearScheme.static(0.0, 1.0), 0)

    def test_absorbed_snr_property(self):
        """Test the randomized absorption check passes"""
        result = VerificationService(seed=7).check_absorbed_snr(count=6)
        assert result.passed, result.notes
