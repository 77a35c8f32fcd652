"""
Tests for LTI algebra
"""
import control
import pytest
import numpy as np

from src.models.lti import RationalTransfer, StateSpace, TransferMatrix
from src.services.lti_algebra import (
    connect,
    delay_tf,
    freq_response,
    frequency_grid,
    h2_norm_sq,
    impulse_response,
    is_proper,
    is_stable,
    is_strictly_proper,
    l2_norm_sq_freq,
    log_spectral_integral,
    minimal_realization,
    minreal,
    poles,
    to_state_space,
    to_transfer,
    transfer_matrix_realization,
    zeros,
)
from src.utils.errors import (
    IllPosedError,
    InvalidSystemError,
    SingularityError,
    SpectralDomainError,
    UnstableSystemError,
)

BENCHMARK = RationalTransfer(num=[0.0, 0.0, 0.165], den=[1.0, -2.5789, 1.1578])
FIRST_ORDER = RationalTransfer(num=[0.0, 1.0], den=[1.0, -0.5])


class TestPoles:
    """Test pole and zero computation"""

    def test_benchmark_poles(self):
        """Test 0.165/((z-2)(z-0.5789))"""
        p = poles(BENCHMARK)
        assert len(p) == 2
        assert p[0] == pytest.approx(2.0, abs=1e-12)
        assert p[1] == pytest.approx(0.5789, abs=1e-12)

    def test_first_order(self):
        """Test 1/(z - 0.5)"""
        assert poles(FIRST_ORDER) == [pytest.approx(0.5)]

    def test_double_root(self):
        """Test 1/(z^2 - z + 0.25) keeps multiplicity"""
        p = poles(RationalTransfer(num=[0.0, 0.0, 1.0], den=[1.0, -1.0, 0.25]))
        assert len(p) == 2
        assert all(abs(root - 0.5) < 1e-6 for root in p)

    def test_state_space_poles(self):
        """Test eigenvalues of a realization"""
        ss = StateSpace(A=np.diag([0.2, -0.9]), B=np.ones((2, 1)), C=np.ones((1, 2)), D=np.zeros((1, 1)))
        assert [abs(p) for p in poles(ss)] == pytest.approx([0.9, 0.2])

    def test_zeros(self):
        """Test finite zeros of (z - 0.1)/(z - 0.5)"""
        g = RationalTransfer(num=[1.0, -0.1], den=[1.0, -0.5])
        assert zeros(g) == [pytest.approx(0.1)]


class TestPredicates:
    """Test stability and properness predicates"""

    def test_stable_strictly_proper(self):
        """Test 1/(z - 0.5)"""
        assert is_stable(FIRST_ORDER)
        assert is_strictly_proper(FIRST_ORDER)
        assert is_proper(FIRST_ORDER)

    def test_unstable(self):
        """Test 1/(z - 2)"""
        assert not is_stable(RationalTransfer(num=[0.0, 1.0], den=[1.0, -2.0]))

    def test_biproper(self):
        """Test (z - 0.1)/(z - 0.5) is proper but not strictly proper"""
        g = RationalTransfer(num=[1.0, -0.1], den=[1.0, -0.5])
        assert is_proper(g)
        assert not is_strictly_proper(g)


class TestConnect:
    """Test series, parallel and feedback interconnection"""

    def test_series_delays(self):
        """Test z^-1 in series with z^-1 is z^-2"""
        assert connect("series", delay_tf(1), delay_tf(1)) == delay_tf(2)

    def test_series_delay_composition(self):
        """Test delay_tf(1) after delay_tf(2) is z^-3"""
        assert connect("series", delay_tf(1), delay_tf(2)) == delay_tf(3)

    def test_zero_feedback(self):
        """Test feedback through a zero gain leaves the system unchanged"""
        result = connect("feedback", FIRST_ORDER, RationalTransfer.constant(0.0))
        assert result.num == pytest.approx(FIRST_ORDER.num)
        assert result.den == pytest.approx(FIRST_ORDER.den)

    def test_negative_feedback(self):
        """Test 1/z with gain 0.5 in negative feedback is 1/(z + 0.5)"""
        result = connect("feedback", delay_tf(1), RationalTransfer.constant(0.5))
        assert result.num == pytest.approx((0.0, 1.0))
        assert result.den == pytest.approx((1.0, 0.5))

    def test_parallel(self):
        """Test sum of two systems"""
        result = connect("parallel", FIRST_ORDER, FIRST_ORDER)
        assert freq_response(result, 0.0) == pytest.approx(4.0)

    def test_algebraic_loop(self):
        """Test unit gain in positive feedback with a unit gain is ill-posed"""
        one = RationalTransfer.constant(1.0)
        with pytest.raises(IllPosedError):
            connect("feedback", one, one, sign=1.0)
        with pytest.raises(IllPosedError):
            connect("feedback", StateSpace.static([[1.0]]), one, sign=1.0)

    def test_dimension_mismatch(self):
        """Test series connection needs matching dimensions"""
        with pytest.raises(InvalidSystemError):
            connect("series", StateSpace.static([[1.0, 1.0]]), StateSpace.static([[1.0, 1.0]]))

    def test_realization_feedback_matches_transfer(self):
        """Test the state-space feedback agrees with the rational formula"""
        g = RationalTransfer(num=[0.0, 1.0], den=[1.0, -1.2])
        k = RationalTransfer.constant(0.7)
        omega = np.linspace(-3.0, 3.0, 13)
        tf = connect("feedback", g, k)
        ss = connect("feedback", to_state_space(g), k)
        assert np.allclose(freq_response(ss, omega)[:, 0, 0], freq_response(tf, omega), atol=1e-10)

    def test_unknown_kind(self):
        """Test unknown connection names"""
        with pytest.raises(ValueError):
            connect("cascade", FIRST_ORDER, FIRST_ORDER)


class TestDelay:
    """Test pure delays"""

    def test_delay_zero(self):
        """Test h=0 is the identity"""
        assert delay_tf(0) == RationalTransfer.constant(1.0)

    def test_delay_two(self):
        """Test h=2 is z^-2"""
        assert delay_tf(2).num == (0.0, 0.0, 1.0)
        assert delay_tf(2).den == (1.0,)


class TestH2Norm:
    """Test squared H2 norms"""

    def test_first_order(self):
        """Test 1/(z - 0.5) has norm 4/3"""
        assert h2_norm_sq(FIRST_ORDER) == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_pure_delay(self):
        """Test z^-3 is an isometry"""
        assert h2_norm_sq(delay_tf(3)) == pytest.approx(1.0, rel=1e-12)

    def test_zero_system(self):
        """Test the zero system"""
        assert h2_norm_sq(RationalTransfer.constant(0.0)) == 0.0

    def test_unstable(self):
        """Test the norm is undefined for unstable systems"""
        with pytest.raises(UnstableSystemError):
            h2_norm_sq(BENCHMARK)

    def test_frequency_oracle(self):
        """Test Lyapunov norm against quadrature on a MIMO system"""
        rng = np.random.default_rng(3)
        A = rng.standard_normal((4, 4))
        A *= 0.8 / np.max(np.abs(np.linalg.eigvals(A)))
        ss = StateSpace(A=A, B=rng.standard_normal((4, 2)), C=rng.standard_normal((3, 4)), D=rng.standard_normal((3, 2)))
        assert h2_norm_sq(ss) == pytest.approx(l2_norm_sq_freq(ss), rel=1e-9)

    def test_impulse_response_energy(self):
        """Test Markov parameters sum to the squared norm"""
        markov = impulse_response(to_state_space(FIRST_ORDER), 200)
        assert markov.shape == (200, 1, 1)
        assert float(np.sum(markov**2)) == pytest.approx(4.0 / 3.0, rel=1e-12)


class TestFrequencyResponse:
    """Test frequency responses"""

    def test_delay_at_pi(self):
        """Test z^-1 at omega = pi"""
        assert freq_response(delay_tf(1), np.pi) == pytest.approx(-1.0)

    def test_dc_gain(self):
        """Test 1/(z - 0.5) at omega = 0"""
        assert freq_response(FIRST_ORDER, 0.0) == pytest.approx(2.0)

    def test_conjugate_symmetry(self):
        """Test H(e^{-jw}) = conj(H(e^{jw})) for real systems"""
        omega = np.linspace(0.1, 3.0, 20)
        assert np.allclose(freq_response(BENCHMARK, -omega), np.conj(freq_response(BENCHMARK, omega)))

    def test_pole_on_circle(self):
        """Test evaluation at a unit-circle pole"""
        integrator = RationalTransfer(num=[0.0, 1.0], den=[1.0, -1.0])
        with pytest.raises(SingularityError):
            freq_response(integrator, 0.0)
        with pytest.raises(SingularityError):
            freq_response(to_state_space(integrator), 0.0)

    def test_transfer_matrix(self):
        """Test matrix responses have shape (..., p, q)"""
        tm = TransferMatrix(entries=[[FIRST_ORDER, delay_tf(1)]])
        response = freq_response(tm, np.zeros(3))
        assert response.shape == (3, 1, 2)
        assert response[0, 0, 0] == pytest.approx(2.0)


class TestRealizations:
    """Test conversions between representations"""

    def test_round_trip(self):
        """Test state space to transfer to state space keeps the response"""
        omega = frequency_grid(64, endpoint=False) + 0.01
        ss = to_state_space(BENCHMARK)
        again = to_state_space(to_transfer(ss))
        assert np.allclose(freq_response(ss, omega), freq_response(again, omega), atol=1e-9)

    def test_minimal_realization_drops_cancelled_mode(self):
        """Test (z - 2)/((z - 2)(z - 0.5)) reduces to one state"""
        g = RationalTransfer(num=[0.0, 1.0, -2.0], den=[1.0, -2.5, 1.0])
        assert to_state_space(g).n_states == 2
        reduced = minimal_realization(to_state_space(g))
        assert reduced.n_states == 1
        assert poles(reduced)[0] == pytest.approx(0.5, abs=1e-8)

    def test_minreal(self):
        """Test tolerance-based pole/zero cancellation"""
        g = RationalTransfer(num=[0.0, 1.0, -2.0], den=[1.0, -2.5, 1.0])
        reduced = minreal(g)
        assert poles(reduced) == [pytest.approx(0.5)]
        assert freq_response(reduced, 0.7) == pytest.approx(freq_response(g, 0.7))

    def test_joint_realization(self):
        """Test a shared denominator gives one set of states"""
        tm = TransferMatrix(entries=[[BENCHMARK, BENCHMARK], [BENCHMARK, BENCHMARK]])
        ss = transfer_matrix_realization(tm)
        assert ss.n_states == 2
        omega = np.array([0.3, 1.1])
        assert np.allclose(freq_response(ss, omega), freq_response(tm, omega))


class TestLogSpectralIntegral:
    """Test the log-spectral integral"""

    def test_flat_reference(self):
        """Test S = sigma^2 gives zero"""
        assert log_spectral_integral(np.full(1025, 2.0), 2.0) == pytest.approx(0.0, abs=1e-15)

    def test_flat_scaled(self):
        """Test S = 4 sigma^2 gives log 2 nats"""
        assert log_spectral_integral(np.full(1025, 8.0), 2.0) == pytest.approx(np.log(2.0), rel=1e-12)

    def test_minimum_phase_factor(self):
        """Test a monic minimum-phase spectral factor has zero log integral"""
        omega = frequency_grid(4097)
        S = 3.0 * np.abs(1.0 - 0.5 * np.exp(-1j * omega)) ** 2
        assert log_spectral_integral(S, 3.0, omega) == pytest.approx(0.0, abs=1e-9)

    def test_nonpositive_density(self):
        """Test nonpositive samples are rejected"""
        with pytest.raises(SpectralDomainError):
            log_spectral_integral(np.array([1.0, 0.0, 1.0]), 1.0)
        with pytest.raises(SpectralDomainError):
            log_spectral_integral(np.ones(3), 0.0)


class TestControlInterop:
    """Test the python-control adapter (dt = 1, descending powers of z)"""

    def test_transfer_in_z(self):
        """Test 0.165 z^-2 / (1 - 2.5789 z^-1 + 1.1578 z^-2) is 0.165 / (z^2 - 2.5789 z + 1.1578)"""
        sys = BENCHMARK.to_control()
        assert sys.dt == 1
        num, den = control.tfdata(sys)
        assert np.allclose(np.trim_zeros(np.asarray(num[0][0], dtype=float), "f"), [0.165])
        assert np.allclose(den[0][0], [1.0, -2.5789, 1.1578])

    def test_transfer_back(self):
        """Test python-control results come back in powers of z^-1"""
        assert RationalTransfer.from_control(control.tf([1.0], [1.0, -0.5], dt=1)) == FIRST_ORDER
        assert RationalTransfer.from_control(control.tf([1.0], [1.0, 0.0, 0.0], dt=1)) == delay_tf(2)

    def test_improper(self):
        """Test z / 1 has no causal z^-1 form"""
        with pytest.raises(IllPosedError):
            RationalTransfer.from_control(control.tf([1.0, 0.0], [1.0], dt=1))

    def test_products_and_sums(self):
        """Test arithmetic through python-control matches the frequency responses"""
        other = RationalTransfer(num=[0.5, 0.2], den=[1.0, 0.3])
        omega = np.linspace(0.1, 3.0, 7)
        product = freq_response(FIRST_ORDER * other, omega)
        total = freq_response(FIRST_ORDER + other, omega)
        assert np.allclose(product, freq_response(FIRST_ORDER, omega) * freq_response(other, omega))
        assert np.allclose(total, freq_response(FIRST_ORDER, omega) + freq_response(other, omega))

    def test_state_space_round_trip(self):
        """Test realizations pass through python-control unchanged"""
        ss = to_state_space(BENCHMARK)
        again = StateSpace.from_control(ss.to_control())
        assert np.array_equal(again.A, ss.A)
        assert np.array_equal(again.D, ss.D)

    def test_mimo_impulse_response(self):
        """Test Markov parameters of a 2x2 realization against C A^(k-1) B"""
        rng = np.random.default_rng(5)
        A = 0.5 * np.eye(3) + 0.1 * rng.standard_normal((3, 3))
        ss = StateSpace(A=A, B=rng.standard_normal((3, 2)), C=rng.standard_normal((2, 3)), D=rng.standard_normal((2, 2)))
        markov = impulse_response(ss, 6)
        assert markov.shape == (6, 2, 2)
        assert np.allclose(markov[0], ss.D)
        for k in range(1, 6):
            assert np.allclose(markov[k], ss.C @ np.linalg.matrix_power(A, k - 1) @ ss.B)

    def test_state_space_series(self):
        """Test a realization in series with a transfer function"""
        omega = np.array([0.2, 1.3])
        result = connect("series", to_state_space(FIRST_ORDER), delay_tf(1))
        assert isinstance(result, StateSpace)
        expected = freq_response(FIRST_ORDER, omega) * np.exp(-1j * omega)
        assert np.allclose(freq_response(result, omega)[:, 0, 0], expected)
