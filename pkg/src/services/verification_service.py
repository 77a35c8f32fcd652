"""
Verification Service for numerical properties of the toolkit
"""
from typing import Callable, Dict, List, Optional

import numpy as np

from ..models.channel import DelaySpec
from ..models.experiment import PropertyResult
from ..models.lti import RationalTransfer, StateSpace
from ..models.plant import GeneralizedPlant, LinearScheme
from ..models.simulation import SimConfig
from ..utils.console import status
from ..utils.errors import NcsError, SingularityError
from .channel_service import DelayChannel, ReorderBuffer
from .codec_service import dither_law_check, empirical_entropy, huffman_build, kraft_sum, rate_and_entropy
from .lti_algebra import freq_response, h2_norm_sq, l2_norm_sq_freq
from .plant_service import closed_loop_T, delay_augment, snr_and_variance, snr_and_variance_absorbed
from .simulation_service import run_loop
from .synthesis_service import SynthesisService, rate_lower_bound, rate_upper_bound

ECDQ_GAP_PUBLISHED = 1.254


def scalar_plant(a: float = 0.5) -> GeneralizedPlant:
    """x+ = a x + w + u, z = y = x"""
    g = RationalTransfer(num=[0.0, 1.0], den=[1.0, -a])
    return GeneralizedPlant.from_siso(g, g, g, g, name=f"scalar_a{a:g}")


def benchmark_plant() -> GeneralizedPlant:
    """0.165 / ((z - 2)(z - 0.5789)) in every block"""
    g = RationalTransfer(num=[0.0, 0.0, 0.165], den=[1.0, -2.5789, 1.1578])
    return GeneralizedPlant.from_siso(g, g, g, g, name="benchmark")


def random_stable_system(rng: np.random.Generator, max_order: int = 6) -> StateSpace:
    n = int(rng.integers(1, max_order + 1))
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.1, 0.95) / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    m, p = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    return StateSpace(A=A, B=rng.standard_normal((n, m)), C=rng.standard_normal((p, n)), D=rng.standard_normal((p, m)))


def random_scheme(rng: np.random.Generator, scale: float = 0.3) -> LinearScheme:
    """Low-gain first-order scheme with a biproper J"""
    pole = rng.uniform(-0.5, 0.5)
    return LinearScheme(
        Br=RationalTransfer(num=[scale * rng.standard_normal()], den=[1.0, -pole]),
        By=RationalTransfer(num=scale * rng.standard_normal(2), den=[1.0, -rng.uniform(-0.5, 0.5)]),
        J=RationalTransfer(num=[1.0, scale * rng.standard_normal()], den=[1.0, -rng.uniform(-0.5, 0.5)]),
        sigma_eta_sq=float(rng.uniform(0.1, 2.0)),
    )


class VerificationService:
    """Runs the property suites and reports residuals against thresholds"""

    def __init__(self, seed: int = 7, synthesis: Optional[SynthesisService] = None):
        self.seed = seed
        self.synthesis = synthesis or SynthesisService()
        self.verification_cache: Dict[str, PropertyResult] = {}

    def _result(self, name: str, residual: float, threshold: float, notes: str = "") -> PropertyResult:
        result = PropertyResult(
            name=name,
            passed=bool(np.isfinite(residual) and residual <= threshold),
            residual=float(residual),
            threshold=threshold,
            notes=notes,
        )
        self.verification_cache[name] = result
        return result

    def check_h2_oracle(self, count: int = 50) -> PropertyResult:
        """Lyapunov H2 norm against frequency quadrature on random stable systems"""
        rng = np.random.default_rng(self.seed)
        worst = 0.0
        for _ in range(count):
            sys = random_stable_system(rng)
            lyap = h2_norm_sq(sys)
            quad = l2_norm_sq_freq(sys)
            worst = max(worst, abs(lyap - quad) / max(quad, 1e-300))
        return self._result("h2_oracle", worst, 1e-6, f"{count} random systems")

    def check_ecdq_gap(self) -> PropertyResult:
        gaps = [rate_upper_bound(phi) - rate_lower_bound(phi) for phi in (0.0, 1.0, 3.0, 1e3)]
        spread = max(gaps) - min(gaps)
        off_published = 0.0 if abs(gaps[0] - ECDQ_GAP_PUBLISHED) < 1e-3 else 1.0
        return self._result("ecdq_gap", spread + off_published, 1e-9, f"gap {gaps[0]:.6f} bits")

    def check_d_inf_scalar(self) -> PropertyResult:
        G = scalar_plant(0.5)
        residual = max(abs(self.synthesis.d_inf(G, 0) - 1.0), abs(self.synthesis.d_inf(G, 1) - 1.25))
        return self._result("d_inf_scalar", residual, 1e-6, "a=0.5: 1.0 at h=0, 1.25 at h=1")

    def check_delay_absorption(self, count: int = 20, points: int = 128) -> PropertyResult:
        """T with the delay in the channel against T_a with the delay in the plant"""
        rng = np.random.default_rng(self.seed + 1)
        G = benchmark_plant()
        omega = np.linspace(-np.pi, np.pi, points, endpoint=False) + np.pi / points
        worst = 0.0
        used = 0
        for i in range(count):
            h = i % 4
            scheme = random_scheme(rng)
            T = closed_loop_T(G, scheme, h)
            T_a = closed_loop_T(delay_augment(G, h), scheme, 0)
            try:
                diff = np.abs(freq_response(T, omega) - freq_response(T_a, omega))
                scale = np.maximum(1.0, np.abs(freq_response(T, omega)))
            except SingularityError:
                continue
            used += 1
            worst = max(worst, float(np.max(diff / scale)))
        return self._result(
            "delay_absorption_T", worst if used else np.inf, 1e-9, f"{used} of {count} schemes, h<=3, {points} points"
        )

    def check_absorbed_snr(self, count: int = 10) -> PropertyResult:
        """SNR and variance with channel delay against the delay-absorbed plant"""
        rng = np.random.default_rng(self.seed + 2)
        G = scalar_plant(0.5)
        worst = 0.0
        used = 0
        for i in range(count):
            h = i % 4
            scheme = random_scheme(rng, scale=0.1)
            try:
                snr, var = snr_and_variance(G, scheme, h)
                snr_a, var_a = snr_and_variance_absorbed(delay_augment(G, h), scheme)
            except NcsError:
                continue
            used += 1
            worst = max(worst, abs(snr - snr_a) / max(snr, 1e-12), abs(var - var_a) / max(var, 1e-12))
        return self._result("absorbed_snr_variance", worst if used else np.inf, 1e-8, f"{used} stable schemes")

    def check_dither_law(self, steps: int = 100_000) -> PropertyResult:
        """End-to-end ECDQ error is uniform, white and independent of w"""
        G = scalar_plant(0.5)
        cfg = SimConfig(
            plant=G,
            scheme=LinearScheme.static(-0.5, 1.0 / 12.0),
            delta=1.0,
            delays=DelaySpec.constant(1),
            horizon=steps,
            burn_in=0,
        )
        trace, _ = run_loop(cfg)
        report = dither_law_check(trace.error, cfg.delta, w=trace.w)
        residual = max(report.significance - report.ks_pvalue, report.max_autocorr - report.bound,
                       (report.max_crosscorr or 0.0) - report.bound)
        return self._result(
            "dither_law",
            max(residual, 0.0),
            0.0,
            f"KS p={report.ks_pvalue:.3g}, max autocorr {report.max_autocorr:.3g}, bound {report.bound:.3g}",
        )

    def check_huffman_redundancy(self, count: int = 20) -> PropertyResult:
        rng = np.random.default_rng(self.seed + 3)
        worst = 0.0
        for _ in range(count):
            stream = rng.geometric(rng.uniform(0.05, 0.9), size=2000) - 1
            symbols, counts = np.unique(stream, return_counts=True)
            codebook = huffman_build(dict(zip(symbols.tolist(), counts.tolist())))
            report = rate_and_entropy(stream, codebook)
            entropy = empirical_entropy(stream)
            excess = report.avg_len_bits - entropy
            worst = max(worst, -excess, excess - 1.0 + 1e-12, kraft_sum(codebook) - 1.0)
        return self._result("huffman_redundancy", max(worst, 0.0), 0.0, "0 <= L - H < 1 and Kraft <= 1")

    def check_channel_conservation(self, steps: int = 10_000) -> PropertyResult:
        spec = DelaySpec.uniform([0, 1, 2], seed=self.seed)
        channel = DelayChannel(spec, steps)
        buffer = ReorderBuffer(spec.h_max)
        violations = 0
        for k in range(steps):
            channel.transmit(k, k)
            arrivals = channel.deliver(k)
            if len(arrivals) > spec.h_max + 1 or any(i > k for i in arrivals.emit_indices):
                violations += 1
            buffer.push(arrivals)
            word = buffer.pop(k)
            if word is not None and word != k - spec.h_max:
                violations += 1
        violations += abs(channel.emitted - channel.delivered - channel.in_flight())
        return self._result("channel_conservation", float(violations), 0.0, f"{steps} steps, support {{0,1,2}}")

    def checks(self) -> List[Callable[[], PropertyResult]]:
        return [
            self.check_h2_oracle,
            self.check_ecdq_gap,
            self.check_d_inf_scalar,
            self.check_delay_absorption,
            self.check_absorbed_snr,
            self.check_dither_law,
            self.check_huffman_redundancy,
            self.check_channel_conservation,
        ]

    def run_all(self) -> List[PropertyResult]:
        results = []
        for check in self.checks():
            try:
                result = check()
            except NcsError as exc:
                name = check.__name__.replace("check_", "")
                result = self._result(name, np.inf, 0.0, f"error: {exc}")
            status(f"{result.name}: residual {result.residual:.3g} (threshold {result.threshold:.3g})",
                   "ok" if result.passed else "error")
            results.append(result)
        return results
