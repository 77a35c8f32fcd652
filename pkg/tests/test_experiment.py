"""
Tests for experiment sweeps, plots, property checks and the command line
"""
import json
from unittest.mock import Mock, patch

import pytest
import numpy as np
import pandas as pd

import main
from src.models.bounds import ECDQ_GAP_BITS, BoundResult
from src.models.codec import RateReport
from src.models.experiment import (
    DelaySection,
    ExperimentConfig,
    GridSection,
    PlantFile,
    PlantSection,
    PropertyResult,
    SimSection,
)
from src.models.plant import LinearScheme
from src.models.simulation import SimResult
from src.services.experiment_service import ExperimentService, gap_is_constant, load_plant
from src.services.synthesis_service import rate_lower_bound, rate_upper_bound
from src.services.verification_service import VerificationService, benchmark_plant
from src.services import verification_service
from src.ui.plotting import load_tables, plot_rates, rate_figure
from src.utils.errors import ConfigError, SingularityError, SynthesisError

FLOORS = {0: 1.0, 1: 2.0, 2: 4.0}


def fake_bounds(G, h, D):
    phi = 3.0 * D
    return BoundResult(
        h=h,
        D=D,
        d_inf=FLOORS[h],
        phi_prime=phi,
        rate_lb_bits=rate_lower_bound(phi),
        rate_ub_bits=rate_upper_bound(phi),
        solver_gap=1e-4,
    )


def make_experiment(path: str, **sections) -> ExperimentConfig:
    settings = dict(
        plant=PlantSection(path=path),
        delays=DelaySection(h=[0, 1]),
        grid=GridSection(values=[6.0, 1.5, 3.0]),
        sim=SimSection(horizon=1000, burn_in=100, points=2),
    )
    settings.update(sections)
    return ExperimentConfig(**settings)


class TestExperimentFiles:
    """Test the bundled plant and experiment files"""

    def test_benchmark_plant_file(self, benchmark_plant_path):
        """Test the benchmark file describes 0.165/((z-2)(z-0.5789)) in every block"""
        assert PlantFile.load(benchmark_plant_path).to_plant() == benchmark_plant()

    def test_benchmark_experiment_file(self, benchmark_experiment_path):
        """Test the benchmark experiment sweeps h = 0..2 up to D = 50"""
        experiment = ExperimentConfig.load(benchmark_experiment_path)
        assert experiment.delays.h == [0, 1, 2]
        assert experiment.grid.stop == 50.0
        assert experiment.grid.start == "auto"

    def test_save_load(self, tmp_path):
        """Test save then load is the identity"""
        experiment = ExperimentConfig().with_seed(3)
        path = tmp_path / "experiment.json"
        experiment.save(path)
        assert ExperimentConfig.load(path) == experiment

    def test_missing_plant_file(self, tmp_path):
        """Test a missing plant file names the config field"""
        with pytest.raises(ConfigError) as info:
            load_plant(str(tmp_path / "nope.json"))
        assert info.value.field == "plant.path"


class TestGrid:
    """Test D grids"""

    def test_explicit_values(self, benchmark_plant_path):
        """Test explicit values are sorted and deduplicated"""
        service = ExperimentService(make_experiment(benchmark_plant_path, grid=GridSection(values=[3.0, 1.0, 3.0])))
        assert list(service.d_grid(FLOORS)) == [1.0, 3.0]

    def test_auto_start(self, benchmark_plant_path):
        """Test the grid starts just above the largest floor"""
        experiment = make_experiment(
            benchmark_plant_path, delays=DelaySection(h=[0, 1, 2]), grid=GridSection(stop=50.0, count=10)
        )
        grid = ExperimentService(experiment).d_grid(FLOORS)
        assert grid[0] == pytest.approx(1.05 * 4.0)
        assert grid[-1] == pytest.approx(50.0)
        assert grid.size == 10

    def test_log_spacing(self, benchmark_plant_path):
        """Test geometric spacing"""
        experiment = make_experiment(benchmark_plant_path, grid=GridSection(start=1.0, stop=100.0, count=3, spacing="log"))
        assert np.allclose(ExperimentService(experiment).d_grid(FLOORS), [1.0, 10.0, 100.0])

    def test_empty_range(self, benchmark_plant_path):
        """Test an automatic start above the stop value"""
        experiment = make_experiment(benchmark_plant_path, grid=GridSection(stop=2.0))
        with pytest.raises(ConfigError):
            ExperimentService(experiment).d_grid(FLOORS)


class TestBoundsSweep:
    """Test the bound sweep with a stubbed synthesis service"""

    @patch("src.services.experiment_service.SynthesisService")
    def test_bounds_table(self, mock_synthesis, benchmark_plant_path, tmp_path):
        """Test rows, infeasible points and the CSV file"""
        mock_synthesis.return_value.d_inf.side_effect = lambda G, h: FLOORS[h]
        mock_synthesis.return_value.compute_bounds.side_effect = fake_bounds
        service = ExperimentService(make_experiment(benchmark_plant_path))

        frame = service.bounds_table()
        assert list(zip(frame["h"], frame["D"])) == [(0, 1.5), (0, 3.0), (0, 6.0), (1, 1.5), (1, 3.0), (1, 6.0)]
        assert list(frame["status"]) == ["ok", "ok", "ok", "infeasible", "ok", "ok"]
        assert gap_is_constant(frame)
        feasible = frame.dropna(subset=["rate_lb_bits"])
        assert np.allclose(feasible["rate_ub_bits"] - feasible["rate_lb_bits"], ECDQ_GAP_BITS, atol=1e-9)

        path = service.cmd_bounds(str(tmp_path))
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        assert pd.read_csv(path)["provenance"].notna().all()

    @patch("src.services.experiment_service.SynthesisService")
    def test_failed_row(self, mock_synthesis, benchmark_plant_path):
        """Test a solver failure becomes a row status"""
        mock_synthesis.return_value.d_inf.side_effect = lambda G, h: FLOORS[h]
        mock_synthesis.return_value.compute_bounds.side_effect = SynthesisError("solver failed")
        frame = ExperimentService(make_experiment(benchmark_plant_path, delays=DelaySection(h=[0]))).bounds_table()
        assert all(status.startswith("failed") for status in frame["status"])

    def test_invalid_plant(self, tmp_path):
        """Test a plant failing validation is a configuration error"""
        block = {"num": [0.0, 1.0], "den": [1.0, -0.5]}
        path = tmp_path / "plant.json"
        path.write_text(json.dumps({
            "name": "biproper", "G11": [[block]], "G12": [block], "G21": [block],
            "G22": {"num": [1.0, -0.1], "den": [1.0, -0.5]},
        }))
        with pytest.raises(ConfigError):
            ExperimentService(make_experiment(str(path))).plant

    def test_gap_detects_mismatch(self):
        """Test gap_is_constant on a broken table"""
        frame = pd.DataFrame({"rate_lb_bits": [1.0, 2.0], "rate_ub_bits": [1.0 + ECDQ_GAP_BITS, 2.0]})
        assert not gap_is_constant(frame)


class TestSimulateSweep:
    """Test the simulation sweep with stubbed synthesis and simulation"""

    @staticmethod
    def sim_result(rate: float, entropy: float, var: float) -> SimResult:
        report = RateReport(avg_len_bits=rate, empirical_entropy_bits=entropy, sample_count=900)
        return SimResult(var_z_hat=var, ci_halfwidth=0.01, rate_report=report, rate_a_hat=rate)

    @patch("src.services.experiment_service.simulate_constant")
    @patch("src.services.experiment_service.SynthesisService")
    def test_flags(self, mock_synthesis, mock_simulate, benchmark_plant_path):
        """Test rows within the bounds carry no flags and others are flagged"""
        mock_synthesis.return_value.d_inf.side_effect = lambda G, h: FLOORS[h]
        design = Mock(value=3.0, scheme=LinearScheme.static(-0.5, 1.0 / 12.0))
        mock_synthesis.return_value.design_ecdq.return_value = (design, 1.0)
        mock_simulate.side_effect = [
            self.sim_result(1.5, 1.2, 2.0),
            self.sim_result(3.0, 1.2, 2.0),
            self.sim_result(1.5, 0.8, 2.0),
            self.sim_result(1.5, 1.2, 50.0),
        ]
        experiment = make_experiment(benchmark_plant_path, grid=GridSection(values=[2.5, 5.0]))
        frame = ExperimentService(experiment).simulate_table()
        assert len(frame) == 4
        assert list(frame["flags"].fillna("")) == [
            "", "rate_outside_bounds", "entropy_below_lb", "variance_above_D",
        ]
        assert (frame["lb"] == 1.0).all()
        assert list(frame["noise_seed"]) == [experiment.sim.seeds.noise] * 4

    @patch("src.services.experiment_service.simulate_constant")
    @patch("src.services.experiment_service.SynthesisService")
    def test_one_solve_per_row(self, mock_synthesis, mock_simulate, benchmark_plant_path):
        """Test the bounds of a row reuse the design solve"""
        service = mock_synthesis.return_value
        service.d_inf.side_effect = lambda G, h: FLOORS[h]
        service.design_ecdq.return_value = (Mock(value=3.0, scheme=LinearScheme.static(-0.5, 1.0 / 12.0)), 1.0)
        mock_simulate.return_value = self.sim_result(1.5, 1.2, 2.0)
        experiment = make_experiment(benchmark_plant_path, grid=GridSection(values=[2.5, 5.0]))
        frame = ExperimentService(experiment).simulate_table()
        assert service.design_ecdq.call_count == len(frame)
        service.phi_prime.assert_not_called()
        service.design_ecdq_scheme.assert_not_called()


class TestPlotting:
    """Test static rate plots"""

    @staticmethod
    def write_tables(tmp_path, delays=(0, 1, 2)):
        bounds = pd.DataFrame([
            {"plant": "benchmark", "h": h, "D": D, "phi_prime": 3.0 + h,
             "rate_lb_bits": 1.0 + 0.1 * h, "rate_ub_bits": 1.0 + 0.1 * h + ECDQ_GAP_BITS}
            for h in delays for D in (5.0, 10.0, 20.0)
        ])
        simulate = pd.DataFrame([
            {"plant": "benchmark", "h": h, "D": D, "var_z_hat": D * 0.9,
             "rate_bits": 1.8 + 0.1 * h, "entropy_bits": 1.5 + 0.1 * h}
            for h in delays for D in (5.0, 20.0)
        ])
        bounds_path = tmp_path / "bounds.csv"
        simulate_path = tmp_path / "simulate.csv"
        bounds.to_csv(bounds_path, index=False)
        simulate.to_csv(simulate_path, index=False)
        return str(bounds_path), str(simulate_path)

    def test_bounds_only(self, tmp_path):
        """Test a bounds table gives the LB and UB families"""
        bounds_path, _ = self.write_tables(tmp_path, delays=(1,))
        table = load_tables([bounds_path])
        assert set(table["family"]) == {"LB", "UB"}
        fig = rate_figure(table, "benchmark")
        assert len(fig.axes[0].get_lines()) == 2

    def test_full_tables(self, tmp_path):
        """Test 4 families over 3 delays give 12 curves"""
        table = load_tables(list(self.write_tables(tmp_path)))
        fig = rate_figure(table, "benchmark")
        assert len(fig.axes[0].get_lines()) == 12

    def test_deterministic_output(self, tmp_path):
        """Test re-running on the same input gives a byte-identical file"""
        paths = list(self.write_tables(tmp_path))
        first = plot_rates(paths, str(tmp_path / "a"))
        second = plot_rates(paths, str(tmp_path / "b"))
        assert [p.name for p in first] == ["benchmark_rates.svg"]
        assert first[0].read_bytes() == second[0].read_bytes()

    def test_missing_column(self, tmp_path):
        """Test a schema error names the missing column"""
        path = tmp_path / "bad.csv"
        pd.DataFrame({"plant": ["p"], "h": [0], "D": [1.0], "rate_lb_bits": [0.5]}).to_csv(path, index=False)
        with pytest.raises(ConfigError) as info:
            load_tables([str(path)])
        assert info.value.field == "rate_ub_bits"


class TestVerification:
    """Test the property checks"""

    def test_ecdq_gap(self):
        """Test the analytic gap check"""
        assert VerificationService().check_ecdq_gap().passed

    def test_h2_oracle(self):
        """Test Lyapunov norms agree with quadrature"""
        assert VerificationService(seed=1).check_h2_oracle(count=10).passed

    def test_h2_oracle_mutation(self):
        """Test a perturbed H2 routine makes the oracle fail"""
        original = verification_service.h2_norm_sq
        with patch.object(verification_service, "h2_norm_sq", side_effect=lambda sys: 1.01 * original(sys)):
            assert not VerificationService(seed=1).check_h2_oracle(count=5).passed

    def test_d_inf_scalar(self):
        """Test the analytic performance floors"""
        assert VerificationService().check_d_inf_scalar().passed

    def test_delay_absorption(self):
        """Test the T = T_a residual is reported"""
        result = VerificationService().check_delay_absorption(count=8, points=64)
        assert result.passed
        assert result.name == "delay_absorption_T"

    def test_delay_absorption_needs_a_scheme(self):
        """Test the check fails when every scheme hits a unit-circle pole"""
        with patch.object(verification_service, "freq_response", side_effect=SingularityError("pole on the grid")):
            result = VerificationService().check_delay_absorption(count=4, points=16)
        assert not result.passed
        assert result.notes.startswith("0 of 4")

    def test_huffman_redundancy(self):
        """Test the Huffman redundancy check"""
        assert VerificationService().check_huffman_redundancy(count=5).passed

    def test_errors_become_failures(self):
        """Test a raising check is reported as failed"""
        def check_boom():
            raise SynthesisError("boom")

        service = VerificationService()
        with patch.object(service, "checks", return_value=[check_boom]):
            results = service.run_all()
        assert [r.name for r in results] == ["boom"]
        assert not results[0].passed
        assert "boom" in service.verification_cache


class TestMain:
    """Test the command line"""

    def test_missing_config(self, tmp_path):
        """Test a missing config exits with the configuration code"""
        assert main.main(["bounds", "--config", str(tmp_path / "missing.json")]) == main.EXIT_CONFIG

    def test_plot_missing_input(self, tmp_path):
        """Test plot with a missing CSV"""
        assert main.main(["plot", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == main.EXIT_CONFIG

    @patch("main.VerificationService")
    def test_verify_failure(self, mock_service):
        """Test a failed property gives exit code 3"""
        mock_service.return_value.run_all.return_value = [
            PropertyResult(name="h2_oracle", passed=False, residual=1.0, threshold=1e-6),
        ]
        assert main.main(["verify"]) == main.EXIT_PROPERTY

    @patch("main.VerificationService")
    def test_verify_report(self, mock_service, tmp_path):
        """Test a passing run writes the report"""
        mock_service.return_value.run_all.return_value = [
            PropertyResult(name="ecdq_gap", passed=True, residual=0.0, threshold=1e-9),
        ]
        assert main.main(["verify", "--out", str(tmp_path)]) == main.EXIT_OK
        frame = pd.read_csv(tmp_path / "verify.csv")
        assert list(frame["name"]) == ["ecdq_gap"]

    @patch("main.ExperimentService")
    def test_solver_failure(self, mock_service, benchmark_experiment_path):
        """Test synthesis failures exit with the solver code"""
        mock_service.return_value.cmd_bounds.side_effect = SynthesisError("no convergence")
        assert main.main(["bounds", "--config", benchmark_experiment_path]) == main.EXIT_SOLVER


@pytest.mark.slow
class TestBenchmarkExperiment:
    """Test the ECDQ sweep of the bundled benchmark experiment"""

    def test_ecdq_gaps(self, benchmark_experiment_path, benchmark_plant_path):
        """Test rates sit inside the bounds with the expected dither and coding gaps"""
        experiment = ExperimentConfig.load(benchmark_experiment_path)
        experiment = experiment.model_copy(update={"plant": PlantSection(path=benchmark_plant_path)})
        frame = ExperimentService(experiment, jobs=4).simulate_table()
        assert len(frame) == 15
        assert (frame["status"] == "ok").all()
        assert (frame["lb"] <= frame["rate_bits"]).all()
        assert (frame["rate_bits"] <= frame["ub"]).all()
        dither_gap = frame["entropy_bits"] - frame["lb"]
        assert dither_gap.between(0.25, 0.55).all()
        assert (frame["rate_bits"] - frame["entropy_bits"] <= 0.35).all()
        assert (frame["var_z_hat"] - frame["ci"] <= frame["D"]).all()
