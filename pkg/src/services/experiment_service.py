"""
Experiment runner: (h, D) sweeps of the rate bounds and of ECDQ simulations
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..models.channel import DelayMode, DelaySpec
from ..models.experiment import ExperimentConfig, PlantFile, SpacingKind
from ..models.plant import GeneralizedPlant
from ..models.simulation import SimConfig
from ..utils.console import status, warn
from ..utils.errors import ConfigError, InfeasiblePerformanceError, NcsError
from .plant_service import validate_assumption1
from .simulation_service import simulate_constant, simulate_random
from .synthesis_service import SynthesisService, rate_lower_bound, rate_upper_bound

BOUNDS_COLUMNS = [
    "plant", "h", "D", "d_inf", "phi_prime", "rate_lb_bits", "rate_ub_bits",
    "solver_gap", "converged", "status", "provenance",
]
SIMULATE_COLUMNS = [
    "plant", "h", "D", "var_z_hat", "ci", "rate_bits", "entropy_bits", "lb", "ub",
    "noise_seed", "dither_seed", "delay_seed", "mode", "flags", "status", "provenance",
]
BOUNDS_PROVENANCE = "d_inf,phi_prime,rate_lb_bits,solver_gap:computed;rate_ub_bits:computed+analytic_gap"
SIMULATE_PROVENANCE = "var_z_hat,ci,rate_bits,entropy_bits:simulated;lb,ub:computed"


def load_plant(path: str) -> GeneralizedPlant:
    try:
        return PlantFile.load(path).to_plant()
    except FileNotFoundError as exc:
        raise ConfigError(f"plant file not found: {path}", field="plant.path") from exc


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8", float_format="%.12g")
    return path


def _bounds_task(task: Tuple[GeneralizedPlant, int, float, float, Dict[str, Any]]) -> Dict[str, Any]:
    G, h, D, floor, params = task
    row: Dict[str, Any] = {"plant": G.name, "h": h, "D": D, "d_inf": floor, "provenance": BOUNDS_PROVENANCE}
    try:
        result = SynthesisService(**params).compute_bounds(G, h, D)
    except InfeasiblePerformanceError:
        row.update(status="infeasible")
        return row
    except NcsError as exc:
        row.update(status=f"failed: {exc}")
        return row
    row.update(
        phi_prime=result.phi_prime,
        rate_lb_bits=result.rate_lb_bits,
        rate_ub_bits=result.rate_ub_bits,
        solver_gap=result.solver_gap,
        converged=result.converged,
        status="ok" if result.converged else "widened_bracket",
    )
    return row


def _simulate_task(task: Tuple[GeneralizedPlant, int, float, Dict[str, Any], Dict[str, Any]]) -> Dict[str, Any]:
    G, h, D, params, sim = task
    seeds = sim["seeds"]
    delays: DelaySpec = sim["delays"]
    row: Dict[str, Any] = {
        "plant": G.name,
        "h": h,
        "D": D,
        "noise_seed": seeds.noise,
        "dither_seed": seeds.dither,
        "delay_seed": delays.seed if delays.mode == DelayMode.RANDOM else seeds.delay,
        "mode": delays.mode.value,
        "provenance": SIMULATE_PROVENANCE,
    }
    service = SynthesisService(**params)
    try:
        design, delta = service.design_ecdq(G, h, D)
        phi = design.value
        cfg = SimConfig(
            plant=G,
            scheme=design.scheme,
            delta=delta,
            delays=delays,
            horizon=sim["horizon"],
            burn_in=sim["burn_in"],
            seeds=seeds,
            noise_model=sim["noise_model"],
            realizations=sim["realizations"],
        )
        result = simulate_random(cfg) if delays.mode == DelayMode.RANDOM else simulate_constant(cfg)
    except InfeasiblePerformanceError:
        row.update(status="infeasible")
        return row
    except NcsError as exc:
        row.update(status=f"failed: {exc}")
        return row

    lb, ub = rate_lower_bound(phi), rate_upper_bound(phi)
    rate = result.rate_a_hat
    entropy = result.entropy_bits
    flags = []
    if rate is not None and not lb <= rate <= ub:
        flags.append("rate_outside_bounds")
    if entropy is not None and entropy < lb:
        flags.append("entropy_below_lb")
    if entropy is not None and rate is not None and entropy > rate:
        flags.append("entropy_above_rate")
    if result.var_z_hat - result.ci_halfwidth > D:
        flags.append("variance_above_D")
    row.update(
        var_z_hat=result.var_z_hat,
        ci=result.ci_halfwidth,
        rate_bits=rate,
        entropy_bits=entropy,
        lb=lb,
        ub=ub,
        flags=";".join(flags),
        status="ok",
    )
    return row


class ExperimentService:
    """Runs the bound and simulation sweeps of one experiment config"""

    def __init__(
        self,
        experiment: ExperimentConfig,
        jobs: int = 1,
        synthesis_params: Optional[Dict[str, Any]] = None,
    ):
        self.experiment = experiment
        self.jobs = max(1, jobs)
        self.synthesis_params = synthesis_params or {}
        self.synthesis = SynthesisService(**self.synthesis_params)
        self._plant: Optional[GeneralizedPlant] = None

    @property
    def plant(self) -> GeneralizedPlant:
        if self._plant is None:
            self._plant = load_plant(self.experiment.plant.path)
            report = validate_assumption1(self._plant)
            if not report.passed:
                failed = ", ".join(c.name for c in report.checks if not c.passed)
                raise ConfigError(f"plant {self._plant.name} fails validation: {failed}", field="plant.path")
        return self._plant

    @property
    def delays(self) -> List[int]:
        return self.experiment.delays.h

    def floors(self) -> Dict[int, float]:
        return {h: self.synthesis.d_inf(self.plant, h) for h in self.delays}

    def d_grid(self, floors: Optional[Dict[int, float]] = None) -> np.ndarray:
        grid = self.experiment.grid
        if grid.values is not None:
            return np.array(sorted(set(grid.values)), dtype=float)
        floors = floors or self.floors()
        start = 1.05 * floors[max(self.delays)] if grid.start == "auto" else float(grid.start)
        if start >= grid.stop:
            raise ConfigError(f"grid start {start:.6g} is not below stop {grid.stop:.6g}", field="grid.stop")
        if grid.count == 1:
            return np.array([start])
        if grid.spacing == SpacingKind.LOG:
            return np.geomspace(start, grid.stop, grid.count)
        return np.linspace(start, grid.stop, grid.count)

    def _map(self, fn: Callable, tasks: Sequence) -> List[Dict[str, Any]]:
        if self.jobs == 1 or len(tasks) <= 1:
            return [fn(task) for task in tasks]
        with ProcessPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(fn, tasks))

    def bounds_table(self) -> pd.DataFrame:
        """Rows (h, D) sorted; points at or below d_inf(h) kept as infeasible rows"""
        floors = self.floors()
        grid = self.d_grid(floors)
        tasks = []
        rows = []
        for h in self.delays:
            for D in grid:
                if D <= floors[h]:
                    warn(f"D={D:.6g} is not above d_inf({h})={floors[h]:.6g}; point dropped")
                    rows.append({
                        "plant": self.plant.name, "h": h, "D": float(D), "d_inf": floors[h],
                        "status": "infeasible", "provenance": BOUNDS_PROVENANCE,
                    })
                    continue
                tasks.append((self.plant, h, float(D), floors[h], self.synthesis_params))
        status(f"Computing bounds at {len(tasks)} grid points with {self.jobs} job(s)", "run")
        rows.extend(self._map(_bounds_task, tasks))
        return _sorted_frame(rows, BOUNDS_COLUMNS)

    def simulation_points(self, floors: Dict[int, float]) -> List[Tuple[int, float]]:
        """Evenly spaced D values of the bound grid, per h"""
        grid = self.d_grid(floors)
        count = min(self.experiment.sim.points, grid.size)
        picks = np.unique(np.round(np.linspace(0, grid.size - 1, count)).astype(int))
        return [(h, float(grid[i])) for h in self.delays for i in picks]

    def simulate_table(self) -> pd.DataFrame:
        sim = self.experiment.sim
        floors = self.floors()
        base = {
            "seeds": sim.seeds,
            "horizon": sim.horizon,
            "burn_in": sim.burn_in,
            "noise_model": sim.noise_model,
            "realizations": sim.realizations,
        }
        tasks = []
        if self.experiment.delays.mode == DelayMode.RANDOM:
            spec = self.experiment.delays.random_spec(sim.seeds.delay)
            for _, D in self.simulation_points({h: floors[h] for h in self.delays}):
                tasks.append((self.plant, spec.h_max, D, self.synthesis_params, {**base, "delays": spec}))
            tasks = list({(t[1], t[2]): t for t in tasks}.values())
        else:
            for h, D in self.simulation_points(floors):
                tasks.append((self.plant, h, D, self.synthesis_params, {**base, "delays": DelaySpec.constant(h)}))
        status(f"Simulating {len(tasks)} design points with {self.jobs} job(s)", "run")
        return _sorted_frame(self._map(_simulate_task, tasks), SIMULATE_COLUMNS)

    def cmd_bounds(self, out_dir: Optional[str] = None) -> Path:
        path = Path(out_dir or self.experiment.output.directory) / self.experiment.output.bounds_csv
        write_csv(self.bounds_table(), path)
        status(f"Bounds written to {path}", "save")
        return path

    def cmd_simulate(self, out_dir: Optional[str] = None) -> Path:
        path = Path(out_dir or self.experiment.output.directory) / self.experiment.output.simulate_csv
        write_csv(self.simulate_table(), path)
        status(f"Simulation results written to {path}", "save")
        return path


def _sorted_frame(rows: List[Dict[str, Any]], columns: List[str]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=columns)
    return frame.sort_values(["h", "D"], kind="mergesort").reset_index(drop=True)


def gap_is_constant(frame: pd.DataFrame, tol: float = 1e-9) -> bool:
    """Every feasible row has rate_ub - rate_lb equal to the ECDQ gap"""
    feasible = frame.dropna(subset=["rate_lb_bits", "rate_ub_bits"])
    gap = rate_upper_bound(0.0)
    return bool(np.all(np.abs(feasible["rate_ub_bits"] - feasible["rate_lb_bits"] - gap) <= tol))
