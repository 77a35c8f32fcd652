"""
Data models for experiment configuration, plant files and property reports
"""
import json
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

import config
from .channel import DelayMode, DelaySpec
from .lti import RationalTransfer, TransferMatrix
from .plant import GeneralizedPlant
from .simulation import NoiseModel, SeedSet


class SpacingKind(str, Enum):
    LINEAR = "linear"
    LOG = "log"


class TransferBlock(BaseModel):
    """num/den in ascending powers of z^-1"""
    num: List[float] = Field(..., min_length=1)
    den: List[float] = Field(default_factory=lambda: [1.0], min_length=1)

    def to_transfer(self) -> RationalTransfer:
        return RationalTransfer.from_arrays(self.num, self.den)

    @classmethod
    def from_transfer(cls, tf: RationalTransfer) -> "TransferBlock":
        return cls(num=list(tf.num), den=list(tf.den))


class PlantFile(BaseModel):
    """Plant description file"""

    name: str = "plant"
    n_w: int = Field(default=1, ge=1)
    n_z: int = Field(default=1, ge=1)
    h: Optional[int] = Field(default=None, ge=0, description="Nominal channel delay")
    G11: List[List[TransferBlock]] = Field(..., description="n_z rows of n_w blocks")
    G12: List[TransferBlock] = Field(..., description="n_z blocks")
    G21: List[TransferBlock] = Field(..., description="n_w blocks")
    G22: TransferBlock

    @model_validator(mode="after")
    def _check_dimensions(self):
        if len(self.G11) != self.n_z or any(len(row) != self.n_w for row in self.G11):
            raise ValueError(f"G11 must be {self.n_z}x{self.n_w}")
        if len(self.G12) != self.n_z:
            raise ValueError(f"G12 must have {self.n_z} blocks")
        if len(self.G21) != self.n_w:
            raise ValueError(f"G21 must have {self.n_w} blocks")
        return self

    def to_plant(self) -> GeneralizedPlant:
        return GeneralizedPlant(
            G11=TransferMatrix(entries=[[b.to_transfer() for b in row] for row in self.G11]),
            G12=TransferMatrix.column([b.to_transfer() for b in self.G12]),
            G21=TransferMatrix.row([b.to_transfer() for b in self.G21]),
            G22=self.G22.to_transfer(),
            name=self.name,
        )

    @classmethod
    def from_plant(cls, G: GeneralizedPlant, h: Optional[int] = None) -> "PlantFile":
        return cls(
            name=G.name,
            n_w=G.n_w,
            n_z=G.n_z,
            h=h,
            G11=[[TransferBlock.from_transfer(e) for e in row] for row in G.G11.entries],
            G12=[TransferBlock.from_transfer(G.G12[i, 0]) for i in range(G.n_z)],
            G21=[TransferBlock.from_transfer(G.G21[0, j]) for j in range(G.n_w)],
            G22=TransferBlock.from_transfer(G.G22),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PlantFile":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


class PlantSection(BaseModel):
    path: str = config.BENCHMARK_PLANT_PATH


class DelaySection(BaseModel):
    """Delays for the bound sweep; random mode also sets the simulated channel"""
    h: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    mode: DelayMode = DelayMode.CONSTANT
    support: List[Tuple[int, float]] = Field(default_factory=list)

    @field_validator("h")
    @classmethod
    def _nonnegative(cls, value: List[int]) -> List[int]:
        if any(h < 0 for h in value):
            raise ValueError("delays must be nonnegative")
        return sorted(set(value))

    def random_spec(self, seed: int) -> DelaySpec:
        return DelaySpec(mode=DelayMode.RANDOM, support=self.support, seed=seed)


class GridSection(BaseModel):
    """Explicit D values, or count points from start (or 1.05 * d_inf(h_max)) to stop"""
    values: Optional[List[float]] = None
    start: Union[float, Literal["auto"]] = "auto"
    stop: float = Field(default=50.0, gt=0)
    count: int = Field(default=10, ge=1)
    spacing: SpacingKind = SpacingKind.LINEAR

    @model_validator(mode="after")
    def _check_grid(self):
        if self.values is not None:
            if not self.values or any(v <= 0 for v in self.values):
                raise ValueError("D values must be a nonempty list of positive numbers")
        elif self.start != "auto" and not 0 < self.start <= self.stop:
            raise ValueError("grid start must lie in (0, stop]")
        return self


class SimSection(BaseModel):
    horizon: int = Field(default=config.HORIZON, gt=0)
    burn_in: int = Field(default=config.BURN_IN, ge=0)
    realizations: int = Field(default=config.REALIZATIONS, ge=1)
    points: int = Field(default=5, ge=1, description="D points per h taken from the bound grid")
    noise_model: NoiseModel = NoiseModel.ECDQ
    seeds: SeedSet = Field(default_factory=SeedSet)

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.horizon <= self.burn_in:
            raise ValueError("horizon must exceed burn_in")
        return self


class OutputSection(BaseModel):
    directory: str = config.OUTPUT_DIR
    bounds_csv: str = "bounds.csv"
    simulate_csv: str = "simulate.csv"
    verify_csv: str = "verify.csv"


class ExperimentConfig(BaseModel):
    """Sweep over (h, D) for one plant"""

    plant: PlantSection = Field(default_factory=PlantSection)
    delays: DelaySection = Field(default_factory=DelaySection)
    grid: GridSection = Field(default_factory=GridSection)
    sim: SimSection = Field(default_factory=SimSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Replace every seed with values derived from one integer"""
        seeds = SeedSet(noise=seed, dither=seed + 1, delay=seed + 2)
        return self.model_copy(update={"sim": self.sim.model_copy(update={"seeds": seeds})})


class PropertyResult(BaseModel):
    """Outcome of one property check"""
    name: str
    passed: bool
    residual: float = Field(..., description="Measured deviation")
    threshold: float = Field(..., description="Largest accepted deviation")
    notes: str = ""
    checked_at: datetime = Field(default_factory=datetime.now)
