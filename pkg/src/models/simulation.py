"""
Data models for closed-loop Monte Carlo runs
"""
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

import config
from .channel import DelayMode, DelaySpec
from .codec import RateReport
from .plant import GeneralizedPlant, LinearScheme


class Placement(str, Enum):
    """Where the h-step delay sits in the loop"""
    CHANNEL = "channel"
    MEASUREMENT = "measurement"
    ACTUATION = "actuation"


class NoiseModel(str, Enum):
    """ecdq: dithered quantizer; awgn: Gaussian noise of variance delta^2/12; none: r = t"""
    ECDQ = "ecdq"
    AWGN = "awgn"
    NONE = "none"


class SeedSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    noise: int = Field(default=config.DEFAULT_SEED, ge=0, lt=2**64, description="Disturbance w and initial state")
    dither: int = Field(default=config.DEFAULT_SEED + 1, ge=0, lt=2**64, description="Dither or AWGN surrogate")
    delay: int = Field(default=config.DEFAULT_SEED + 2, ge=0, lt=2**64, description="Channel delays")

    def derive(self, m: int) -> "SeedSet":
        """Seeds of realization m; realization 0 keeps the base seeds"""
        if m == 0:
            return self

        def child(seed: int) -> int:
            return int(np.random.SeedSequence([seed, m]).generate_state(1, dtype=np.uint64)[0])

        return SeedSet(noise=child(self.noise), dither=child(self.dither), delay=child(self.delay))


class SimConfig(BaseModel):
    """One closed-loop simulation"""

    model_config = ConfigDict(frozen=True)

    plant: GeneralizedPlant
    scheme: LinearScheme
    delta: float = Field(..., gt=0, description="Quantizer step")
    delays: DelaySpec = Field(default_factory=DelaySpec)
    horizon: int = Field(default=config.HORIZON, gt=0)
    burn_in: int = Field(default=config.BURN_IN, ge=0)
    seeds: SeedSet = Field(default_factory=SeedSet)
    placement: Placement = Placement.CHANNEL
    noise_model: NoiseModel = NoiseModel.ECDQ
    x0_scale: float = Field(default=0.0, ge=0, description="Std of a Gaussian initial plant state; 0 starts at rest")
    realizations: int = Field(default=config.REALIZATIONS, ge=1, description="Delay realizations in random mode")
    record_trace: bool = False
    trace_path: Optional[str] = None

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.horizon <= self.burn_in:
            raise ValueError("horizon must exceed burn_in")
        if self.delays.mode == DelayMode.RANDOM and self.placement != Placement.CHANNEL:
            raise ValueError("random delays are only simulated in the channel")
        return self


class LoopTrace(BaseModel):
    """Per-step signals of one run"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w: np.ndarray
    y: np.ndarray
    t: np.ndarray
    r: np.ndarray
    dither: np.ndarray
    index: np.ndarray
    delivered: np.ndarray
    u: np.ndarray
    z: np.ndarray

    @property
    def error(self) -> np.ndarray:
        """End-to-end channel error r - t"""
        return self.r - self.t

    def to_frame(self, codeword_len: Optional[np.ndarray] = None) -> pd.DataFrame:
        """k, w, y, t, dither, index, codeword_len, delivered, u, z"""
        frame = pd.DataFrame({"k": np.arange(self.t.size)})
        for name in ("w", "z"):
            values = getattr(self, name)
            if values.shape[1] == 1:
                frame[name] = values[:, 0]
            else:
                for j in range(values.shape[1]):
                    frame[f"{name}{j}"] = values[:, j]
        frame["y"] = self.y
        frame["t"] = self.t
        frame["dither"] = self.dither
        frame["index"] = self.index
        frame["codeword_len"] = codeword_len if codeword_len is not None else np.nan
        frame["delivered"] = self.delivered
        frame["u"] = self.u
        ordered = ["k"] + [c for c in frame.columns if c.startswith("w")] + ["y", "t", "dither", "index"]
        ordered += ["codeword_len", "delivered", "u"] + [c for c in frame.columns if c.startswith("z")]
        return frame[ordered]


class RealizationResult(BaseModel):
    """Statistics of one delay realization"""
    index: int = Field(..., ge=0)
    var_z_hat: float = Field(..., ge=0)
    ci_halfwidth: float = Field(..., ge=0)
    rate_bits: Optional[float] = None
    entropy_bits: Optional[float] = None
    seeds: SeedSet
    in_flight: int = Field(default=0, ge=0, description="Words still in the channel at the horizon")


class SimResult(BaseModel):
    """Variance and rate estimates of a run or of an ensemble of delay realizations"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    var_z_hat: float = Field(..., ge=0)
    ci_halfwidth: float = Field(..., ge=0, description="95% batch-means half width")
    rate_report: Optional[RateReport] = Field(default=None, description="Huffman rate and entropy (ecdq only)")
    realizations: List[RealizationResult] = Field(default_factory=list)
    var_za_hat: Optional[float] = Field(default=None, description="Mean variance over delay realizations")
    rate_a_hat: Optional[float] = Field(default=None, description="Mean rate over delay realizations")
    manifest: Dict[str, str] = Field(default_factory=dict, description="Seeds and generator names")
    trace: Optional[LoopTrace] = Field(default=None, exclude=True)

    @property
    def rate_bits(self) -> Optional[float]:
        return None if self.rate_report is None else self.rate_report.avg_len_bits

    @property
    def entropy_bits(self) -> Optional[float]:
        return None if self.rate_report is None else self.rate_report.empirical_entropy_bits
