"""
Data models for the generalized plant and linear coding-control schemes
"""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .lti import RationalTransfer, StateSpace, TransferMatrix


class GeneralizedPlant(BaseModel):
    """Two-port plant (w, u) -> (z, y) with scalar u and y"""

    model_config = ConfigDict(frozen=True)

    G11: TransferMatrix = Field(..., description="w -> z block, n_z x n_w")
    G12: TransferMatrix = Field(..., description="u -> z column, n_z x 1")
    G21: TransferMatrix = Field(..., description="w -> y row, 1 x n_w")
    G22: RationalTransfer = Field(..., description="u -> y")
    name: str = Field(default="plant", description="Label used in reports and plot file names")

    @model_validator(mode="after")
    def _check_blocks(self):
        n_z, n_w = self.G11.shape
        if self.G12.shape != (n_z, 1):
            raise ValueError(f"G12 must be {n_z}x1, got {self.G12.shape}")
        if self.G21.shape != (1, n_w):
            raise ValueError(f"G21 must be 1x{n_w}, got {self.G21.shape}")
        return self

    @property
    def n_z(self) -> int:
        return self.G11.shape[0]

    @property
    def n_w(self) -> int:
        return self.G11.shape[1]

    def full_matrix(self) -> TransferMatrix:
        """[[G11, G12], [G21, G22]] as one (n_z + 1) x (n_w + 1) matrix"""
        rows = [list(self.G11.entries[i]) + [self.G12[i, 0]] for i in range(self.n_z)]
        rows.append(list(self.G21.entries[0]) + [self.G22])
        return TransferMatrix(entries=rows)

    @classmethod
    def from_siso(cls, G11, G12, G21, G22, name: str = "plant") -> "GeneralizedPlant":
        """Plant with n_w = n_z = 1"""
        return cls(
            G11=TransferMatrix(entries=[[G11]]),
            G12=TransferMatrix.column([G12]),
            G21=TransferMatrix.row([G21]),
            G22=G22,
            name=name,
        )


class PlantRealization(BaseModel):
    """Joint realization x+ = A x + B1 w + B2 u, z = C1 x + D11 w + D12 u, y = C2 x + D21 w"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    D21: np.ndarray

    @field_validator("A", "B1", "B2", "C1", "C2", "D11", "D12", "D21", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        arr = np.array(value, dtype=float)
        arr = arr.reshape(1, 1) if arr.ndim == 0 else arr
        arr.setflags(write=False)
        return arr

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def as_state_space(self) -> StateSpace:
        """Inputs [w, u], outputs [z, y]"""
        return StateSpace(
            A=self.A,
            B=np.hstack([self.B1, self.B2]),
            C=np.vstack([self.C1, self.C2]),
            D=np.block([[self.D11, self.D12], [self.D21, np.zeros((1, 1))]]),
        )


class LinearScheme(BaseModel):
    """Linear coding-control scheme t = Br z^-1 r + By y, u = J z^-h r, r = t + eta.

    ``encoder`` optionally holds a realization of (r, y) -> t to run in
    simulation instead of the canonical realization of [Br z^-1, By].
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    Br: RationalTransfer
    By: RationalTransfer
    J: RationalTransfer = Field(default_factory=lambda: RationalTransfer.constant(1.0))
    sigma_eta_sq: float = Field(..., gt=0, description="Channel noise variance")
    encoder: Optional[StateSpace] = Field(default=None, description="Realization with inputs [r, y], output t")

    @model_validator(mode="after")
    def _check_encoder(self):
        if self.encoder is not None:
            if (self.encoder.n_outputs, self.encoder.n_inputs) != (1, 2):
                raise ValueError("encoder realization must map [r, y] to t")
            if self.encoder.D[0, 0] != 0.0:
                raise ValueError("encoder must be strictly proper in r")
        return self

    @classmethod
    def static(cls, gain: float, sigma_eta_sq: float) -> "LinearScheme":
        """B_r = 0, B_y = gain, J = 1"""
        return cls(
            Br=RationalTransfer.constant(0.0),
            By=RationalTransfer.constant(gain),
            sigma_eta_sq=sigma_eta_sq,
        )


class AssumptionCheck(BaseModel):
    """Single sub-check of plant validation"""
    name: str
    passed: bool
    detail: str = ""


class ValidationReport(BaseModel):
    """Outcome of the plant well-posedness checks"""
    checks: List[AssumptionCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> AssumptionCheck:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)
