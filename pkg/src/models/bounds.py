"""
Data models for performance-rate bounds
"""
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .plant import LinearScheme

# 0.5 * log2(2*pi*e/12) + 1: space-filling loss of a scalar lattice plus the
# one-bit allowance of memoryless prefix-free coding
ECDQ_GAP_BITS = 0.5 * float(np.log2(2.0 * np.pi * np.e / 12.0)) + 1.0


class LqgController(BaseModel):
    """Discrete H2-optimal controller with current measurement.

    u = F p + K0 (y - C2 p), p+ = A p + B2 u + Lp (y - C2 p)
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    F: np.ndarray
    F1: np.ndarray
    Lp: np.ndarray
    K0: np.ndarray
    X: np.ndarray
    Y: np.ndarray


class PhiPrimeResult(BaseModel):
    """Outcome of the SNR-performance optimization"""

    value: float = Field(..., ge=0, description="Achieved SNR of the returned scheme")
    lower: float = Field(..., ge=0, description="Largest infeasible SNR seen by bisection")
    upper: float = Field(..., ge=0, description="Smallest feasible SNR seen by bisection")
    fir_order: int = Field(..., ge=1)
    converged: bool = True
    identity_residual_bits: Optional[float] = Field(
        default=None, description="Directed information minus 0.5*log2(1+SNR) for the returned scheme"
    )
    scheme: LinearScheme

    @property
    def relative_gap(self) -> float:
        return (self.upper - self.lower) / max(self.lower, 1.0)

    @property
    def bracket(self) -> Tuple[float, float]:
        return self.lower, self.upper


class BoundResult(BaseModel):
    """Rate bounds at one (h, D) point"""

    h: int = Field(..., ge=0)
    D: float = Field(..., gt=0, description="Target variance of z")
    d_inf: float = Field(..., gt=0)
    phi_prime: float = Field(..., ge=0)
    rate_lb_bits: float = Field(..., ge=0)
    rate_ub_bits: float = Field(..., ge=0)
    solver_gap: float = Field(default=0.0, ge=0, description="Relative width of the bisection bracket")
    converged: bool = True
    scheme: Optional[LinearScheme] = None

    @model_validator(mode="after")
    def _check_bounds(self):
        if self.D <= self.d_inf:
            raise ValueError("D must exceed d_inf")
        if abs(self.rate_ub_bits - self.rate_lb_bits - ECDQ_GAP_BITS) > 1e-9:
            raise ValueError("upper and lower bound must differ by the ECDQ gap")
        return self
