"""
Data models for the bounded-delay digital channel
"""
from enum import Enum
from typing import Any, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DelayMode(str, Enum):
    CONSTANT = "constant"
    RANDOM = "random"


class DelaySpec(BaseModel):
    """Constant h-step delay or i.i.d. delays drawn from {(h_j, alpha_j)}"""

    model_config = ConfigDict(frozen=True)

    mode: DelayMode = DelayMode.CONSTANT
    h: int = Field(default=0, ge=0, description="Delay in constant mode")
    support: List[Tuple[int, float]] = Field(
        default_factory=list, description="(h_j, alpha_j) pairs in random mode, h_j strictly increasing"
    )
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_support(self):
        if self.mode == DelayMode.CONSTANT:
            return self
        if not self.support:
            raise ValueError("random delay mode needs a support")
        delays = [d for d, _ in self.support]
        if any(d < 0 for d in delays):
            raise ValueError("delays must be nonnegative")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("support delays must be strictly increasing")
        if any(p < 0 for _, p in self.support):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(p for _, p in self.support) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to one")
        return self

    @property
    def h_max(self) -> int:
        if self.mode == DelayMode.CONSTANT:
            return self.h
        return self.support[-1][0]

    @property
    def delays(self) -> List[int]:
        return [self.h] if self.mode == DelayMode.CONSTANT else [d for d, _ in self.support]

    @property
    def probabilities(self) -> List[float]:
        return [1.0] if self.mode == DelayMode.CONSTANT else [p for _, p in self.support]

    @classmethod
    def constant(cls, h: int) -> "DelaySpec":
        return cls(mode=DelayMode.CONSTANT, h=h)

    @classmethod
    def uniform(cls, delays: List[int], seed: int = 0) -> "DelaySpec":
        p = 1.0 / len(delays)
        support = [(d, p) for d in delays]
        # absorb rounding so the probabilities sum to one
        support[-1] = (delays[-1], 1.0 - p * (len(delays) - 1))
        return cls(mode=DelayMode.RANDOM, support=support, seed=seed)


class ArrivalSet(BaseModel):
    """Words delivered at time k, ordered by emit index"""

    k: int = Field(..., ge=0)
    members: List[Tuple[int, Any]] = Field(default_factory=list, description="(emit index, payload) pairs")

    @model_validator(mode="after")
    def _check_members(self):
        indices = self.emit_indices
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("members must be ordered by emit index")
        if indices and indices[-1] > self.k:
            raise ValueError("a word cannot arrive before it is emitted")
        return self

    @property
    def emit_indices(self) -> List[int]:
        return [i for i, _ in self.members]

    def __len__(self) -> int:
        return len(self.members)
