"""
Data models for dithered quantization and entropy coding
"""
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

ESCAPE_SYMBOL = "ESC"
ESCAPE_PAYLOAD_BITS = 32


class Dither(BaseModel):
    """Shared subtractive dither, uniform on (-delta/2, delta/2)"""

    model_config = ConfigDict(frozen=True)

    seed: int = Field(..., ge=0, lt=2**64, description="Seed shared by encoder and decoder")
    delta: float = Field(..., gt=0, description="Quantizer step")
    algorithm: str = Field(default="Philox4x64-10", description="Counter-based generator recorded in run manifests")


class Codebook(BaseModel):
    """Prefix-free code over quantization indices plus one escape word"""

    model_config = ConfigDict(frozen=True)

    codes: Dict[int, str] = Field(default_factory=dict)
    escape: Optional[str] = Field(default=None, description="Codeword announcing a raw 32-bit index")

    @model_validator(mode="after")
    def _check_prefix_free(self):
        words = sorted(self.words())
        if any(not w or set(w) - {"0", "1"} for w in words):
            raise ValueError("codewords must be nonempty bit strings")
        for shorter, longer in zip(words, words[1:]):
            if longer.startswith(shorter):
                raise ValueError(f"codeword {shorter!r} is a prefix of {longer!r}")
        return self

    def words(self) -> List[str]:
        out = list(self.codes.values())
        if self.escape is not None:
            out.append(self.escape)
        return out

    def length(self, symbol: int) -> int:
        """Bits spent on ``symbol``, escape payload included"""
        if symbol in self.codes:
            return len(self.codes[symbol])
        if self.escape is None:
            raise KeyError(symbol)
        return len(self.escape) + ESCAPE_PAYLOAD_BITS

    def to_records(self) -> List[Tuple[str, int, str]]:
        """(symbol, length, code) sorted by symbol, escape last"""
        records = [(str(s), len(c), c) for s, c in sorted(self.codes.items())]
        if self.escape is not None:
            records.append((ESCAPE_SYMBOL, len(self.escape), self.escape))
        return records

    @classmethod
    def from_records(cls, records) -> "Codebook":
        codes: Dict[int, str] = {}
        escape = None
        for symbol, length, code in records:
            if int(length) != len(code):
                raise ValueError(f"length {length} does not match codeword {code!r}")
            if symbol == ESCAPE_SYMBOL:
                escape = code
            else:
                codes[int(symbol)] = code
        return cls(codes=codes, escape=escape)


class RateReport(BaseModel):
    """Operational rate and entropy of one run"""

    avg_len_bits: float = Field(..., ge=0, description="Mean codeword length per sample")
    empirical_entropy_bits: float = Field(..., ge=0, description="Plug-in entropy of the index stream")
    sample_count: int = Field(..., gt=0)
    var_z_hat: float = Field(default=0.0, ge=0)
    ci_halfwidth: float = Field(default=0.0, ge=0)
    escape_count: int = Field(default=0, ge=0, description="Samples sent through the escape word")

    @model_validator(mode="after")
    def _check_redundancy(self):
        if self.empirical_entropy_bits > self.avg_len_bits + 1.0 + 1e-9:
            raise ValueError("entropy exceeds average length by more than one bit")
        return self


class DitherLawReport(BaseModel):
    """Uniformity and whiteness statistics of the end-to-end quantization error"""

    sample_count: int = Field(..., gt=0)
    ks_statistic: float = Field(..., ge=0)
    ks_pvalue: float = Field(..., ge=0, le=1)
    max_autocorr: float = Field(..., ge=0, description="Largest |autocorrelation| over lags 1..max_lag")
    max_crosscorr: Optional[float] = Field(default=None, ge=0, description="Largest |correlation| with the disturbance")
    bound: float = Field(..., gt=0, description="4 / sqrt(N)")
    significance: float = Field(default=0.01, gt=0, lt=1)

    @property
    def passed(self) -> bool:
        white = self.max_autocorr <= self.bound
        independent = self.max_crosscorr is None or self.max_crosscorr <= self.bound
        return self.ks_pvalue >= self.significance and white and independent
