"""
Exception hierarchy shared by all services
"""
from typing import Optional


class NcsError(ValueError):
    """Base class for toolkit errors"""


class InvalidSystemError(NcsError):
    """Degenerate or dimensionally inconsistent system"""


class IllPosedError(NcsError):
    """Interconnection with an algebraic loop or an improper closed loop"""


class UnstableSystemError(NcsError):
    """Operation needs a stable system"""


class SingularityError(NcsError):
    """Frequency response evaluated at a pole"""


class SpectralDomainError(NcsError):
    """Spectral density with nonpositive samples"""


class SynthesisError(NcsError):
    """Controller synthesis failed (stabilizability, Riccati, solver)"""


class InfeasiblePerformanceError(NcsError):
    """Requested variance at or below the performance floor"""

    def __init__(self, D: float, d_inf: float):
        super().__init__(f"D={D:.6g} is not above D_inf={d_inf:.6g}")
        self.D = D
        self.d_inf = d_inf


class CodecError(NcsError):
    """Quantizer or entropy coder failure"""


class ChannelProtocolError(NcsError):
    """Channel used out of order"""


class DivergenceError(NcsError):
    """Simulated state exceeded the divergence guard"""

    def __init__(self, step: int, norm: float):
        super().__init__(f"state norm {norm:.3g} exceeded guard at step {step}")
        self.step = step
        self.norm = norm


class ConfigError(NcsError):
    """Invalid experiment configuration or input table"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class InsufficientDataError(NcsError):
    """Too few samples for an estimate"""
