"""
Data models for discrete-time LTI systems
"""
from typing import List, Optional, Sequence, Tuple, Union

import control
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..utils.errors import IllPosedError

Number = Union[int, float, np.floating, np.integer]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop trailing zero coefficients (highest powers of z^-1), keep at least one"""
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return np.zeros(1)
    return coeffs[: nz[-1] + 1]


def _pad_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros(max(a.size, b.size))
    out[: a.size] += a
    out[: b.size] += b
    return out


class RationalTransfer(BaseModel):
    """SISO transfer function with coefficients in ascending powers of z^-1.

    The denominator is normalized so that ``den[0] == 1``; trailing zero
    coefficients are dropped. Values are immutable.
    """

    model_config = ConfigDict(frozen=True)

    num: Tuple[float, ...] = Field(..., description="Numerator, ascending powers of z^-1")
    den: Tuple[float, ...] = Field(default=(1.0,), description="Denominator, ascending powers of z^-1")

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data):
        if not isinstance(data, dict):
            return data
        num = np.atleast_1d(np.asarray(data.get("num", (0.0,)), dtype=float))
        den = np.atleast_1d(np.asarray(data.get("den", (1.0,)), dtype=float))
        if den.size == 0 or den[0] == 0.0 or not np.all(np.isfinite(den)):
            raise ValueError("den[0] must be nonzero and coefficients finite")
        if num.size == 0:
            num = np.zeros(1)
        if not np.all(np.isfinite(num)):
            raise ValueError("numerator coefficients must be finite")
        lead = den[0]
        num = _trim(num / lead)
        den = _trim(den / lead)
        if not np.any(num):
            den = np.ones(1)
        return {"num": tuple(float(c) for c in num), "den": tuple(float(c) for c in den)}

    # Constructors

    @classmethod
    def constant(cls, value: Number) -> "RationalTransfer":
        return cls(num=[float(value)], den=[1.0])

    @classmethod
    def from_arrays(cls, num: Sequence[float], den: Sequence[float] = (1.0,)) -> "RationalTransfer":
        return cls(num=list(num), den=list(den))

    # Views

    @property
    def num_array(self) -> np.ndarray:
        return np.asarray(self.num, dtype=float)

    @property
    def den_array(self) -> np.ndarray:
        return np.asarray(self.den, dtype=float)

    @property
    def order(self) -> int:
        """Number of states of the controllable canonical realization"""
        return max(len(self.num), len(self.den)) - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.num_array)

    def padded(self) -> Tuple[np.ndarray, np.ndarray]:
        """Numerator and denominator padded to equal length (order + 1)"""
        size = self.order + 1
        num = np.zeros(size)
        den = np.zeros(size)
        num[: len(self.num)] = self.num
        den[: len(self.den)] = self.den
        return num, den

    # python-control interop (dt = 1)

    def to_control(self) -> control.TransferFunction:
        """Equal-length z^-1 coefficient lists read as descending powers of z"""
        num, den = self.padded()
        return control.tf(num, den, dt=1)

    @classmethod
    def from_control(cls, sys: control.TransferFunction) -> "RationalTransfer":
        """SISO python-control transfer function back to ascending powers of z^-1"""
        num, den = control.tfdata(sys)
        num = np.trim_zeros(np.atleast_1d(np.asarray(num[0][0], dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(den[0][0], dtype=float)), "f")
        if den.size == 0 or abs(den[0]) <= np.finfo(float).eps * np.abs(den).max():
            raise IllPosedError("transfer function has a vanishing leading denominator coefficient")
        if num.size > den.size:
            raise IllPosedError("improper transfer function")
        padded = np.zeros(den.size)
        padded[den.size - num.size :] = num
        return cls(num=padded, den=den)

    # Algebra (no cancellation)

    @staticmethod
    def _coerce(other) -> "RationalTransfer":
        if isinstance(other, RationalTransfer):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return RationalTransfer.constant(other)
        raise TypeError(f"cannot combine RationalTransfer with {type(other).__name__}")

    def __mul__(self, other) -> "RationalTransfer":
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return RationalTransfer.constant(0.0)
        return RationalTransfer.from_control(self.to_control() * other.to_control())

    __rmul__ = __mul__

    def __add__(self, other) -> "RationalTransfer":
        other = self._coerce(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.den == other.den:
            return RationalTransfer(num=_pad_add(self.num_array, other.num_array), den=self.den_array)
        return RationalTransfer.from_control(self.to_control() + other.to_control())

    __radd__ = __add__

    def __neg__(self) -> "RationalTransfer":
        return RationalTransfer(num=-self.num_array, den=self.den_array)

    def __sub__(self, other) -> "RationalTransfer":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "RationalTransfer":
        return self._coerce(other) + (-self)

    def inv(self) -> "RationalTransfer":
        """Inverse system; requires a biproper system (num[0] != 0)"""
        if self.num[0] == 0.0:
            raise IllPosedError("inverse of a strictly proper system is improper")
        return RationalTransfer(num=self.den_array, den=self.num_array)

    def shift(self, h: int) -> "RationalTransfer":
        """Multiply by z^-h"""
        if h < 0:
            raise ValueError("shift must be nonnegative")
        return RationalTransfer(num=np.concatenate([np.zeros(h), self.num_array]), den=self.den_array)

    def __call__(self, z_inv):
        """Evaluate at z^-1 = z_inv (scalar or array)"""
        z_inv = np.asarray(z_inv, dtype=complex)
        return np.polyval(self.num_array[::-1], z_inv) / np.polyval(self.den_array[::-1], z_inv)


class StateSpace(BaseModel):
    """State-space realization x+ = A x + B u, y = C x + D u"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @field_validator("A", "B", "C", "D", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ValueError("state-space matrices must be 2-D")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_dimensions(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("B rows and C columns must match the state dimension")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError(f"D must be {(self.C.shape[0], self.B.shape[1])}, got {self.D.shape}")
        return self

    @classmethod
    def static(cls, gain) -> "StateSpace":
        D = np.atleast_2d(np.asarray(gain, dtype=float))
        p, m = D.shape
        return cls(A=np.zeros((0, 0)), B=np.zeros((0, m)), C=np.zeros((p, 0)), D=D)

    def to_control(self) -> control.StateSpace:
        return control.ss(self.A, self.B, self.C, self.D, dt=1)

    @classmethod
    def from_control(cls, sys: control.StateSpace) -> "StateSpace":
        return cls(A=np.asarray(sys.A), B=np.asarray(sys.B), C=np.asarray(sys.C), D=np.asarray(sys.D))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def spectral_radius(self) -> float:
        if self.n_states == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def select(self, outputs: Optional[Sequence[int]] = None, inputs: Optional[Sequence[int]] = None) -> "StateSpace":
        """Sub-system restricted to the given output rows and input columns"""
        rows = list(range(self.n_outputs)) if outputs is None else list(outputs)
        cols = list(range(self.n_inputs)) if inputs is None else list(inputs)
        return StateSpace(A=self.A, B=self.B[:, cols], C=self.C[rows, :], D=self.D[np.ix_(rows, cols)])


class TransferMatrix(BaseModel):
    """Rectangular grid of SISO transfer functions.

    ``realization`` optionally carries a joint state-space realization of the
    whole matrix; stability predicates use it when present.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: List[List[RationalTransfer]]
    realization: Optional[StateSpace] = None

    @model_validator(mode="after")
    def _check_rectangular(self):
        if not self.entries or not self.entries[0]:
            raise ValueError("transfer matrix must have at least one entry")
        width = len(self.entries[0])
        if any(len(row) != width for row in self.entries):
            raise ValueError("transfer matrix rows must have equal length")
        if self.realization is not None:
            if (self.realization.n_outputs, self.realization.n_inputs) != self.shape:
                raise ValueError("realization dimensions do not match the entries")
        return self

    @classmethod
    def column(cls, entries: Sequence[RationalTransfer]) -> "TransferMatrix":
        return cls(entries=[[e] for e in entries])

    @classmethod
    def row(cls, entries: Sequence[RationalTransfer]) -> "TransferMatrix":
        return cls(entries=[list(entries)])

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, index: Tuple[int, int]) -> RationalTransfer:
        i, j = index
        return self.entries[i][j]

    def flat(self) -> List[RationalTransfer]:
        return [entry for row in self.entries for entry in row]
