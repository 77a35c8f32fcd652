"""
Discrete-time LTI algebra: realizations, interconnection, stability and H2 norms
"""
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import control
import numpy as np
import scipy.linalg
import scipy.signal
from scipy.integrate import trapezoid

import config
from ..models.lti import RationalTransfer, StateSpace, TransferMatrix
from ..utils.errors import (
    IllPosedError,
    InvalidSystemError,
    SingularityError,
    SpectralDomainError,
    UnstableSystemError,
)

System = Union[RationalTransfer, StateSpace]


def _sort_roots(roots: np.ndarray) -> List[complex]:
    return sorted((complex(r) for r in roots), key=lambda r: (-abs(r), np.angle(r)))


def poles(sys: System) -> List[complex]:
    """Poles with multiplicity, sorted by magnitude (descending) then phase"""
    if isinstance(sys, StateSpace) and sys.n_states == 0:
        return []
    if isinstance(sys, RationalTransfer) and len(sys.den) == 1 and len(sys.num) == 1:
        return []
    return _sort_roots(sys.to_control().poles())


def zeros(sys: RationalTransfer) -> List[complex]:
    """Finite zeros of a SISO transfer function (z-plane)"""
    if sys.is_zero:
        return []
    return _sort_roots(sys.to_control().zeros())


def is_stable(sys: System) -> bool:
    return all(abs(p) < 1.0 for p in poles(sys))


def is_proper(sys: System) -> bool:
    # z^-1 coefficient lists and (A, B, C, D) quadruples cannot express improper systems
    return True


def is_strictly_proper(sys: System) -> bool:
    if isinstance(sys, StateSpace):
        return not np.any(sys.D)
    return sys.num[0] == 0.0


def delay_tf(h: int) -> RationalTransfer:
    """The pure delay z^-h"""
    if h < 0:
        raise ValueError("delay must be nonnegative")
    return RationalTransfer.constant(1.0).shift(h)


def minreal(sys: RationalTransfer, tol: float = None) -> RationalTransfer:
    """Cancel pole/zero pairs closer than ``tol``; coefficients are kept when nothing cancels"""
    tol = config.CANCEL_TOL if tol is None else tol
    if sys.is_zero:
        return RationalTransfer.constant(0.0)
    reduced = RationalTransfer.from_control(sys.to_control().minreal(tol))
    return sys if reduced.order == sys.order else reduced


# Realizations


def to_state_space(sys: Union[System, TransferMatrix]) -> StateSpace:
    """Controllable canonical realization (per column for transfer matrices)"""
    if isinstance(sys, StateSpace):
        return sys
    if isinstance(sys, TransferMatrix):
        return transfer_matrix_realization(sys)
    num, den = sys.padded()
    if den.size == 1:
        return StateSpace.static([[num[0]]])
    A, B, C, D = scipy.signal.tf2ss(num, den)
    return StateSpace(A=A, B=B, C=C, D=D)


def _common_denominator(entries: Sequence[RationalTransfer]) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Product of the distinct denominators and the numerators over it"""
    distinct: List[Tuple[float, ...]] = []
    for entry in entries:
        if not entry.is_zero and entry.den not in distinct:
            distinct.append(entry.den)
    common = np.ones(1)
    for den in distinct:
        common = np.convolve(common, den)
    nums = []
    for entry in entries:
        if entry.is_zero:
            nums.append(np.zeros(1))
            continue
        scaled = entry.num_array
        for den in distinct:
            if den != entry.den:
                scaled = np.convolve(scaled, den)
        nums.append(scaled)
    return common, nums


def _simo_realization(entries: Sequence[RationalTransfer]) -> StateSpace:
    den, nums = _common_denominator(entries)
    size = max([den.size] + [n.size for n in nums])
    den_p = np.zeros(size)
    den_p[: den.size] = den
    num_p = np.zeros((len(nums), size))
    for i, n in enumerate(nums):
        num_p[i, : n.size] = n
    if size == 1:
        return StateSpace.static(num_p[:, :1])
    A, B, C, D = scipy.signal.tf2ss(num_p, den_p)
    return StateSpace(A=A, B=B, C=C, D=D)


def miso_realization(entries: Sequence[RationalTransfer]) -> StateSpace:
    """Observable canonical realization of a row with a common denominator"""
    simo = _simo_realization(entries)
    return StateSpace(A=simo.A.T, B=simo.C.T, C=simo.B.T, D=simo.D.T)


def transfer_matrix_realization(tm: TransferMatrix, minimal: bool = True) -> StateSpace:
    """Joint realization: a SIMO block per column, stacked, then reduced"""
    p, q = tm.shape
    if p == 1 and q > 1:
        ss = miso_realization(tm.entries[0])
    else:
        blocks = [_simo_realization([tm[i, j] for i in range(p)]) for j in range(q)]
        ss = _stack_columns(blocks)
    return minimal_realization(ss) if minimal else ss


def _stack_columns(blocks: Sequence[StateSpace]) -> StateSpace:
    A = scipy.linalg.block_diag(*[b.A for b in blocks]) if blocks else np.zeros((0, 0))
    n = A.shape[0]
    B = np.zeros((n, sum(b.n_inputs for b in blocks)))
    row = col = 0
    for b in blocks:
        B[row : row + b.n_states, col : col + b.n_inputs] = b.B
        row += b.n_states
        col += b.n_inputs
    C = np.hstack([b.C for b in blocks])
    D = np.hstack([b.D for b in blocks])
    return StateSpace(A=A.reshape(n, n), B=B, C=C, D=D)


def _krylov_basis(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the reachable subspace of (A, B)"""
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2) if n else 0.0, np.linalg.norm(B, 2) if B.size else 0.0)
    basis = np.zeros((n, 0))
    block = B
    while basis.shape[1] < n and block.size:
        if basis.shape[1]:
            block = block - basis @ (basis.T @ block)
            block = block - basis @ (basis.T @ block)
        U, s, _ = np.linalg.svd(block, full_matrices=False)
        rank = int(np.sum(s > tol * scale))
        if rank == 0:
            break
        new = U[:, :rank]
        basis = np.hstack([basis, new])
        block = A @ new
    return basis


def minimal_realization(ss: StateSpace, tol: float = None) -> StateSpace:
    """Controllable and observable part of a realization.

    Uses python-control's minreal when slycot is installed and the Kalman
    staircase on orthonormal Krylov bases otherwise.
    """
    tol = config.RANK_TOL if tol is None else tol
    if ss.n_states == 0:
        return ss
    try:
        return StateSpace.from_control(ss.to_control().minreal(tol))
    except (ImportError, TypeError):
        pass
    Tc = _krylov_basis(ss.A, ss.B, tol)
    A = Tc.T @ ss.A @ Tc
    B = Tc.T @ ss.B
    C = ss.C @ Tc
    if A.shape[0] == 0:
        return StateSpace.static(ss.D)
    To = _krylov_basis(A.T, C.T, tol)
    if To.shape[1] == 0:
        return StateSpace.static(ss.D)
    return StateSpace(A=To.T @ A @ To, B=To.T @ B, C=C @ To, D=ss.D)


def to_transfer(ss: StateSpace) -> Union[RationalTransfer, TransferMatrix]:
    """Transfer function(s) of a realization; SISO returns a RationalTransfer"""
    p, m = ss.n_outputs, ss.n_inputs
    entries = [[None] * m for _ in range(p)]
    for j in range(m):
        if ss.n_states == 0:
            for i in range(p):
                entries[i][j] = RationalTransfer.constant(ss.D[i, j])
            continue
        num, den = scipy.signal.ss2tf(ss.A, ss.B, ss.C, ss.D, input=j)
        for i in range(p):
            entries[i][j] = RationalTransfer(num=np.atleast_2d(num)[i], den=den)
    if p == 1 and m == 1:
        return entries[0][0]
    return TransferMatrix(entries=entries, realization=ss)


# Interconnection


def _check_dimensions(kind: str, a: StateSpace, b: StateSpace) -> None:
    if kind == "series" and a.n_outputs != b.n_inputs:
        raise InvalidSystemError(f"series dimension mismatch: {a.n_outputs} outputs into {b.n_inputs} inputs")
    if kind == "parallel" and (a.n_outputs, a.n_inputs) != (b.n_outputs, b.n_inputs):
        raise InvalidSystemError("parallel connection needs equal dimensions")
    if kind == "feedback" and (a.n_outputs != b.n_inputs or b.n_outputs != a.n_inputs):
        raise InvalidSystemError("feedback dimension mismatch")


def _combine(kind: str, a, b, sign: float):
    if kind == "series":
        return control.series(a, b)
    if kind == "parallel":
        return control.parallel(a, b)
    try:
        return control.feedback(a, b, sign=sign)
    except (ValueError, ZeroDivisionError) as exc:
        raise IllPosedError(f"feedback interconnection has an algebraic loop: {exc}") from exc


def connect(kind: str, a: System, b: System, sign: float = -1.0) -> System:
    """Series (b after a), parallel (a + b) or feedback (a with b in the return path).

    Two transfer functions give a transfer function with tolerance-based
    pole/zero cancellation; anything involving a realization gives a
    realization.
    """
    if kind not in ("series", "parallel", "feedback"):
        raise ValueError(f"unknown connection '{kind}'")
    if isinstance(a, RationalTransfer) and isinstance(b, RationalTransfer):
        combined = _combine(kind, a.to_control(), b.to_control(), sign)
        return minreal(RationalTransfer.from_control(combined))
    a_ss, b_ss = to_state_space(a), to_state_space(b)
    _check_dimensions(kind, a_ss, b_ss)
    return StateSpace.from_control(_combine(kind, a_ss.to_control(), b_ss.to_control(), sign))


# Norms and spectra


def impulse_response(ss: StateSpace, n: int) -> np.ndarray:
    """Markov parameters h[0] = D, h[k] = C A^(k-1) B, shape (n, p, m)"""
    p, m = ss.n_outputs, ss.n_inputs
    if n < 2 or ss.n_states == 0:
        out = np.zeros((n, p, m))
        if n:
            out[0] = ss.D
        return out
    response = control.impulse_response(ss.to_control(), T=np.arange(n), squeeze=False)
    return np.moveaxis(np.asarray(response.outputs, dtype=float).reshape(p, m, n), -1, 0)


def h2_norm_sq(sys: Union[System, TransferMatrix]) -> float:
    """Squared H2 norm trace(C P C' + D D') with P = A P A' + B B'"""
    ss = to_state_space(sys)
    if ss.n_states == 0:
        return float(np.sum(ss.D**2))
    if ss.spectral_radius >= 1.0:
        raise UnstableSystemError(f"H2 norm undefined, spectral radius {ss.spectral_radius:.6g}")
    P = scipy.linalg.solve_discrete_lyapunov(ss.A, ss.B @ ss.B.T)
    return float(np.trace(ss.C @ P @ ss.C.T + ss.D @ ss.D.T))


def frequency_grid(n_points: int = None, endpoint: bool = True) -> np.ndarray:
    """Uniform grid over [-pi, pi]"""
    n_points = config.SPECTRAL_GRID_POINTS if n_points is None else n_points
    return np.linspace(-np.pi, np.pi, n_points, endpoint=endpoint)


def _on_pole(pole_list: Sequence[complex], z: np.ndarray, tol: float = 1e-10) -> bool:
    return any(np.min(np.abs(z - p)) <= tol * max(1.0, abs(p)) for p in pole_list)


def freq_response(sys: Union[System, TransferMatrix], omega):
    """H(e^{j omega}); complex scalar/array for SISO transfer functions, matrices otherwise"""
    omega = np.asarray(omega, dtype=float)
    if isinstance(sys, TransferMatrix):
        p, q = sys.shape
        out = np.empty(omega.shape + (p, q), dtype=complex)
        for i in range(p):
            for j in range(q):
                out[..., i, j] = freq_response(sys[i, j], omega)
        return out
    z = np.exp(1j * np.atleast_1d(omega).ravel())
    if isinstance(sys, RationalTransfer):
        if len(sys.num) == 1 and len(sys.den) == 1:
            response = np.full(omega.shape, complex(sys.num[0]))
        elif _on_pole(poles(sys), z):
            raise SingularityError("frequency response evaluated at a pole")
        else:
            response = np.asarray(sys.to_control()(z, squeeze=False))[0, 0].reshape(omega.shape)
        return response[()] if response.ndim == 0 else response
    p, m = sys.n_outputs, sys.n_inputs
    if sys.n_states == 0:
        return np.broadcast_to(sys.D.astype(complex), omega.shape + (p, m)).copy()
    if _on_pole(poles(sys), z):
        raise SingularityError("frequency response evaluated at a pole")
    response = np.asarray(sys.to_control()(z, squeeze=False)).reshape(p, m, z.size)
    return np.moveaxis(response, -1, 0).reshape(omega.shape + (p, m))


def l2_norm_sq_freq(
    sys: Union[System, TransferMatrix, Iterable[RationalTransfer]],
    n_points: int = None,
    rtol: float = 1e-13,
    max_points: int = 1 << 18,
) -> float:
    """Squared L2 norm on the unit circle by periodic trapezoid quadrature.

    For a stable system this is the squared H2 norm. The grid doubles until
    successive estimates agree to ``rtol``. Accepts one system or an iterable
    of SISO transfer functions (norms summed).
    """
    items = [sys] if isinstance(sys, (RationalTransfer, StateSpace, TransferMatrix)) else list(sys)
    n = config.SPECTRAL_GRID_POINTS if n_points is None else n_points

    def estimate(count: int) -> float:
        omega = 2.0 * np.pi * np.arange(count) / count
        total = 0.0
        for item in items:
            response = freq_response(item, omega)
            total += float(np.mean(np.sum(np.abs(response.reshape(count, -1)) ** 2, axis=1)))
        return total

    previous = estimate(n)
    while n < max_points:
        n *= 2
        current = estimate(n)
        if abs(current - previous) <= rtol * max(abs(current), 1e-300):
            return current
        previous = current
    return previous


def log_spectral_integral(S: np.ndarray, sigma_sq: float, omega: Optional[np.ndarray] = None) -> float:
    """(1/4pi) * integral of log(S/sigma^2) over [-pi, pi], in nats"""
    S = np.asarray(S, dtype=float)
    if sigma_sq <= 0:
        raise SpectralDomainError("reference variance must be positive")
    if np.any(~np.isfinite(S)) or np.any(S <= 0.0):
        raise SpectralDomainError("spectral density must be positive on the grid")
    if omega is None:
        omega = frequency_grid(S.size)
    return float(trapezoid(np.log(S / sigma_sq), omega) / (4.0 * np.pi))
