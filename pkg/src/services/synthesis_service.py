"""
Performance floor, SNR-performance optimization and rate bounds
"""
import math
from typing import Dict, Optional, Tuple

import control
import cvxpy as cp
import numpy as np
import scipy.linalg
import scipy.signal

import config
from ..models.bounds import ECDQ_GAP_BITS, BoundResult, LqgController, PhiPrimeResult
from ..models.lti import RationalTransfer, StateSpace
from ..models.plant import GeneralizedPlant, LinearScheme, PlantRealization
from ..utils.errors import InfeasiblePerformanceError, SynthesisError, UnstableSystemError
from .lti_algebra import (
    connect,
    frequency_grid,
    freq_response,
    h2_norm_sq,
    impulse_response,
    log_spectral_integral,
)
from .plant_service import (
    closed_loop_T,
    closed_loop_realization,
    delay_augment,
    loop_variance_terms,
    realize_plant,
    stabilizable_detectable,
)


# relative slack on the performance floor against round-off in d_inf
FLOOR_RTOL = 1e-9


def rate_lower_bound(phi: float) -> float:
    """0.5 * log2(1 + phi) bits/sample"""
    if phi < 0:
        raise ValueError("SNR must be nonnegative")
    return 0.5 * math.log2(1.0 + phi)


def rate_upper_bound(phi: float) -> float:
    """Lower bound plus the ECDQ gap 0.5*log2(2*pi*e/12) + 1"""
    return rate_lower_bound(phi) + ECDQ_GAP_BITS


def _psd_pinv(M: np.ndarray, scale: float) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix, dropping eigenvalues below an absolute floor"""
    if not M.size:
        return M.T.copy()
    return scipy.linalg.pinvh((M + M.T) / 2.0, atol=config.PINV_ATOL * max(1.0, scale), rtol=0.0)


def solve_riccati(
    A: np.ndarray,
    B: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    S: Optional[np.ndarray] = None,
    tol: float = None,
    max_iter: int = None,
) -> np.ndarray:
    """Stabilizing solution of X = A'XA - (A'XB + S)(R + B'XB)^-1(B'XA + S') + Q.

    Tries control.dare first and keeps its answer only when it satisfies the
    equation and stabilizes A - BK. Otherwise runs the Riccati recursion from
    X = Q with a pseudo-inverse gain, which also covers singular R.
    """
    tol = config.RICCATI_TOL if tol is None else tol
    max_iter = config.RICCATI_MAX_ITER if max_iter is None else max_iter
    n, m = B.shape
    S = np.zeros((n, m)) if S is None else S
    norm_B = np.linalg.norm(B, 2) if B.size else 0.0

    def gain(X: np.ndarray) -> np.ndarray:
        scale = max(np.linalg.norm(R, 2) if R.size else 0.0, norm_B**2 * np.linalg.norm(X, 2))
        return _psd_pinv(R + B.T @ X @ B, scale) @ (B.T @ X @ A + S.T)

    def residual(X: np.ndarray) -> float:
        lhs = A.T @ X @ A - (A.T @ X @ B + S) @ gain(X) + Q
        return np.linalg.norm(lhs - X) / max(1.0, np.linalg.norm(X))

    def stabilizing(X: np.ndarray) -> bool:
        if not np.all(np.isfinite(X)):
            return False
        return not n or np.max(np.abs(np.linalg.eigvals(A - B @ gain(X)))) < 1.0

    if m:
        try:
            X, _, _ = control.dare(A, B, Q, R, S=S)
            X = (np.asarray(X) + np.asarray(X).T) / 2.0
            if stabilizing(X) and residual(X) <= math.sqrt(tol):
                return X
        except (np.linalg.LinAlgError, ValueError, TypeError, ArithmeticError):
            pass

    X = Q.copy()
    for _ in range(max_iter):
        X_next = A.T @ X @ A - (A.T @ X @ B + S) @ gain(X) + Q
        X_next = (X_next + X_next.T) / 2.0
        if not np.all(np.isfinite(X_next)):
            break
        settled = np.linalg.norm(X_next - X) <= tol * max(1.0, np.linalg.norm(X_next))
        X = X_next
        # settled but not stabilizing: keep iterating
        if settled and stabilizing(X):
            return X
    raise SynthesisError("Riccati recursion did not converge to a stabilizing solution")


def lqg_controller(real: PlantRealization) -> LqgController:
    """H2-optimal output feedback with the current measurement available"""
    stabilizable, detectable = stabilizable_detectable(real)
    if not stabilizable:
        raise SynthesisError("plant is not stabilizable from u")
    if not detectable:
        raise SynthesisError("plant is not detectable from y")
    A, B1, B2, C1, C2 = real.A, real.B1, real.B2, real.C1, real.C2
    D11, D12, D21 = real.D11, real.D12, real.D21

    X = solve_riccati(A, B2, C1.T @ C1, D12.T @ D12, C1.T @ D12)
    Y = solve_riccati(A.T, C2.T, B1 @ B1.T, D21 @ D21.T, B1 @ D21.T)

    Rc_inv = _psd_pinv(D12.T @ D12 + B2.T @ X @ B2, np.linalg.norm(X, 2) * np.linalg.norm(B2, 2) ** 2)
    F = -Rc_inv @ (B2.T @ X @ A + D12.T @ C1)
    F1 = -Rc_inv @ (B2.T @ X @ B1 + D12.T @ D11)
    V_inv = _psd_pinv(C2 @ Y @ C2.T + D21 @ D21.T, np.linalg.norm(Y, 2) * np.linalg.norm(C2, 2) ** 2)
    Mf = Y @ C2.T @ V_inv
    Mw = D21.T @ V_inv
    Lp = (A @ Y @ C2.T + B1 @ D21.T) @ V_inv
    K0 = F @ Mf + F1 @ Mw

    for label, closed in (("state feedback", A + B2 @ F), ("estimator", A - Lp @ C2)):
        if closed.size and np.max(np.abs(np.linalg.eigvals(closed))) >= 1.0:
            raise SynthesisError(f"{label} Riccati solution is not stabilizing")
    return LqgController(F=F, F1=F1, Lp=Lp, K0=K0, X=X, Y=Y)


def lqg_closed_loop(real: PlantRealization, ctrl: LqgController) -> StateSpace:
    """w -> z under the H2-optimal controller"""
    A, B1, B2, C1, C2 = real.A, real.B1, real.B2, real.C1, real.C2
    D11, D12, D21 = real.D11, real.D12, real.D21
    F, Lp, K0 = ctrl.F, ctrl.Lp, ctrl.K0
    Cc = F - K0 @ C2
    Ac = A - Lp @ C2 + B2 @ Cc
    Bc = B2 @ K0 + Lp
    A_cl = np.block([[A + B2 @ K0 @ C2, B2 @ Cc], [Bc @ C2, Ac]])
    B_cl = np.vstack([B1 + B2 @ K0 @ D21, Bc @ D21])
    C_cl = np.hstack([C1 + D12 @ K0 @ C2, D12 @ Cc])
    return StateSpace(A=A_cl, B=B_cl, C=C_cl, D=D11 + D12 @ K0 @ D21)


def _shifted(response: np.ndarray, lag: int) -> np.ndarray:
    out = np.zeros_like(response)
    if lag < response.shape[0]:
        out[lag:] = response[: response.shape[0] - lag]
    return out


def _ss2tf_num(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Numerator over det(zI - A) of C (zI - A)^-1 B, ascending powers of z^-1"""
    num, _ = scipy.signal.ss2tf(A, B, C, np.zeros((C.shape[0], B.shape[1])))
    return np.atleast_2d(num)[0]


def _poly_add(*terms: np.ndarray) -> np.ndarray:
    out = np.zeros(max(t.size for t in terms))
    for t in terms:
        out[: t.size] += t
    return out


def youla_scheme(
    real: PlantRealization,
    ctrl: LqgController,
    q: np.ndarray,
    v: np.ndarray,
    sigma_eta_sq: float,
) -> LinearScheme:
    """Scheme with J = 1 from the FIR parameters.

    The encoder runs an estimator on the delay-absorbed plant:
    t = F p + Q(z) nu + (V(z) - 1) eta with nu = y - C2 p and Q(z) = sum q_i z^-i.
    """
    A, B2, C2 = real.A, real.B2, real.C2
    F, Lp = ctrl.F, ctrl.Lp
    n = real.n_states
    N = q.size
    AL = A - Lp @ C2

    chi = np.real(np.poly(AL)) if n else np.ones(1)
    n_FB2 = _ss2tf_num(AL, B2, F) if n else np.zeros(1)
    n_CB2 = _ss2tf_num(AL, B2, C2) if n else np.zeros(1)
    n_FL = _ss2tf_num(AL, Lp, F) if n else np.zeros(1)
    n_CL = _ss2tf_num(AL, Lp, C2) if n else np.zeros(1)
    v_minus_one = v.copy()
    v_minus_one[0] -= 1.0

    num_r = _poly_add(n_FB2, -np.convolve(q, n_CB2), np.convolve(v_minus_one, chi))
    num_y = _poly_add(n_FL, np.convolve(q, _poly_add(chi, -n_CL)))
    den = np.convolve(v, chi)
    Br = RationalTransfer(num=num_r[1:] if num_r.size > 1 else np.zeros(1), den=den)
    By = RationalTransfer(num=num_y, den=den)

    # states: estimator p (n), past innovations (N - 1), past channel noise (N)
    n_nu, n_eta = N - 1, v.size - 1
    size = n + n_nu + n_eta
    q0 = float(q[0])
    Ce = np.zeros((1, size))
    Ce[:, :n] = F - q0 * C2
    Ce[0, n : n + n_nu] = q[1:]
    Ce[0, n + n_nu :] = v[1:]
    Ae = np.zeros((size, size))
    Be = np.zeros((size, 2))
    Ae[:n, :n] = AL
    Be[:n, [0]] = B2
    Be[:n, [1]] = Lp
    if n_nu:
        Ae[n, :n] = -C2
        Be[n, 1] = 1.0
        for i in range(1, n_nu):
            Ae[n + i, n + i - 1] = 1.0
    if n_eta:
        first = n + n_nu
        Ae[first, :] = -Ce
        Be[first, 0] = 1.0
        Be[first, 1] = -q0
        for i in range(1, n_eta):
            Ae[first + i, first + i - 1] = 1.0
    encoder = StateSpace(A=Ae, B=Be, C=Ce, D=np.array([[0.0, q0]]))
    return LinearScheme(
        Br=Br,
        By=By,
        J=RationalTransfer.constant(1.0),
        sigma_eta_sq=sigma_eta_sq,
        encoder=encoder,
    )


class _YoulaProgram:
    """Convex feasibility program for one FIR order.

    Variables are the FIR taps q of the Youla parameter, the noise-shaping
    taps w = s V and the scaled noise variance s = sigma_eta^2 / D.
    """

    def __init__(self, real: PlantRealization, ctrl: LqgController, D: float, order: int, solver: str):
        self.D = D
        self.order = order
        self.solver = solver
        A, B1, B2, C1, C2 = real.A, real.B1, real.B2, real.C1, real.C2
        D11, D12, D21 = real.D11, real.D12, real.D21
        F, Lp = ctrl.F, ctrl.Lp
        self.K0 = float(ctrl.K0[0, 0])
        AF = A + B2 @ F
        AL = A - Lp @ C2
        Bnu = B1 - Lp @ D21
        CZ = C1 + D12 @ F
        n = real.n_states
        n_w, n_z = B1.shape[1], C1.shape[0]

        rho = max(
            np.max(np.abs(np.linalg.eigvals(AF))) if n else 0.0,
            np.max(np.abs(np.linalg.eigvals(AL))) if n else 0.0,
        )
        settle = n + 8 if rho < 1e-6 else int(math.ceil(1.5 * math.log(1e-11) / math.log(rho))) + n
        self.horizon = L = order + 1 + min(settle, 20000)

        Tq = StateSpace(A=AF, B=B2, C=F, D=np.ones((1, 1)))
        Zq = StateSpace(A=AF, B=B2, C=CZ, D=D12)
        Hnu = StateSpace(A=AL, B=Bnu, C=C2, D=D21)
        HeF = StateSpace(A=AL, B=Bnu, C=F, D=np.zeros((1, n_w)))
        GxT = StateSpace(A=AF, B=B1, C=F, D=np.zeros((1, n_w)))
        GxZ = StateSpace(A=AF, B=B1, C=CZ, D=D11)

        imp_T0 = impulse_response(GxT, L) - impulse_response(connect("series", HeF, Tq), L)
        imp_Z0 = impulse_response(GxZ, L) - impulse_response(connect("series", HeF, Zq), L)
        imp_PT = impulse_response(connect("series", Hnu, Tq), L)
        imp_PZ = impulse_response(connect("series", Hnu, Zq), L)
        imp_Tq = impulse_response(Tq, L)
        imp_Zq = impulse_response(Zq, L)

        self.a_T = (imp_T0 + self.K0 * imp_PT).ravel()
        self.a_Z = (imp_Z0 + self.K0 * imp_PZ).ravel()
        self.Phi_T = np.column_stack([_shifted(imp_PT, i).ravel() for i in range(order)])
        self.Phi_Z = np.column_stack([_shifted(imp_PZ, i).ravel() for i in range(order)])
        self.Psi_T = np.column_stack([_shifted(imp_Tq, j).ravel() for j in range(order + 1)])
        self.Psi_Z = np.column_stack([_shifted(imp_Zq, j).ravel() for j in range(order + 1)])
        self.e0 = np.zeros(L)
        self.e0[0] = 1.0

        self.q = cp.Variable(order)
        self.w = cp.Variable(order + 1)
        self.s = cp.Variable(nonneg=True)
        self.gamma = cp.Parameter(nonneg=True)
        objective = (
            cp.sum_squares(self.a_T + self.Phi_T @ self.q) / D
            + cp.quad_over_lin(self.Psi_T @ self.w - self.s * self.e0, self.s)
            - self.gamma * self.s
        )
        constraints = [
            cp.sum_squares(self.a_Z + self.Phi_Z @ self.q) / D + cp.quad_over_lin(self.Psi_Z @ self.w, self.s) <= 1.0,
            self.w[0] == self.s,
        ]
        self.problem = cp.Problem(cp.Minimize(objective), constraints)

    def center(self) -> Tuple[float, np.ndarray, np.ndarray, float]:
        """SNR of the LQG controller with white channel noise at the performance limit"""
        floor = float(self.a_Z @ self.a_Z) / self.D
        if floor >= 1.0 - FLOOR_RTOL:
            raise InfeasiblePerformanceError(self.D, floor * self.D)
        gain_z = float(self.Psi_Z[:, 0] @ self.Psi_Z[:, 0])
        s = (1.0 - floor) / gain_z if gain_z > 0 else 1e6
        noise = self.Psi_T[:, 0] - self.e0
        gamma = (float(self.a_T @ self.a_T) / self.D + s * float(noise @ noise)) / s
        w = np.zeros(self.order + 1)
        w[0] = s
        return gamma, np.zeros(self.order), w, s

    def feasible(self, gamma: float) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
        self.gamma.value = gamma
        for solver in dict.fromkeys([self.solver, "SCS"]):
            try:
                kwargs = {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 200000} if solver == "SCS" else {}
                value = self.problem.solve(solver=solver, **kwargs)
            except cp.SolverError:
                continue
            if self.problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
                if value <= 0.0 and self.s.value is not None and self.s.value > 0:
                    return self.q.value.copy(), self.w.value.copy(), float(self.s.value)
                return None
        raise SynthesisError(f"convex solver failed at gamma={gamma:.6g}")


def _plant_key(G: GeneralizedPlant) -> str:
    return repr([(e.num, e.den) for e in G.full_matrix().flat()])


class SynthesisService:
    """Computes D_inf(h), the SNR optimum and the ECDQ design for a plant"""

    def __init__(
        self,
        fir_order: int = None,
        fir_order_max: int = None,
        rel_tol: float = None,
        margin: float = None,
        solver: str = None,
    ):
        self.fir_order = fir_order or config.FIR_ORDER
        self.fir_order_max = fir_order_max or config.FIR_ORDER_MAX
        self.rel_tol = rel_tol or config.BISECTION_REL_TOL
        self.margin = config.DESIGN_MARGIN if margin is None else margin
        self.solver = solver or config.CVX_SOLVER
        self.d_inf_cache: Dict[Tuple[str, int], float] = {}
        self.phi_prime_cache: Dict[Tuple[str, int, float], PhiPrimeResult] = {}

    def d_inf(self, G: GeneralizedPlant, h: int) -> float:
        """Optimal H2 performance with h-step delayed control"""
        key = (_plant_key(G), h)
        if key not in self.d_inf_cache:
            real = realize_plant(delay_augment(G, h))
            ctrl = lqg_controller(real)
            self.d_inf_cache[key] = h2_norm_sq(lqg_closed_loop(real, ctrl))
        return self.d_inf_cache[key]

    def _bisect(self, program: _YoulaProgram, lower: float) -> Tuple[float, float, Tuple]:
        upper, q, w, s = program.center()
        best = (q, w, s)
        lower = min(lower, upper)
        for _ in range(200):
            if (upper - lower) / max(lower, 1.0) <= self.rel_tol:
                break
            mid = 0.5 * (lower + upper)
            solution = program.feasible(mid)
            if solution is None:
                lower = mid
            else:
                upper, best = mid, solution
        return lower, upper, best

    def phi_prime(self, G: GeneralizedPlant, h: int, D: float) -> PhiPrimeResult:
        """Smallest channel SNR achieving var(z) <= D with an h-step channel delay"""
        key = (_plant_key(G), h, float(D))
        if key in self.phi_prime_cache:
            return self.phi_prime_cache[key]
        floor = self.d_inf(G, h)
        if D <= floor * (1.0 + FLOOR_RTOL):
            raise InfeasiblePerformanceError(D, floor)
        real = realize_plant(delay_augment(G, h))
        ctrl = lqg_controller(real)
        eig = np.linalg.eigvals(real.A) if real.n_states else np.zeros(0)
        stability_floor = max(0.0, float(np.prod([abs(p) ** 2 for p in eig if abs(p) >= 1.0])) - 1.0)

        order = self.fir_order
        previous = None
        converged = False
        while True:
            program = _YoulaProgram(real, ctrl, D, order, self.solver)
            lower, upper, best = self._bisect(program, stability_floor)
            if previous is not None and abs(upper - previous[1]) <= self.rel_tol * max(previous[1], 1.0):
                converged = True
                break
            if order * 2 > self.fir_order_max:
                break
            previous = (lower, upper)
            order *= 2
        if not converged and previous is not None:
            lower = max(stability_floor, min(lower, upper - abs(upper - previous[1])))

        q, w, s = best
        taps = q.copy()
        taps[0] += program.K0
        v = w / w[0]
        scheme = youla_scheme(real, ctrl, taps, v, s * D)
        try:
            terms = loop_variance_terms(G, scheme, h)
        except UnstableSystemError as exc:
            raise SynthesisError(f"reconstructed scheme does not stabilize the loop: {exc}") from exc
        sigma_eta_sq = scheme.sigma_eta_sq
        if terms.z_from_eta > 0 and terms.z_from_w < D:
            sigma_eta_sq = (D - terms.z_from_w) / terms.z_from_eta
        scheme = scheme.model_copy(update={"sigma_eta_sq": sigma_eta_sq})
        value = terms.snr(sigma_eta_sq)
        residual = directed_info_linear(G, scheme, h) - rate_lower_bound(value)
        result = PhiPrimeResult(
            value=value,
            lower=min(lower, value),
            upper=max(upper, value),
            fir_order=order,
            converged=converged,
            identity_residual_bits=residual,
            scheme=scheme,
        )
        self.phi_prime_cache[key] = result
        return result

    def design_ecdq(self, G: GeneralizedPlant, h: int, D: float) -> Tuple[PhiPrimeResult, float]:
        """SNR optimum at D * (1 - margin) and the quantizer step of its scheme"""
        target = D * (1.0 - self.margin)
        floor = self.d_inf(G, h)
        if target <= floor * (1.0 + FLOOR_RTOL):
            raise InfeasiblePerformanceError(target, floor)
        result = self.phi_prime(G, h, target)
        return result, math.sqrt(12.0 * result.scheme.sigma_eta_sq)

    def design_ecdq_scheme(self, G: GeneralizedPlant, h: int, D: float) -> Tuple[LinearScheme, float]:
        """SNR-optimal scheme for D * (1 - margin) and the matching quantizer step"""
        result, delta = self.design_ecdq(G, h, D)
        return result.scheme, delta

    def compute_bounds(self, G: GeneralizedPlant, h: int, D: float) -> BoundResult:
        result = self.phi_prime(G, h, D)
        return BoundResult(
            h=h,
            D=D,
            d_inf=self.d_inf(G, h),
            phi_prime=result.value,
            rate_lb_bits=rate_lower_bound(result.value),
            rate_ub_bits=rate_upper_bound(result.value),
            solver_gap=result.relative_gap,
            converged=result.converged,
            scheme=result.scheme,
        )


def directed_info_linear(G: GeneralizedPlant, scheme: LinearScheme, h: int, n_points: int = None) -> float:
    """Log-spectral integral of the decoder output PSD over sigma_eta^2, in bits/sample"""
    if closed_loop_realization(G, scheme, h).spectral_radius >= 1.0:
        raise UnstableSystemError("directed information needs an internally stable loop")
    T = closed_loop_T(G, scheme, h)
    row = G.n_z + 2
    omega = frequency_grid(n_points)
    sigma = scheme.sigma_eta_sq
    S = sigma * np.abs(freq_response(T[row, 0], omega)) ** 2
    for j in range(G.n_w):
        S = S + np.abs(freq_response(T[row, 1 + j], omega)) ** 2
    return log_spectral_integral(S, sigma, omega) / math.log(2.0)


_default_service: Optional[SynthesisService] = None


def _service() -> SynthesisService:
    global _default_service
    if _default_service is None:
        _default_service = SynthesisService()
    return _default_service


def d_inf(G: GeneralizedPlant, h: int) -> float:
    return _service().d_inf(G, h)


def phi_prime(G: GeneralizedPlant, h: int, D: float) -> Tuple[float, LinearScheme]:
    result = _service().phi_prime(G, h, D)
    return result.value, result.scheme


def design_ecdq_scheme(G: GeneralizedPlant, h: int, D: float) -> Tuple[LinearScheme, float]:
    return _service().design_ecdq_scheme(G, h, D)
