"""
Generalized plant: validation, delay augmentation and closed-loop maps
"""
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel

from ..models.lti import RationalTransfer, StateSpace, TransferMatrix
from ..models.plant import (
    AssumptionCheck,
    GeneralizedPlant,
    LinearScheme,
    PlantRealization,
    ValidationReport,
)
from ..utils.errors import InvalidSystemError, UnstableSystemError
from .lti_algebra import (
    delay_tf,
    is_strictly_proper,
    l2_norm_sq_freq,
    h2_norm_sq,
    minimal_realization,
    minreal,
    miso_realization,
    poles,
    to_state_space,
    transfer_matrix_realization,
)

UNIT_CIRCLE_TOL = 1e-9


class LoopTerms(BaseModel):
    """Squared H2 norms of the loop for unit-variance w and eta"""
    t_from_w: float
    t_from_eta: float
    z_from_w: float
    z_from_eta: float

    def snr(self, sigma_eta_sq: float) -> float:
        return self.t_from_eta + self.t_from_w / sigma_eta_sq

    def var_z(self, sigma_eta_sq: float) -> float:
        return self.z_from_w + self.z_from_eta * sigma_eta_sq


# Plant structure


def _entries_by_name(G: GeneralizedPlant) -> List[Tuple[str, RationalTransfer]]:
    named = []
    for i in range(G.n_z):
        for j in range(G.n_w):
            named.append((f"G11[{i},{j}]", G.G11[i, j]))
        named.append((f"G12[{i}]", G.G12[i, 0]))
    for j in range(G.n_w):
        named.append((f"G21[{j}]", G.G21[0, j]))
    named.append(("G22", G.G22))
    return named


def realize_plant(G: GeneralizedPlant, require_strict: bool = True) -> PlantRealization:
    """Joint minimal realization of [[G11, G12], [G21, G22]]"""
    ss = transfer_matrix_realization(G.full_matrix())
    n_z, n_w = G.n_z, G.n_w
    D = ss.D
    if require_strict and abs(D[n_z, n_w]) > 0.0:
        raise InvalidSystemError("G22 must be strictly proper")
    return PlantRealization(
        A=ss.A,
        B1=ss.B[:, :n_w],
        B2=ss.B[:, n_w:],
        C1=ss.C[:n_z, :],
        C2=ss.C[n_z:, :],
        D11=D[:n_z, :n_w],
        D12=D[:n_z, n_w:],
        D21=D[n_z:, :n_w],
    )


def _pbh_full_rank(M: np.ndarray, n: int, tol: float = 1e-8) -> bool:
    s = np.linalg.svd(M, compute_uv=False)
    return s.size >= n and s[n - 1] > tol * max(1.0, s[0])


def stabilizable_detectable(real: PlantRealization) -> Tuple[bool, bool]:
    """PBH tests of (A, B2) and (A, C2) on the eigenvalues outside the open unit disc"""
    n = real.n_states
    stabilizable = detectable = True
    for lam in np.linalg.eigvals(real.A) if n else []:
        if abs(lam) < 1.0 - UNIT_CIRCLE_TOL:
            continue
        shifted = real.A - lam * np.eye(n)
        stabilizable &= _pbh_full_rank(np.hstack([shifted, real.B2]), n)
        detectable &= _pbh_full_rank(np.vstack([shifted, real.C2]), n)
    return bool(stabilizable), bool(detectable)


def validate_assumption1(G: GeneralizedPlant) -> ValidationReport:
    """Propriety, strict propriety of G22, no unstable hidden modes per entry"""
    checks = [AssumptionCheck(name="proper", passed=True, detail="all entries are proper")]

    strict = is_strictly_proper(G.G22)
    checks.append(
        AssumptionCheck(
            name="G22 strictly proper",
            passed=strict,
            detail="" if strict else f"G22 has direct feedthrough {G.G22.num[0]:.6g}",
        )
    )

    hidden = []
    for label, entry in _entries_by_name(G):
        raw = [p for p in poles(entry) if abs(p) >= 1.0 - UNIT_CIRCLE_TOL]
        if not raw:
            continue
        reduced = poles(minimal_realization(to_state_space(entry)))
        kept = [p for p in reduced if abs(p) >= 1.0 - UNIT_CIRCLE_TOL]
        if len(kept) < len(raw):
            hidden.append(f"{label}: {len(raw) - len(kept)} unstable mode(s) cancelled")
    checks.append(AssumptionCheck(name="no unstable hidden modes", passed=not hidden, detail="; ".join(hidden)))

    real = realize_plant(G, require_strict=False)
    stabilizable, detectable = stabilizable_detectable(real)
    detail = []
    if not stabilizable:
        detail.append("unstable mode not reachable from u")
    if not detectable:
        detail.append("unstable mode not visible in y")
    checks.append(
        AssumptionCheck(
            name="stabilizable and detectable",
            passed=stabilizable and detectable,
            detail="; ".join(detail),
        )
    )
    return ValidationReport(checks=checks)


def delay_augment(G: GeneralizedPlant, h: int) -> GeneralizedPlant:
    """G_a = [[G11, z^-h G12], [G21, z^-h G22]]"""
    if h < 0:
        raise ValueError("delay must be nonnegative")
    if h == 0:
        return G
    return GeneralizedPlant(
        G11=G.G11,
        G12=TransferMatrix.column([G.G12[i, 0].shift(h) for i in range(G.n_z)]),
        G21=G.G21,
        G22=G.G22.shift(h),
        name=G.name,
    )


def unstable_poles(G: GeneralizedPlant) -> List[complex]:
    """Eigenvalues of the joint minimal realization on or outside the unit circle"""
    A = realize_plant(G, require_strict=False).A
    if A.size == 0:
        return []
    return [complex(p) for p in np.linalg.eigvals(A) if abs(p) >= 1.0]


def min_stabilizing_rate(G: GeneralizedPlant) -> float:
    """Sum of log2|p| over unstable poles, in bits/sample"""
    return float(sum(np.log2(abs(p)) for p in unstable_poles(G)))


# Closed loop


def scheme_encoder(scheme: LinearScheme) -> StateSpace:
    """Realization of (r, y) -> t"""
    if scheme.encoder is not None:
        return scheme.encoder
    return miso_realization([scheme.Br.shift(1), scheme.By])


def closed_loop_realization(G: GeneralizedPlant, scheme: LinearScheme, h: int) -> StateSpace:
    """Loop with the delay absorbed into the plant.

    Inputs are [eta, w (n_w), psi1, psi2]; outputs are [z' (n_z), y', r, u', t].
    psi1 is added at the decoder output before the delay, psi2 at the
    measurement entering the encoder; u' is the decoder output before the delay.
    """
    real = realize_plant(delay_augment(G, h))
    enc = scheme_encoder(scheme)
    dec = minimal_realization(to_state_space(scheme.J))
    n, ne, nj = real.n_states, enc.n_states, dec.n_states
    n_w, n_z = G.n_w, G.n_z
    N = n + ne + nj
    M = n_w + 3
    sx, se, sj = slice(0, n), slice(n, n + ne), slice(n + ne, N)
    w_cols = slice(N + 1, N + 1 + n_w)
    eta_col, psi1_col, psi2_col = N, N + 1 + n_w, N + 2 + n_w

    def rows(k: int) -> np.ndarray:
        return np.zeros((k, N + M))

    ym = rows(1)
    ym[:, sx] = real.C2
    ym[:, w_cols] = real.D21
    ym[:, psi2_col] = 1.0

    t = rows(1)
    t[:, se] = enc.C
    t += enc.D[0, 1] * ym

    r = t.copy()
    r[:, eta_col] += 1.0

    v = rows(1)
    v[:, sj] = dec.C
    v += dec.D[0, 0] * r
    v[:, psi1_col] += 1.0

    y_out = rows(1)
    y_out[:, sx] = real.C2
    y_out[:, w_cols] = real.D21

    z_out = rows(n_z)
    z_out[:, sx] = real.C1
    z_out[:, w_cols] = real.D11
    z_out += real.D12 @ v

    x_next = rows(n)
    x_next[:, sx] = real.A
    x_next[:, w_cols] = real.B1
    x_next += real.B2 @ v

    e_next = rows(ne)
    e_next[:, se] = enc.A
    e_next += enc.B[:, [0]] @ r + enc.B[:, [1]] @ ym

    j_next = rows(nj)
    j_next[:, sj] = dec.A
    j_next += dec.B @ r

    dyn = np.vstack([x_next, e_next, j_next])
    out = np.vstack([z_out, y_out, r, v, t])
    return StateSpace(A=dyn[:, :N].reshape(N, N), B=dyn[:, N:], C=out[:, :N], D=out[:, N:])


def _loop_M(G22: RationalTransfer, scheme: LinearScheme, h: int) -> RationalTransfer:
    inverse = 1.0 - scheme.Br.shift(1) - G22 * scheme.J * scheme.By.shift(h)
    return inverse.inv()


def closed_loop_T(G: GeneralizedPlant, scheme: LinearScheme, h: int) -> TransferMatrix:
    """Closed-loop map [eta, w, psi1, psi2] -> [z', y', r, u'] with M = (1 - Br z^-1 - G22 J z^-h By)^-1"""
    M = _loop_M(G.G22, scheme, h)
    Br, By, J = scheme.Br, scheme.By, scheme.J
    dh = delay_tf(h)
    S = (1.0 - Br.shift(1)) * M
    JM = J * M
    JByM = J * By * M

    def row(head, w_part, psi1, psi2):
        return [head] + w_part + [psi1, psi2]

    entries = []
    for i in range(G.n_z):
        g12 = G.G12[i, 0]
        entries.append(row(
            g12 * dh * JM,
            [G.G11[i, j] + g12 * dh * JByM * G.G21[0, j] for j in range(G.n_w)],
            g12 * dh * S,
            g12 * dh * JByM,
        ))
    g22 = G.G22
    entries.append(row(
        g22 * dh * JM,
        [G.G21[0, j] * S for j in range(G.n_w)],
        g22 * dh * S,
        g22 * dh * JByM,
    ))
    entries.append(row(
        M,
        [G.G21[0, j] * By * M for j in range(G.n_w)],
        g22 * dh * By * M,
        By * M,
    ))
    entries.append(row(
        JM,
        [G.G21[0, j] * JByM for j in range(G.n_w)],
        S,
        JByM,
    ))
    realization = closed_loop_realization(G, scheme, h)
    realization = realization.select(outputs=range(realization.n_outputs - 1))
    return TransferMatrix(entries=entries, realization=realization)


def is_internally_stable(T: TransferMatrix) -> bool:
    """Every entry proper and stable; uses the joint realization when available"""
    if T.realization is not None:
        return T.realization.spectral_radius < 1.0
    for entry in T.flat():
        if any(abs(p) >= 1.0 for p in poles(minreal(entry))):
            return False
    return True


def _require_stable(G: GeneralizedPlant, scheme: LinearScheme, h: int) -> StateSpace:
    loop = closed_loop_realization(G, scheme, h)
    if loop.spectral_radius >= 1.0:
        raise UnstableSystemError(f"closed loop is not internally stable (spectral radius {loop.spectral_radius:.6g})")
    return loop


def snr_and_variance(G: GeneralizedPlant, scheme: LinearScheme, h: int) -> Tuple[float, float]:
    """(sigma_t^2 / sigma_eta^2, sigma_z'^2) with the delay kept in the channel.

    Uses N = J By z^-h (1 - Br z^-1)^-1, so that
    SNR = ||M - 1||^2 + ||By M G21||^2 / sigma_eta^2 and
    var_z = ||G11 + G12 N (1 - G22 N)^-1 G21||^2 + ||G12 J z^-h M||^2 sigma_eta^2.
    """
    _require_stable(G, scheme, h)
    sigma = scheme.sigma_eta_sq
    M = _loop_M(G.G22, scheme, h)
    N = scheme.J * scheme.By.shift(h) * (1.0 - scheme.Br.shift(1)).inv()
    closure = N * (1.0 - G.G22 * N).inv()

    snr = l2_norm_sq_freq(M - 1.0)
    snr += l2_norm_sq_freq([scheme.By * M * G.G21[0, j] for j in range(G.n_w)]) / sigma
    var_z = l2_norm_sq_freq(
        [G.G11[i, j] + G.G12[i, 0] * closure * G.G21[0, j] for i in range(G.n_z) for j in range(G.n_w)]
    )
    var_z += l2_norm_sq_freq([G.G12[i, 0] * scheme.J * M.shift(h) for i in range(G.n_z)]) * sigma
    return float(snr), float(var_z)


def snr_and_variance_absorbed(G_a: GeneralizedPlant, scheme: LinearScheme) -> Tuple[float, float]:
    """Same quantities on a plant that already contains the delay (h = 0)"""
    _require_stable(G_a, scheme, 0)
    sigma = scheme.sigma_eta_sq
    M = _loop_M(G_a.G22, scheme, 0)
    JByM = scheme.J * scheme.By * M
    snr = l2_norm_sq_freq(M - 1.0)
    snr += l2_norm_sq_freq([scheme.By * M * G_a.G21[0, j] for j in range(G_a.n_w)]) / sigma
    var_z = l2_norm_sq_freq(
        [G_a.G11[i, j] + G_a.G12[i, 0] * JByM * G_a.G21[0, j] for i in range(G_a.n_z) for j in range(G_a.n_w)]
    )
    var_z += l2_norm_sq_freq([G_a.G12[i, 0] * scheme.J * M for i in range(G_a.n_z)]) * sigma
    return float(snr), float(var_z)


def loop_variance_terms(G: GeneralizedPlant, scheme: LinearScheme, h: int) -> LoopTerms:
    """Affine coefficients of sigma_t^2 and sigma_z'^2 in sigma_eta^2 (Lyapunov based)"""
    loop = _require_stable(G, scheme, h)
    n_z, n_w = G.n_z, G.n_w
    z_rows = list(range(n_z))
    t_row = [loop.n_outputs - 1]
    w_cols = list(range(1, 1 + n_w))
    return LoopTerms(
        t_from_w=h2_norm_sq(loop.select(outputs=t_row, inputs=w_cols)),
        t_from_eta=h2_norm_sq(loop.select(outputs=t_row, inputs=[0])),
        z_from_w=h2_norm_sq(loop.select(outputs=z_rows, inputs=w_cols)),
        z_from_eta=h2_norm_sq(loop.select(outputs=z_rows, inputs=[0])),
    )
