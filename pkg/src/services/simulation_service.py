"""
Closed-loop Monte Carlo: plant, linear scheme, ECDQ and delay channel
"""
from collections import deque
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import stats

import config
from ..models.channel import DelayMode, DelaySpec
from ..models.simulation import (
    LoopTrace,
    NoiseModel,
    Placement,
    RealizationResult,
    SeedSet,
    SimConfig,
    SimResult,
)
from ..utils.console import status
from ..utils.errors import DivergenceError, InsufficientDataError
from .channel_service import DelayChannel, ReorderBuffer
from .codec_service import DitherStream, codeword_lengths, ecdq_encode, rate_and_entropy, train_codebook
from .lti_algebra import minimal_realization, to_state_space
from .plant_service import delay_augment, realize_plant, scheme_encoder

ChannelFactory = Callable[[DelaySpec, int], DelayChannel]


def estimate_variance(trace: np.ndarray, burn_in: int, n_batches: int = None) -> Tuple[float, float]:
    """Sample variance after burn-in and the 95% batch-means half width.

    For vector signals the variance is the trace of the sample covariance.
    """
    n_batches = n_batches or config.MIN_BATCHES
    values = np.asarray(trace, dtype=float)
    values = values.reshape(values.shape[0], -1)
    if values.shape[0] <= burn_in + n_batches:
        raise InsufficientDataError(f"need more than {burn_in + n_batches} samples, got {values.shape[0]}")
    tail = values[burn_in:]
    energy = np.sum((tail - tail.mean(axis=0)) ** 2, axis=1)
    size = energy.size // n_batches
    batches = energy[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    half = stats.t.ppf(0.975, n_batches - 1) * batches.std(ddof=1) / np.sqrt(n_batches)
    return float(energy.mean()), float(half)


def _noise(cfg: SimConfig, seeds: SeedSet, n_w: int, n_x: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(seeds.noise))
    w = rng.standard_normal((cfg.horizon, n_w))
    x0 = cfg.x0_scale * rng.standard_normal(n_x) if cfg.x0_scale > 0 else np.zeros(n_x)
    return w, x0


def run_loop(
    cfg: SimConfig,
    seeds: Optional[SeedSet] = None,
    channel_factory: Optional[ChannelFactory] = None,
) -> Tuple[LoopTrace, DelayChannel]:
    """Simulate one realization step by step.

    At step k the encoder sees y (delayed by h under measurement placement),
    emits t, and the noisy r = t + e is sent through the channel. The decoder
    runs J on word k - h_max released by the reorder buffer; under actuation
    placement its output passes an h-step line before reaching the plant.
    The dither is indexed by emission time.
    """
    seeds = seeds or cfg.seeds
    real = realize_plant(cfg.plant)
    enc = scheme_encoder(cfg.scheme)
    dec = minimal_realization(to_state_space(cfg.scheme.J))
    n_w, n_z = cfg.plant.n_w, cfg.plant.n_z
    horizon, delta = cfg.horizon, cfg.delta

    h = cfg.delays.h_max
    if cfg.placement == Placement.CHANNEL:
        spec, line_y, line_u = cfg.delays, 0, 0
    else:
        spec = DelaySpec.constant(0)
        line_y = h if cfg.placement == Placement.MEASUREMENT else 0
        line_u = h if cfg.placement == Placement.ACTUATION else 0
    channel = (channel_factory or DelayChannel)(spec, horizon)
    buffer = ReorderBuffer(spec.h_max)

    w, x = _noise(cfg, seeds, n_w, real.n_states)
    if cfg.noise_model == NoiseModel.ECDQ:
        dither = DitherStream(seeds.dither, delta).take(horizon)
        awgn = np.zeros(horizon)
    elif cfg.noise_model == NoiseModel.AWGN:
        dither = np.zeros(horizon)
        rng = np.random.Generator(np.random.Philox(seeds.dither))
        awgn = rng.normal(0.0, delta / np.sqrt(12.0), size=horizon)
    else:
        dither = np.zeros(horizon)
        awgn = np.zeros(horizon)

    xe = np.zeros(enc.n_states)
    xj = np.zeros(dec.n_states)
    fifo_y = deque([0.0] * line_y)
    fifo_u = deque([0.0] * line_u)
    A, B1, B2, C1, C2 = real.A, real.B1, real.B2, real.C1, real.C2
    D11, D12, D21 = real.D11, real.D12, real.D21
    Ae, Br_e, By_e, Ce, Dy_e = enc.A, enc.B[:, 0], enc.B[:, 1], enc.C[0], enc.D[0, 1]
    Aj, Bj, Cj, Dj = dec.A, dec.B[:, 0], dec.C[0], dec.D[0, 0]
    guard = config.DIVERGENCE_GUARD

    out_y = np.zeros(horizon)
    out_t = np.zeros(horizon)
    out_r = np.zeros(horizon)
    out_idx = np.zeros(horizon, dtype=np.int64)
    out_delivered = np.zeros(horizon, dtype=np.int64)
    out_u = np.zeros(horizon)
    out_z = np.zeros((horizon, n_z))

    for k in range(horizon):
        wk = w[k]
        y = float(C2[0] @ x + D21[0] @ wk)
        if line_y:
            fifo_y.append(y)
            y_enc = fifo_y.popleft()
        else:
            y_enc = y

        t = float(Ce @ xe + Dy_e * y_enc)
        if cfg.noise_model == NoiseModel.ECDQ:
            index = ecdq_encode(t, dither[k], delta)
            r = index * delta - dither[k]
            payload = index
        else:
            index = 0
            r = t + awgn[k]
            payload = r
        xe = Ae @ xe + Br_e * r + By_e * y_enc

        channel.transmit(k, payload)
        arrivals = channel.deliver(k)
        buffer.push(arrivals)
        word = buffer.pop(k)
        if word is None:
            received = 0.0
        elif cfg.noise_model == NoiseModel.ECDQ:
            received = word * delta - dither[k - buffer.h_max]
        else:
            received = word

        v = float(Cj @ xj + Dj * received)
        xj = Aj @ xj + Bj * received
        if line_u:
            fifo_u.append(v)
            u = fifo_u.popleft()
        else:
            u = v

        out_z[k] = C1 @ x + D11 @ wk + D12[:, 0] * u
        x = A @ x + B1 @ wk + B2[:, 0] * u

        norm = max(
            np.max(np.abs(x), initial=0.0),
            np.max(np.abs(xe), initial=0.0),
            np.max(np.abs(xj), initial=0.0),
            abs(u),
        )
        if not norm <= guard:
            raise DivergenceError(k, float(norm))

        out_y[k], out_t[k], out_r[k], out_idx[k], out_u[k] = y, t, r, index, u
        out_delivered[k] = len(arrivals)

    trace = LoopTrace(
        w=w,
        y=out_y,
        t=out_t,
        r=out_r,
        dither=dither,
        index=out_idx,
        delivered=out_delivered,
        u=out_u,
        z=out_z,
    )
    return trace, channel


def _realization(cfg: SimConfig, m: int, channel_factory: Optional[ChannelFactory] = None):
    seeds = cfg.seeds.derive(m)
    if cfg.delays.mode == DelayMode.RANDOM:
        delays = cfg.delays.model_copy(update={"seed": seeds.delay if m else cfg.delays.seed})
        cfg = cfg.model_copy(update={"delays": delays})
    trace, channel = run_loop(cfg, seeds, channel_factory)
    var, half = estimate_variance(trace.z, cfg.burn_in)
    report = None
    lengths = None
    if cfg.noise_model == NoiseModel.ECDQ:
        indices = trace.index[cfg.burn_in :]
        codebook = train_codebook(indices)
        report = rate_and_entropy(indices, codebook, var_z_hat=var, ci_halfwidth=half)
        if cfg.trace_path or cfg.record_trace:
            lengths = codeword_lengths(trace.index, codebook)
    result = RealizationResult(
        index=m,
        var_z_hat=var,
        ci_halfwidth=half,
        rate_bits=None if report is None else report.avg_len_bits,
        entropy_bits=None if report is None else report.empirical_entropy_bits,
        seeds=seeds,
        in_flight=channel.in_flight(),
    )
    return result, report, trace, lengths


def _manifest(cfg: SimConfig) -> dict:
    return {
        "noise_seed": str(cfg.seeds.noise),
        "dither_seed": str(cfg.seeds.dither),
        "delay_seed": str(cfg.delays.seed if cfg.delays.mode == DelayMode.RANDOM else cfg.seeds.delay),
        "prng": DitherStream.algorithm,
        "noise_model": cfg.noise_model.value,
        "placement": cfg.placement.value,
    }


def _single(cfg: SimConfig, channel_factory: Optional[ChannelFactory] = None) -> SimResult:
    result, report, trace, lengths = _realization(cfg, 0, channel_factory)
    if cfg.trace_path:
        trace.to_frame(lengths).to_csv(cfg.trace_path, index=False, lineterminator="\n")
    return SimResult(
        var_z_hat=result.var_z_hat,
        ci_halfwidth=result.ci_halfwidth,
        rate_report=report,
        realizations=[result],
        var_za_hat=result.var_z_hat,
        rate_a_hat=result.rate_bits,
        manifest=_manifest(cfg),
        trace=trace if cfg.record_trace else None,
    )


def simulate_constant(cfg: SimConfig, channel_factory: Optional[ChannelFactory] = None) -> SimResult:
    """Loop with a constant h-step delay in the channel"""
    if cfg.delays.mode != DelayMode.CONSTANT:
        raise ValueError("simulate_constant needs a constant delay spec")
    status(f"Simulating h={cfg.delays.h}, {cfg.horizon} steps", "run")
    return _single(cfg.model_copy(update={"placement": Placement.CHANNEL}), channel_factory)


def simulate_random(cfg: SimConfig, channel_factory: Optional[ChannelFactory] = None) -> SimResult:
    """Independent delay realizations with h_max reordering; results averaged with equal weight"""
    status(f"Simulating {cfg.realizations} delay realizations, h_max={cfg.delays.h_max}", "run")
    results = []
    first_report = None
    first_trace = None
    for m in range(cfg.realizations):
        result, report, trace, lengths = _realization(cfg, m, channel_factory)
        if m == 0:
            first_report, first_trace = report, trace
            if cfg.trace_path:
                trace.to_frame(lengths).to_csv(cfg.trace_path, index=False, lineterminator="\n")
        results.append(result)

    variances = np.array([r.var_z_hat for r in results])
    mean_var = float(variances.mean())
    if len(results) > 1:
        half = float(stats.t.ppf(0.975, len(results) - 1) * variances.std(ddof=1) / np.sqrt(len(results)))
    else:
        half = results[0].ci_halfwidth
    rates = [r.rate_bits for r in results if r.rate_bits is not None]
    return SimResult(
        var_z_hat=mean_var,
        ci_halfwidth=half,
        rate_report=first_report,
        realizations=results,
        var_za_hat=mean_var,
        rate_a_hat=float(np.mean(rates)) if rates else None,
        manifest=_manifest(cfg),
        trace=first_trace if cfg.record_trace else None,
    )


def placement_variant(cfg: SimConfig, channel_factory: Optional[ChannelFactory] = None) -> SimResult:
    """Constant-delay loop with the delay in the channel, before the encoder or after the decoder"""
    if cfg.delays.mode != DelayMode.CONSTANT:
        raise ValueError("placement variants need a constant delay spec")
    status(f"Simulating {cfg.placement.value} placement, h={cfg.delays.h}", "run")
    return _single(cfg, channel_factory)


def simulate_absorbed(cfg: SimConfig) -> SimResult:
    """The channel-placement loop with z^-h moved into the plant and an undelayed channel"""
    if cfg.delays.mode != DelayMode.CONSTANT:
        raise ValueError("absorbed simulation needs a constant delay spec")
    absorbed = cfg.model_copy(
        update={
            "plant": delay_augment(cfg.plant, cfg.delays.h),
            "delays": DelaySpec.constant(0),
            "placement": Placement.CHANNEL,
        }
    )
    return _single(absorbed)
