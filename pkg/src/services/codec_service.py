"""
Entropy-coded dithered quantization: uniform quantizer, shared dither, Huffman coding
"""
import heapq
import itertools
import math
import struct
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..models.codec import ESCAPE_PAYLOAD_BITS, Codebook, Dither, DitherLawReport, RateReport
from ..utils.errors import CodecError

INDEX_LIMIT = 2**31


def quantize_uniform(x: float, delta: float) -> Tuple[int, float]:
    """Nearest multiple of delta, ties to even index"""
    if delta <= 0:
        raise CodecError("quantizer step must be positive")
    if not math.isfinite(x):
        raise CodecError(f"cannot quantize non-finite value {x}")
    index = int(np.rint(x / delta))
    if abs(index) >= INDEX_LIMIT:
        raise CodecError(f"quantization index {index} outside the 32-bit alphabet")
    return index, index * delta


def ecdq_encode(t_k: float, d_k: float, delta: float) -> int:
    return quantize_uniform(t_k + d_k, delta)[0]


def ecdq_decode(index: int, d_km_h: float, delta: float) -> float:
    return index * delta - d_km_h


class DitherStream:
    """Reproducible dither sequence d(0), d(1), ... from a Philox generator.

    Encoder and decoder build their own stream from the same seed and see
    bit-identical samples.
    """

    algorithm = "Philox4x64-10"

    def __init__(self, seed: int, delta: float):
        self.spec = Dither(seed=seed, delta=delta, algorithm=self.algorithm)
        self._rng = np.random.Generator(np.random.Philox(seed))

    @property
    def delta(self) -> float:
        return self.spec.delta

    def take(self, n: int) -> np.ndarray:
        half = self.spec.delta / 2.0
        return self._rng.uniform(-half, half, size=n)


# Huffman coding


def huffman_build(frequencies: Mapping[int, int], escape_count: int = 0) -> Codebook:
    """Optimal prefix-free code for the given symbol counts.

    Equal weights merge the subtree holding the lower index first; the escape
    word, when requested, ranks after every index.
    """
    weights: Dict[object, int] = {int(s): int(c) for s, c in frequencies.items() if c > 0}
    escape_key = "escape"
    if escape_count > 0:
        weights[escape_key] = int(escape_count)
    if not weights:
        raise CodecError("cannot build a code from an empty frequency table")

    def rank(symbol) -> float:
        return math.inf if symbol == escape_key else symbol

    if len(weights) == 1:
        codes = {next(iter(weights)): "0"}
    else:
        counter = itertools.count()
        heap = [(w, rank(s), next(counter), s) for s, w in weights.items()]
        heapq.heapify(heap)
        while len(heap) > 1:
            w_left, r_left, _, left = heapq.heappop(heap)
            w_right, r_right, _, right = heapq.heappop(heap)
            heapq.heappush(heap, (w_left + w_right, min(r_left, r_right), next(counter), (left, right)))
        codes = {}
        _store_codes(heap[0][3], "", codes)

    escape = codes.pop(escape_key, None)
    return Codebook(codes=codes, escape=escape)


def _store_codes(node, code: str, codes: Dict[object, str]) -> None:
    if isinstance(node, tuple):
        _store_codes(node[0], code + "0", codes)
        _store_codes(node[1], code + "1", codes)
    else:
        codes[node] = code


def train_codebook(indices: Sequence[int]) -> Codebook:
    """First pass of two-pass coding: counts of the stream plus an escape word"""
    symbols, counts = np.unique(np.asarray(indices, dtype=np.int64), return_counts=True)
    return huffman_build(dict(zip(symbols.tolist(), counts.tolist())), escape_count=1)


def kraft_sum(codebook: Codebook) -> float:
    return float(sum(2.0 ** -len(word) for word in codebook.words()))


def codeword_lengths(indices: Sequence[int], codebook: Codebook) -> np.ndarray:
    """Bits spent on every sample, escape payloads included"""
    indices = np.asarray(indices, dtype=np.int64)
    symbols, inverse = np.unique(indices, return_inverse=True)
    try:
        lengths = np.array([codebook.length(int(s)) for s in symbols], dtype=np.int64)
    except KeyError as exc:
        raise CodecError(f"symbol {exc.args[0]} not in codebook and no escape word") from exc
    return lengths[inverse]


def empirical_entropy(indices: Sequence[int]) -> float:
    """Plug-in entropy in bits"""
    _, counts = np.unique(np.asarray(indices, dtype=np.int64), return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def rate_and_entropy(
    indices: Sequence[int],
    codebook: Codebook,
    var_z_hat: float = 0.0,
    ci_halfwidth: float = 0.0,
) -> RateReport:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise CodecError("rate of an empty stream is undefined")
    known = np.fromiter(codebook.codes, dtype=np.int64, count=len(codebook.codes))
    escape_count = int(np.sum(~np.isin(indices, known)))
    return RateReport(
        avg_len_bits=float(np.mean(codeword_lengths(indices, codebook))),
        empirical_entropy_bits=max(0.0, empirical_entropy(indices)),
        sample_count=int(indices.size),
        var_z_hat=var_z_hat,
        ci_halfwidth=ci_halfwidth,
        escape_count=escape_count,
    )


# Bitstream


def encode_bitstream(indices: Iterable[int], codebook: Codebook) -> bytes:
    """32-bit big-endian symbol count, then MSB-first codewords.

    Symbols without a codeword are sent as the escape word followed by the
    index in 32-bit two's complement.
    """
    parts: List[str] = []
    count = 0
    for index in indices:
        index = int(index)
        count += 1
        code = codebook.codes.get(index)
        if code is not None:
            parts.append(code)
            continue
        if codebook.escape is None:
            raise CodecError(f"symbol {index} not in codebook and no escape word")
        if abs(index) >= INDEX_LIMIT:
            raise CodecError(f"index {index} does not fit the escape payload")
        parts.append(codebook.escape + format(index & 0xFFFFFFFF, f"0{ESCAPE_PAYLOAD_BITS}b"))
    bits = "".join(parts)
    payload = np.packbits(np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")).tobytes() if bits else b""
    return struct.pack(">I", count) + payload


def decode_bitstream(data: bytes, codebook: Codebook) -> List[int]:
    if len(data) < 4:
        raise CodecError("bitstream shorter than its header")
    (count,) = struct.unpack(">I", data[:4])
    bits = np.unpackbits(np.frombuffer(data[4:], dtype=np.uint8))
    lookup = {code: symbol for symbol, code in codebook.codes.items()}
    longest = max((len(w) for w in codebook.words()), default=0)
    out: List[int] = []
    pos = 0
    while len(out) < count:
        word = ""
        while True:
            if pos >= bits.size or len(word) >= longest:
                raise CodecError(f"malformed bitstream at symbol {len(out)}")
            word += "1" if bits[pos] else "0"
            pos += 1
            if word in lookup:
                out.append(lookup[word])
                break
            if word == codebook.escape:
                if pos + ESCAPE_PAYLOAD_BITS > bits.size:
                    raise CodecError("truncated escape payload")
                raw = int("".join("1" if b else "0" for b in bits[pos : pos + ESCAPE_PAYLOAD_BITS]), 2)
                pos += ESCAPE_PAYLOAD_BITS
                out.append(raw - (1 << 32) if raw >= 1 << 31 else raw)
                break
    return out


# Error law


def dither_law_check(
    error: Sequence[float],
    delta: float,
    w: Optional[np.ndarray] = None,
    max_lag: int = 20,
    significance: float = 0.01,
) -> DitherLawReport:
    """KS test against Uniform(-delta/2, delta/2) plus whiteness and independence bounds"""
    e = np.asarray(error, dtype=float)
    n = e.size
    if n <= max_lag + 1:
        raise CodecError("not enough samples for the error-law check")
    ks = stats.kstest(e, "uniform", args=(-delta / 2.0, delta))
    centred = e - e.mean()
    energy = float(centred @ centred)
    autocorr = [abs(float(centred[lag:] @ centred[:-lag])) / energy for lag in range(1, max_lag + 1)]

    crosscorr = None
    if w is not None:
        w = np.asarray(w, dtype=float).reshape(n, -1)
        crosscorr = max(abs(float(np.corrcoef(e, w[:, j])[0, 1])) for j in range(w.shape[1]))
    return DitherLawReport(
        sample_count=n,
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        max_autocorr=max(autocorr),
        max_crosscorr=crosscorr,
        bound=4.0 / math.sqrt(n),
        significance=significance,
    )
