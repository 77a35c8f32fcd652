"""
Bounded-delay channel: delay sampling, timestamped delivery and h_max reordering
"""
from collections import defaultdict
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..models.channel import ArrivalSet, DelayMode, DelaySpec
from ..utils.errors import ChannelProtocolError


def sample_delays(spec: DelaySpec, n: int) -> np.ndarray:
    """h(0), ..., h(n-1), i.i.d. from the support and reproducible from the seed"""
    if n < 1:
        raise ValueError("need at least one delay sample")
    if spec.mode == DelayMode.CONSTANT:
        return np.full(n, spec.h, dtype=np.int64)
    rng = np.random.Generator(np.random.Philox(spec.seed))
    return rng.choice(np.asarray(spec.delays, dtype=np.int64), size=n, p=spec.probabilities)


class DelayChannel:
    """Error-free channel delivering the word emitted at i at time i + h(i).

    ``transmit(k)`` and ``deliver(k)`` must be called once per step, in order,
    with ``transmit(k)`` first.
    """

    def __init__(
        self,
        spec: DelaySpec,
        horizon: int,
        record_trace: bool = False,
        delays: Optional[Sequence[int]] = None,
    ):
        self.spec = spec
        self.horizon = horizon
        if delays is None:
            self.delays = sample_delays(spec, horizon)
        else:
            self.delays = np.asarray(delays, dtype=np.int64)
            if self.delays.shape != (horizon,) or np.any(self.delays < 0) or np.any(self.delays > spec.h_max):
                raise ValueError(f"need {horizon} delays in [0, {spec.h_max}]")
        self.record_trace = record_trace
        self._pending: Dict[int, List[Tuple[int, Any]]] = defaultdict(list)
        self._next_emit = 0
        self._next_deliver = 0
        self._emitted = 0
        self._delivered = 0
        self._bits: Dict[int, Optional[int]] = {}
        self._trace: List[Dict[str, Any]] = []

    @property
    def h_max(self) -> int:
        return self.spec.h_max

    def delay_of(self, k: int) -> int:
        """Delay of the word emitted at k, known to the encoder at emission"""
        return int(self.delays[k])

    def transmit(self, k: int, word: Any, bits: Optional[int] = None) -> None:
        if k != self._next_emit:
            raise ChannelProtocolError(f"transmit({k}) called, expected transmit({self._next_emit})")
        if k >= self.horizon:
            raise ChannelProtocolError(f"transmit({k}) beyond the channel horizon {self.horizon}")
        self._pending[k + int(self.delays[k])].append((k, word))
        self._next_emit += 1
        self._emitted += 1
        if self.record_trace:
            self._bits[k] = bits

    def deliver(self, k: int) -> ArrivalSet:
        if k != self._next_deliver or k >= self._next_emit:
            raise ChannelProtocolError(f"deliver({k}) out of order")
        members = sorted(self._pending.pop(k, []), key=lambda item: item[0])
        self._next_deliver += 1
        self._delivered += len(members)
        if self.record_trace:
            self._trace.append(
                {
                    "k": k,
                    "emitted_word_len_bits": self._bits.pop(k, None),
                    "h": int(self.delays[k]),
                    "delivered_indices": " ".join(str(i) for i, _ in members),
                }
            )
        return ArrivalSet.model_construct(k=k, members=members)

    def in_flight(self) -> int:
        return sum(len(words) for words in self._pending.values())

    @property
    def emitted(self) -> int:
        return self._emitted

    @property
    def delivered(self) -> int:
        return self._delivered

    def write_trace(self, path: str) -> None:
        """CSV with columns k, emitted_word_len_bits, h, delivered_indices"""
        frame = pd.DataFrame(self._trace, columns=["k", "emitted_word_len_bits", "h", "delivered_indices"])
        frame.to_csv(path, index=False, lineterminator="\n")


class ConstantDelayLine(DelayChannel):
    """The single-atom case: every word arrives exactly h steps later"""

    def __init__(self, h: int, horizon: int, record_trace: bool = False):
        super().__init__(DelaySpec.constant(h), horizon, record_trace)


class ReorderBuffer:
    """Holds arrivals and releases word k - h_max at time k"""

    def __init__(self, h_max: int):
        if h_max < 0:
            raise ValueError("h_max must be nonnegative")
        self.h_max = h_max
        self._store: Dict[int, Any] = {}

    def push(self, arrivals: ArrivalSet) -> None:
        for emit_index, payload in arrivals.members:
            self._store[emit_index] = payload

    def pop(self, k: int) -> Optional[Any]:
        """Word emitted at k - h_max, or None before the first release"""
        target = k - self.h_max
        if target < 0:
            return None
        if target not in self._store:
            raise ChannelProtocolError(f"word {target} missing at time {k}; delay exceeded h_max")
        return self._store.pop(target)

    def __len__(self) -> int:
        return len(self._store)


def buffered_reorder(stream: Iterable[ArrivalSet], h_max: int) -> Iterator[Tuple[int, Optional[Any]]]:
    """(k, word emitted at k - h_max) for every arrival set; None while k < h_max"""
    buffer = ReorderBuffer(h_max)
    for arrivals in stream:
        buffer.push(arrivals)
        yield arrivals.k, buffer.pop(arrivals.k)
