"""Erasure-channel simulators and the transmission/broadcast transcript.

Two channel models generate per-packet reception outcomes: independent
erasures with fixed per-receiver probabilities, and a 3x3 interference grid
in which one row and one column are noisy per time slot.  Both are
deterministic given their RNG, so any run can be replayed bit-for-bit.

The transcript records every transmission and reliable broadcast.  Reliable
broadcasts reach all terminals and, by assumption, the eavesdropper, and
their cost is charged to the efficiency denominator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

EVE = "eve"

# overhead accounting, in bits
FEEDBACK_BITS_PER_PACKET = 1   # reception bitmaps: one bit per packet index
PLAN_COUNT_BITS = 32           # per announced transmission count
SELECTION_INDEX_BITS = 32      # per authentication bit-selection index

GRID_PATTERNS = tuple((r, c) for r in range(3) for c in range(3))


@dataclass
class ReceptionRecord:
    """Outcome of one terminal transmitting `count` packets.

    `received` maps every receiver (terminal index or EVE) to the sorted
    array of packet indices it got.  The transmitter trivially knows its own
    packets and appears with the full index range.
    """
    transmitter: int
    count: int
    received: dict[Any, np.ndarray]

    def __post_init__(self):
        for who, idx in self.received.items():
            idx = np.asarray(idx, dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= self.count):
                raise ValueError(f"receiver {who!r} reports packets outside 0..{self.count - 1}")
            self.received[who] = np.unique(idx)
        self.received[self.transmitter] = np.arange(self.count, dtype=np.int64)

    def indices(self, who) -> np.ndarray:
        return self.received[who]

    def mask(self, who) -> np.ndarray:
        m = np.zeros(self.count, dtype=bool)
        m[self.received[who]] = True
        return m

    def to_jsonable(self) -> dict:
        return {
            "transmitter": self.transmitter,
            "count": self.count,
            "received": {str(k): v.tolist() for k, v in sorted(self.received.items(), key=lambda kv: str(kv[0]))},
        }


class IdealChannel:
    """Independent per-receiver packet erasures with known probabilities.

    `deltas[i]` is terminal i's erasure probability as a receiver; the entry
    for the current transmitter is ignored.  Erasure events are independent
    across receivers and packets.
    """

    kind = "ideal"

    def __init__(self, deltas, delta_eve: float, rng: np.random.Generator):
        self.deltas = [float(d) for d in deltas]
        self.delta_eve = float(delta_eve)
        for d in self.deltas + [self.delta_eve]:
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"erasure probability {d} outside [0, 1]")
        self.rng = rng

    @property
    def n_terminals(self) -> int:
        return len(self.deltas)

    def transmit(self, transmitter: int, count: int, transcript: Transcript | None = None) -> ReceptionRecord:
        if count < 1:
            raise ValueError("transmit at least one packet")
        received: dict[Any, np.ndarray] = {}
        for i, d in enumerate(self.deltas):
            if i == transmitter:
                continue
            received[i] = np.nonzero(self.rng.random(count) >= d)[0]
        received[EVE] = np.nonzero(self.rng.random(count) >= self.delta_eve)[0]
        record = ReceptionRecord(transmitter, count, received)
        if transcript is not None:
            transcript.transmit_packets(transmitter, count)
        return record


class GridChannel:
    """3x3 interference grid: per slot one row and one column are noisy.

    Nodes in the interfered row or column receive nothing, everyone else
    receives everything; each packet-receiver outcome then flips with
    probability `epsilon` to model imperfect conditioning.  Packets are
    spread round-robin over the pattern schedule so N divisible by the
    schedule length puts the same number of packets in every pattern.
    """

    kind = "grid"

    def __init__(self, cells: dict[Any, tuple[int, int]], epsilon: float,
                 rng: np.random.Generator, schedule=None):
        self.cells = {k: (int(r), int(c)) for k, (r, c) in cells.items()}
        for who, (r, c) in self.cells.items():
            if not (0 <= r < 3 and 0 <= c < 3):
                raise ValueError(f"node {who!r} outside the 3x3 grid")
        occupied = list(self.cells.values())
        if len(set(occupied)) != len(occupied):
            raise ValueError("at most one node per cell")
        if EVE not in self.cells:
            raise ValueError("grid placement must include the eavesdropper cell")
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon outside [0, 1]")
        self.epsilon = float(epsilon)
        self.schedule = tuple(schedule) if schedule is not None else GRID_PATTERNS
        self.rng = rng

    @property
    def n_terminals(self) -> int:
        return len(self.cells) - 1

    def nominal_outcome(self, who, slot: int) -> bool:
        """True when `who` receives everything in this slot's pattern."""
        row, col = self.schedule[slot % len(self.schedule)]
        r, c = self.cells[who]
        return r != row and c != col

    def transmit_slot(self, transmitter, slot: int, count: int,
                      transcript: Transcript | None = None) -> ReceptionRecord:
        received: dict[Any, np.ndarray] = {}
        for who in self.cells:
            if who == transmitter:
                continue
            nominal = self.nominal_outcome(who, slot)
            got = np.full(count, nominal, dtype=bool)
            if self.epsilon > 0.0:
                flips = self.rng.random(count) < self.epsilon
                got ^= flips
            received[who] = np.nonzero(got)[0]
        record = ReceptionRecord(transmitter if isinstance(transmitter, int) else transmitter,
                                 count, received)
        if transcript is not None:
            transcript.transmit_packets(transmitter, count)
        return record

    def transmit(self, transmitter, count: int, transcript: Transcript | None = None) -> ReceptionRecord:
        if count < 1:
            raise ValueError("transmit at least one packet")
        slots = np.arange(count) % len(self.schedule)
        received: dict[Any, list[np.ndarray]] = {who: [] for who in self.cells if who != transmitter}
        for slot in range(len(self.schedule)):
            idx = np.nonzero(slots == slot)[0]
            if idx.size == 0:
                continue
            part = self.transmit_slot(transmitter, slot, idx.size)
            for who, got in part.received.items():
                if who != transmitter:
                    received[who].append(idx[got])
        merged = {who: (np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64))
                  for who, parts in received.items()}
        record = ReceptionRecord(transmitter, count, merged)
        if transcript is not None:
            transcript.transmit_packets(transmitter, count)
        return record


class ManualChannel:
    """Replays prescribed reception records; used for worked-example replays."""

    kind = "manual"

    def __init__(self, records: list[ReceptionRecord]):
        self._queue = list(records)

    def transmit(self, transmitter, count: int, transcript: Transcript | None = None) -> ReceptionRecord:
        record = self._queue.pop(0)
        if record.transmitter != transmitter or record.count != count:
            raise ValueError("prescribed record does not match the requested transmission")
        if transcript is not None:
            transcript.transmit_packets(transmitter, count)
        return record


@dataclass
class Transcript:
    """Ordered log of every transmission and reliable broadcast.

    Reliable broadcasts are delivered to all terminals and are visible to
    the eavesdropper in order.  Efficiency denominators are derived from the
    packet and bit counters kept here.
    """

    packet_symbols: int          # payload length in field symbols
    symbol_bits: int             # field order s
    events: list[dict] = field(default_factory=list)
    source_packets: int = 0      # unreliable transmissions (packet count)
    broadcast_packets: int = 0   # reliably broadcast payload packets
    overhead_bits: int = 0       # feedback, coefficients, counts, tags
    eve_view: list[dict] = field(default_factory=list)

    @property
    def packet_bits(self) -> int:
        return self.packet_symbols * self.symbol_bits

    def transmit_packets(self, transmitter, count: int) -> None:
        self.events.append({"kind": "transmit", "transmitter": transmitter, "packets": int(count)})
        self.source_packets += int(count)

    def broadcast_payload(self, kind: str, count: int, **meta) -> None:
        event = {"kind": kind, "packets": int(count), "reliable": True, **meta}
        self.events.append(event)
        self.eve_view.append(event)
        self.broadcast_packets += int(count)

    def broadcast_overhead(self, kind: str, bits: int, **meta) -> None:
        event = {"kind": kind, "bits": int(bits), "reliable": True, **meta}
        self.events.append(event)
        self.eve_view.append(event)
        self.overhead_bits += int(bits)

    def total_payload_packets(self) -> int:
        return self.source_packets + self.broadcast_packets

    def total_bits(self) -> int:
        return self.total_payload_packets() * self.packet_bits + self.overhead_bits


def reliable_broadcast(transcript: Transcript, kind: str, payload_packets: int = 0,
                       overhead_bits: int = 0, **meta) -> None:
    """Deliver a message to all terminals; the eavesdropper sees it too."""
    if payload_packets:
        transcript.broadcast_payload(kind, payload_packets, **meta)
    if overhead_bits:
        transcript.broadcast_overhead(kind, overhead_bits, **meta)


def reception_csv_rows(record: ReceptionRecord) -> list[dict]:
    """One row per (packet, receiver): transmitter, index, receiver, flag."""
    rows = []
    for who in sorted(record.received, key=str):
        if who == record.transmitter:
            continue
        mask = record.mask(who)
        for index in range(record.count):
            rows.append({"transmitter": record.transmitter, "packet_index": index,
                         "receiver": who, "received_flag": int(mask[index])})
    return rows
