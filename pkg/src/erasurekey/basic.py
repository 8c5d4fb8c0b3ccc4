"""The two-phase broadcast secret-agreement protocol with a known
eavesdropper erasure probability.

Initial phase: terminal 0 (Alice) transmits N random source packets, the
other terminals feed back what they received, and Alice mixes the covered
packets into per-subset MDS combinations sized so that the eavesdropper is
expected to miss at least as many packets per subset as combinations built
from it.  Reconciliation: publicly broadcast repair combinations let every
terminal recover the full mixed set, and the final secret packets are a
basis extension of the public repair coefficients, so the broadcasts reveal
nothing about them.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from erasurekey import channel as chan
from erasurekey.field import (GF, cauchy_matrix, extend_basis, get_field,
                              mds_generator, solve_decode)

ALICE = 0


class ZeroSecretError(RuntimeError):
    """Some terminal shares no secret packets with Alice; the round aborts."""


class ProtocolError(RuntimeError):
    """Internal protocol invariant violated (construction bug)."""


@dataclass
class BasicConfig:
    n: int                    # terminals, >= 2
    n_source: int             # packets Alice transmits per round
    delta_eve: float          # assumed eavesdropper erasure probability
    packet_symbols: int = 16  # payload length in field symbols
    field_order: int = 8      # s

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 terminals")
        if self.n_source < 1:
            raise ValueError("need at least one source packet")
        if not 0.0 < self.delta_eve < 1.0:
            raise ValueError("delta_eve must lie strictly inside (0, 1)")
        if self.packet_symbols < 1:
            raise ValueError("packets need at least one symbol")
        if self.n_source > (1 << self.field_order):
            raise ValueError(
                f"N={self.n_source} exceeds the field size 2^{self.field_order}; "
                "raise field_order so the MDS construction exists")


@dataclass
class SubsetBlock:
    """Source packets received by exactly one subset of terminals."""
    members: tuple[int, ...]
    source_indices: np.ndarray
    mix_count: int
    mix_offset: int = 0


@dataclass
class SecretBundle:
    round_id: int
    payloads: np.ndarray          # L x packet_symbols
    coeffs_mixed: np.ndarray      # rows over the active mixed space
    coeffs_source: np.ndarray     # same rows in global source coordinates
    symbol_bits: int

    @property
    def secret_packets(self) -> int:
        return self.payloads.shape[0]

    @property
    def bit_length(self) -> int:
        return self.payloads.shape[0] * self.payloads.shape[1] * self.symbol_bits

    def payload_bytes(self) -> bytes:
        if self.symbol_bits == 16:
            return self.payloads.astype("<u2").tobytes()
        return self.payloads.astype(np.uint8).tobytes()

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.payload_bytes()).hexdigest()


@dataclass
class RoundState:
    cfg: BasicConfig
    gf: GF
    reception: chan.ReceptionRecord
    transcript: chan.Transcript
    blocks: list[SubsetBlock]
    mixed_coeffs: np.ndarray                 # M x N, global source coordinates
    known_mixed: dict[int, np.ndarray]       # terminal -> mixed indices it can rebuild
    source_payloads: np.ndarray | None = None
    mixed_payloads: np.ndarray | None = None
    active_mixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    excluded: set = field(default_factory=set)
    repair_coeffs: np.ndarray | None = None  # over the active mixed space
    repair_payloads: np.ndarray | None = None
    secret: SecretBundle | None = None
    round_id: int = 0

    @property
    def mixed_count(self) -> int:
        return self.mixed_coeffs.shape[0]

    @property
    def terminals(self) -> list[int]:
        return [i for i in range(self.cfg.n) if i not in self.excluded]

    def mixed_counts_active(self) -> dict[int, int]:
        active = set(self.active_mixed.tolist())
        counts = {}
        for i in self.terminals:
            if i == ALICE:
                counts[i] = len(active)
            else:
                counts[i] = len(active.intersection(self.known_mixed[i].tolist()))
        return counts

    def min_shared(self) -> int:
        counts = self.mixed_counts_active()
        return min((v for k, v in counts.items() if k != ALICE), default=0)

    def discard_terminal(self, terminal: int) -> None:
        """Drop a terminal and every mixed packet it could reconstruct."""
        if terminal == ALICE:
            raise ValueError("cannot exclude the coordinating terminal")
        self.excluded.add(terminal)
        gone = set(self.known_mixed[terminal].tolist())
        keep = np.asarray([m for m in self.active_mixed.tolist() if m not in gone], dtype=np.int64)
        self.active_mixed = keep


def partition_by_subset(reception: chan.ReceptionRecord, terminals) -> dict[tuple[int, ...], np.ndarray]:
    """Group source indices by the exact subset of terminals that got them.

    Only subsets actually realized appear (at most N of them), never the
    empty one; iteration order is deterministic.
    """
    terminals = [t for t in terminals]
    masks = np.zeros(reception.count, dtype=np.int64)
    for bit, t in enumerate(terminals):
        masks[reception.indices(t)] |= 1 << bit
    out: dict[tuple[int, ...], np.ndarray] = {}
    for key in np.unique(masks):
        if key == 0:
            continue
        members = tuple(terminals[b] for b in range(len(terminals)) if key >> b & 1)
        out[members] = np.nonzero(masks == key)[0]
    return dict(sorted(out.items()))


def mix_counts_for_partition(partition: dict, delta_eve: float) -> dict[tuple[int, ...], int]:
    """Combinations per subset block: floor of delta_eve times the block size."""
    return {members: math.floor(delta_eve * idx.size) for members, idx in partition.items()}


def build_mixing(gf: GF, partition: dict, delta_eve: float, n_source: int,
                 source_payloads: np.ndarray | None):
    """Per-subset MDS mixing of the covered source packets.

    Returns (blocks, coeffs, payloads, coefficient_bits); blocks whose floor
    count is zero are skipped.
    """
    counts = mix_counts_for_partition(partition, delta_eve)
    blocks: list[SubsetBlock] = []
    rows = []
    payload_rows = []
    coeff_bits = 0
    offset = 0
    for members, idx in partition.items():
        k = counts[members]
        if k == 0:
            continue
        gen = mds_generator(gf, idx.size, k)
        block_rows = np.zeros((k, n_source), dtype=gf.dtype)
        block_rows[:, idx] = gen
        rows.append(block_rows)
        if source_payloads is not None:
            payload_rows.append(gf.matmul(gen, source_payloads[idx]))
        coeff_bits += k * idx.size * gf.s
        blocks.append(SubsetBlock(members, idx, k, offset))
        offset += k
    coeffs = np.vstack(rows) if rows else np.zeros((0, n_source), dtype=gf.dtype)
    payloads = None
    if source_payloads is not None:
        payloads = np.vstack(payload_rows) if payload_rows else np.zeros(
            (0, source_payloads.shape[1]), dtype=gf.dtype)
    return blocks, coeffs, payloads, coeff_bits


def run_initial_phase(cfg: BasicConfig, channel, rng: np.random.Generator,
                      transcript: chan.Transcript | None = None,
                      payloads: bool = True, round_id: int = 0) -> RoundState:
    """Transmit, collect feedback, and build the mixed packets.

    Raises ZeroSecretError when some terminal shares no mixed packets with
    Alice, since no common secret can come out of such a round.
    """
    gf = get_field(cfg.field_order)
    if transcript is None:
        transcript = chan.Transcript(packet_symbols=cfg.packet_symbols, symbol_bits=gf.s)
    source_payloads = gf.random_matrix(cfg.n_source, cfg.packet_symbols, rng) if payloads else None

    reception = channel.transmit(ALICE, cfg.n_source, transcript)
    for i in range(1, cfg.n):
        chan.reliable_broadcast(transcript, "feedback",
                                overhead_bits=cfg.n_source * chan.FEEDBACK_BITS_PER_PACKET,
                                terminal=i)

    partition = partition_by_subset(reception, range(1, cfg.n))
    blocks, mixed_coeffs, mixed_payloads, coeff_bits = build_mixing(
        gf, partition, cfg.delta_eve, cfg.n_source, source_payloads)
    chan.reliable_broadcast(transcript, "mix-coefficients", overhead_bits=coeff_bits)

    known: dict[int, np.ndarray] = {ALICE: np.arange(mixed_coeffs.shape[0], dtype=np.int64)}
    for i in range(1, cfg.n):
        mine = [np.arange(b.mix_offset, b.mix_offset + b.mix_count, dtype=np.int64)
                for b in blocks if i in b.members]
        known[i] = np.concatenate(mine) if mine else np.zeros(0, dtype=np.int64)

    state = RoundState(cfg=cfg, gf=gf, reception=reception, transcript=transcript,
                       blocks=blocks, mixed_coeffs=mixed_coeffs, known_mixed=known,
                       source_payloads=source_payloads, mixed_payloads=mixed_payloads,
                       active_mixed=np.arange(mixed_coeffs.shape[0], dtype=np.int64),
                       round_id=round_id)
    if state.min_shared() == 0:
        raise ZeroSecretError("zero secret size: a terminal shares no mixed packets with Alice")
    return state


def run_reconciliation(state: RoundState) -> SecretBundle:
    """Broadcast repair combinations, decode everywhere, and emit the secret.

    With two terminals there is nothing to reconcile and the secret is the
    mixed packets themselves.
    """
    gf = state.gf
    cfg = state.cfg
    active = state.active_mixed
    m_active = active.size
    n_secret = state.min_shared()
    if n_secret < 1:
        raise ZeroSecretError("zero secret size: nothing left to share after exclusions")
    n_repair = m_active - n_secret

    repair_coeffs = (cauchy_matrix(gf, n_repair, m_active) if n_repair
                     else np.zeros((0, m_active), dtype=gf.dtype))
    state.repair_coeffs = repair_coeffs

    compute_payloads = state.mixed_payloads is not None
    active_payloads = state.mixed_payloads[active] if compute_payloads else None
    if n_repair:
        if compute_payloads:
            state.repair_payloads = gf.matmul(repair_coeffs, active_payloads)
        chan.reliable_broadcast(state.transcript, "repair", payload_packets=n_repair,
                                overhead_bits=n_repair * m_active * gf.s)

    # every terminal recovers the full active mixed set
    if compute_payloads:
        reference = None
        for i in state.terminals:
            if i == ALICE:
                continue
            mine = state.known_mixed[i]
            local = np.nonzero(np.isin(active, mine))[0]
            unit = np.zeros((local.size, m_active), dtype=gf.dtype)
            unit[np.arange(local.size), local] = 1
            decoded = solve_decode(gf, unit, repair_coeffs,
                                   state.repair_payloads if n_repair else np.zeros((0, cfg.packet_symbols), dtype=gf.dtype),
                                   active_payloads[local])
            if reference is None:
                reference = decoded
            elif not np.array_equal(reference, decoded):
                raise ProtocolError("terminals decoded different mixed payloads")
            if not np.array_equal(decoded, active_payloads):
                raise ProtocolError("decoded mixed payloads disagree with the originals")

    secret_coeffs = extend_basis(gf, repair_coeffs, m_active)
    chan.reliable_broadcast(state.transcript, "secret-coefficients",
                            overhead_bits=secret_coeffs.shape[0] * m_active * gf.s)
    if secret_coeffs.shape[0] != n_secret:
        raise ProtocolError("basis extension produced a wrong secret size")

    payloads = (gf.matmul(secret_coeffs, active_payloads) if compute_payloads
                else np.zeros((n_secret, cfg.packet_symbols), dtype=gf.dtype))
    coeffs_source = gf.matmul(secret_coeffs, state.mixed_coeffs[active])
    bundle = SecretBundle(round_id=state.round_id, payloads=payloads,
                          coeffs_mixed=secret_coeffs, coeffs_source=coeffs_source,
                          symbol_bits=gf.s)
    state.secret = bundle
    return bundle


def repair_coeffs_source(state: RoundState) -> np.ndarray:
    """Public repair rows expressed in global source coordinates."""
    if state.repair_coeffs is None or state.repair_coeffs.shape[0] == 0:
        return np.zeros((0, state.cfg.n_source), dtype=state.gf.dtype)
    return state.gf.matmul(state.repair_coeffs, state.mixed_coeffs[state.active_mixed])


def counters_round(cfg: BasicConfig, channel) -> dict:
    """Counter-level round: reception statistics without payload matrices.

    The packet counts fully determine secret size and efficiency, so large
    Monte-Carlo sweeps use this path.
    """
    reception = channel.transmit(ALICE, cfg.n_source, None)
    partition = partition_by_subset(reception, range(1, cfg.n))
    counts = mix_counts_for_partition(partition, cfg.delta_eve)
    mixed = sum(counts.values())
    per_terminal = {i: 0 for i in range(1, cfg.n)}
    for members, k in counts.items():
        for t in members:
            per_terminal[t] += k
    secret = min(per_terminal.values()) if per_terminal else 0
    repair = mixed - secret
    coverage = sum(idx.size for idx in partition.values())
    eff = secret / (cfg.n_source + repair) if secret else 0.0
    return {
        "n_source": cfg.n_source,
        "coverage": coverage,
        "source_per_terminal": {i: int(reception.indices(i).size) for i in range(1, cfg.n)},
        "eve_source": int(reception.indices(chan.EVE).size),
        "mixed_packets": mixed,
        "mixed_per_terminal": per_terminal,
        "secret_packets": secret,
        "repair_packets": repair,
        "efficiency_payload": eff,
    }


def efficiency_measured(state: RoundState) -> dict[str, float]:
    """Measured efficiency of a completed round, in both accounting modes.

    payload_only counts source and repair packets, matching the closed-form
    analysis; full_cost also charges feedback, coefficient broadcasts, and
    any tags at their encoded bit size.
    """
    if state.secret is None:
        raise ProtocolError("round not reconciled yet")
    secret_bits = state.secret.bit_length
    t = state.transcript
    payload_packets = t.total_payload_packets()
    return {
        "payload_only": state.secret.secret_packets / payload_packets if payload_packets else 0.0,
        "full_cost": secret_bits / t.total_bits() if t.total_bits() else 0.0,
    }


# ----------------------------------------------------------------------
# closed-form efficiency
# ----------------------------------------------------------------------

def efficiency_formula(n: int, deltas, delta_eve: float) -> float:
    """Asymptotic efficiency of this protocol for given receiver erasures."""
    deltas = [float(d) for d in deltas]
    if len(deltas) != n - 1:
        raise ValueError("expected one erasure probability per non-Alice terminal")
    worst = max(deltas)
    joint = math.prod(deltas)
    return delta_eve * (1.0 - worst) / (1.0 + delta_eve * (worst - joint))


def alt_efficiency_formula(n: int, deltas, delta_eve: float) -> float:
    """Efficiency of the pairwise alternative: agree per terminal, then relay."""
    if n < 2:
        raise ValueError("need at least 2 terminals")
    worst = max(float(d) for d in deltas)
    num = delta_eve * (1.0 - worst)
    return num / (1.0 + (n - 2) * num)


def maurer_bound(delta_1: float, delta_eve: float) -> float:
    """Two-terminal upper bound on efficiency: delta_E * (1 - delta_1)."""
    return delta_eve * (1.0 - delta_1)
