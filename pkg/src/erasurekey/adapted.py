"""Turn-taking secret agreement for channels with unknown eavesdropper
statistics.

Every terminal transmits a batch of source packets in turn.  The
transmitter estimates how much an eavesdropper overheard from how much its
own neighbors received in common during the same turn, mixes accordingly,
and reconciliation is distributed: the cooperative data-exchange solver
decides how many coded repair packets each terminal broadcasts so that
everyone recovers the full mixed set with the fewest transmissions.

Needs at least three terminals: with two, the transmitter has no terminal
pair left to base the overlap estimate on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from erasurekey import channel as chan
from erasurekey.basic import (ProtocolError, SecretBundle, SubsetBlock,
                              ZeroSecretError, build_mixing, partition_by_subset)
from erasurekey.exchange import ExchangeInstance, ExchangePlan, solve_exchange
from erasurekey.field import (GF, FieldSizeError, cauchy_from_labels,
                              extend_basis, get_field, solve_decode)


@dataclass
class AdaptedConfig:
    n: int                    # terminals, >= 3
    n_source: int             # packets per turn
    packet_symbols: int = 16
    field_order: int = 16
    alpha: float = 1.0        # fraction of the secret combinations emitted

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("the adapted protocol needs at least 3 terminals; "
                             "with 2 there is no terminal pair to estimate from")
        if self.n_source < 1:
            raise ValueError("need at least one source packet per turn")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.n_source > (1 << self.field_order):
            raise ValueError("n_source exceeds the field size; raise field_order")


@dataclass
class EstimateDetail:
    per_receiver_counts: dict[int, int]
    pair_overlaps: dict[tuple[int, int], int]
    per_receiver_delta: dict[int, float | None]
    delta_eve: float | None        # None when no receiver got anything


def estimate_eve_erasure(record: chan.ReceptionRecord, transmitter: int,
                         terminals) -> EstimateDetail:
    """Estimate the eavesdropper's erasure from same-turn pair overlaps.

    For each receiver i, the largest fraction of its packets also seen by
    some other receiver stands in for what an eavesdropper near i could
    have overheard; the final estimate takes the worst receiver.  Receivers
    that got nothing carry no information and are skipped; if nobody got
    anything the turn is inestimable.
    """
    receivers = [t for t in terminals if t != transmitter]
    counts = {i: int(record.indices(i).size) for i in receivers}
    masks = {i: record.mask(i) for i in receivers}
    overlaps: dict[tuple[int, int], int] = {}
    for a in receivers:
        for b in receivers:
            if a < b:
                overlaps[(a, b)] = int(np.count_nonzero(masks[a] & masks[b]))
    deltas: dict[int, float | None] = {}
    for i in receivers:
        if counts[i] == 0:
            deltas[i] = None
            continue
        best = 0
        for k in receivers:
            if k == i:
                continue
            best = max(best, overlaps[(min(i, k), max(i, k))])
        deltas[i] = best / counts[i]
    usable = [d for d in deltas.values() if d is not None]
    delta_eve = max(usable) if usable else None
    return EstimateDetail(counts, overlaps, deltas, delta_eve)


@dataclass
class TurnOutcome:
    transmitter: int
    reception: chan.ReceptionRecord
    estimate: EstimateDetail
    blocks: list[SubsetBlock]
    mixed_coeffs_local: np.ndarray       # rows over this turn's source packets
    mixed_payloads: np.ndarray | None
    mix_offset: int = 0                  # position in the global mixed space

    @property
    def mixed_count(self) -> int:
        return self.mixed_coeffs_local.shape[0]


@dataclass
class AdaptedRoundState:
    cfg: AdaptedConfig
    gf: GF
    transcript: chan.Transcript
    turns: list[TurnOutcome]
    mixed_coeffs: np.ndarray             # M x (n * n_source), global coordinates
    mixed_payloads: np.ndarray | None
    known_mixed: dict[int, np.ndarray]
    plan: ExchangePlan | None = None
    repair_coeffs: np.ndarray | None = None
    repair_payloads: np.ndarray | None = None
    extension_rows: np.ndarray | None = None   # full basis extension of the repair space
    secret: SecretBundle | None = None
    round_id: int = 0

    @property
    def mixed_count(self) -> int:
        return self.mixed_coeffs.shape[0]

    @property
    def source_dim(self) -> int:
        return self.cfg.n * self.cfg.n_source

    def eve_source_indices(self) -> np.ndarray:
        parts = [turn.reception.indices(chan.EVE) + j * self.cfg.n_source
                 for j, turn in enumerate(self.turns)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def repair_coeffs_source(self) -> np.ndarray:
        if self.repair_coeffs is None or self.repair_coeffs.shape[0] == 0:
            return np.zeros((0, self.source_dim), dtype=self.gf.dtype)
        return self.gf.matmul(self.repair_coeffs, self.mixed_coeffs)


def run_adapted_initial(cfg: AdaptedConfig, channel, rng: np.random.Generator,
                        transcript: chan.Transcript | None = None,
                        payloads: bool = True, round_id: int = 0) -> AdaptedRoundState:
    """All terminals take one transmission turn each and mix what landed."""
    gf = get_field(cfg.field_order)
    if transcript is None:
        transcript = chan.Transcript(packet_symbols=cfg.packet_symbols, symbol_bits=gf.s)

    turns: list[TurnOutcome] = []
    coeff_blocks: list[np.ndarray] = []
    payload_blocks: list[np.ndarray] = []
    known: dict[int, list[np.ndarray]] = {i: [] for i in range(cfg.n)}
    offset = 0
    for j in range(cfg.n):
        source = gf.random_matrix(cfg.n_source, cfg.packet_symbols, rng) if payloads else None
        reception = channel.transmit(j, cfg.n_source, transcript)
        for i in range(cfg.n):
            if i != j:
                chan.reliable_broadcast(transcript, "feedback",
                                        overhead_bits=cfg.n_source * chan.FEEDBACK_BITS_PER_PACKET,
                                        terminal=i, turn=j)
        estimate = estimate_eve_erasure(reception, j, range(cfg.n))
        if estimate.delta_eve is None or estimate.delta_eve == 0.0:
            blocks, local_coeffs, local_payloads, coeff_bits = [], np.zeros(
                (0, cfg.n_source), dtype=gf.dtype), (np.zeros((0, cfg.packet_symbols), dtype=gf.dtype)
                                                     if payloads else None), 0
        else:
            partition = partition_by_subset(reception, [t for t in range(cfg.n) if t != j])
            blocks, local_coeffs, local_payloads, coeff_bits = build_mixing(
                gf, partition, estimate.delta_eve, cfg.n_source, source)
        chan.reliable_broadcast(transcript, "mix-coefficients", overhead_bits=coeff_bits, turn=j)

        turn = TurnOutcome(j, reception, estimate, blocks, local_coeffs,
                           local_payloads, mix_offset=offset)
        turns.append(turn)
        if local_coeffs.shape[0]:
            coeff_blocks.append((j, local_coeffs))
            if payloads:
                payload_blocks.append(local_payloads)
        known[j].append(np.arange(offset, offset + turn.mixed_count, dtype=np.int64))
        for b in blocks:
            for i in b.members:
                known[i].append(np.arange(offset + b.mix_offset,
                                          offset + b.mix_offset + b.mix_count, dtype=np.int64))
        offset += turn.mixed_count

    dim = cfg.n * cfg.n_source
    mixed_coeffs = np.zeros((offset, dim), dtype=gf.dtype)
    row = 0
    for j, local in coeff_blocks:
        mixed_coeffs[row:row + local.shape[0], j * cfg.n_source:(j + 1) * cfg.n_source] = local
        row += local.shape[0]
    mixed_payloads = (np.vstack(payload_blocks) if payload_blocks else
                      np.zeros((0, cfg.packet_symbols), dtype=gf.dtype)) if payloads else None

    known_mixed = {i: (np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64))
                   for i, parts in known.items()}
    return AdaptedRoundState(cfg=cfg, gf=gf, transcript=transcript, turns=turns,
                             mixed_coeffs=mixed_coeffs, mixed_payloads=mixed_payloads,
                             known_mixed=known_mixed, round_id=round_id)


def run_adapted_reconciliation(state: AdaptedRoundState,
                               alpha: float | None = None) -> SecretBundle:
    """Distributed repair via the exchange solver, then secret extraction.

    Terminal 0 coordinates: it builds the exchange plan from the public
    feedback, and constructs the secret combinations once everyone holds
    the full mixed set.  alpha scales down how many secret combinations are
    actually emitted.
    """
    cfg = state.cfg
    gf = state.gf
    alpha = cfg.alpha if alpha is None else alpha
    m = state.mixed_count
    if m == 0:
        raise ZeroSecretError("zero secret size: no mixed packets were created")

    inst = ExchangeInstance(cfg.n, m, [frozenset(state.known_mixed[i].tolist())
                                       for i in range(cfg.n)])
    plan = solve_exchange(inst)
    state.plan = plan
    chan.reliable_broadcast(state.transcript, "exchange-plan",
                            overhead_bits=cfg.n * chan.PLAN_COUNT_BITS)

    total_repair = plan.total
    nominal_secret = m - total_repair
    if nominal_secret <= 0:
        raise ZeroSecretError("zero secret size: repair would expose every mixed packet")

    if m + total_repair > gf.q:
        raise FieldSizeError("not enough field elements for repair labels; raise field_order")
    repair = np.zeros((total_repair, m), dtype=gf.dtype)
    slot = 0
    for i in range(cfg.n):
        k = plan.counts[i]
        if k == 0:
            continue
        cols = state.known_mixed[i]
        labels = np.arange(m + slot, m + slot + k, dtype=np.int64)
        repair[slot:slot + k, cols] = cauchy_from_labels(gf, labels, cols)
        chan.reliable_broadcast(state.transcript, "repair", payload_packets=k,
                                overhead_bits=k * m * gf.s, terminal=i)
        slot += k
    state.repair_coeffs = repair

    compute_payloads = state.mixed_payloads is not None
    if compute_payloads:
        state.repair_payloads = gf.matmul(repair, state.mixed_payloads) if total_repair else \
            np.zeros((0, cfg.packet_symbols), dtype=gf.dtype)
        reference = None
        for i in range(cfg.n):
            mine = state.known_mixed[i]
            units = np.zeros((mine.size, m), dtype=gf.dtype)
            units[np.arange(mine.size), mine] = 1
            decoded = solve_decode(gf, units, repair, state.repair_payloads,
                                   state.mixed_payloads[mine])
            if reference is None:
                reference = decoded
            elif not np.array_equal(reference, decoded):
                raise ProtocolError("terminals decoded different mixed payloads")
        if not np.array_equal(reference, state.mixed_payloads):
            raise ProtocolError("decoded mixed payloads disagree with the originals")

    # the repair rows are public; secret combinations must extend their span
    rref, pivots = gf.row_reduce(repair)
    extension = extend_basis(gf, rref[:len(pivots)], m)
    state.extension_rows = extension
    if extension.shape[0] < nominal_secret:
        raise ProtocolError("repair span larger than the announced transmission count")

    emitted = math.floor(alpha * nominal_secret)
    if emitted < 1:
        raise ZeroSecretError("zero secret size: amplification removed every combination")
    secret_coeffs = extension[:emitted]
    chan.reliable_broadcast(state.transcript, "secret-coefficients",
                            overhead_bits=emitted * m * gf.s)

    payloads = (gf.matmul(secret_coeffs, state.mixed_payloads) if compute_payloads
                else np.zeros((emitted, cfg.packet_symbols), dtype=gf.dtype))
    coeffs_source = gf.matmul(secret_coeffs, state.mixed_coeffs)
    bundle = SecretBundle(round_id=state.round_id, payloads=payloads,
                          coeffs_mixed=secret_coeffs, coeffs_source=coeffs_source,
                          symbol_bits=gf.s)
    state.secret = bundle
    return bundle


def measured_efficiency(state: AdaptedRoundState) -> dict[str, float]:
    """Efficiency of a completed round in both accounting modes.

    payload_only counts the n*N source transmissions plus repair packet
    contents; full_cost charges everything in the transcript at bit
    granularity.  The identity variant prices the secret-coefficient
    broadcast at one packet-equivalent per combination and nothing else,
    the convention under which the round reduces to the closed counter
    form (M - K) / (n N + M - K).
    """
    if state.secret is None or state.plan is None:
        raise ProtocolError("round not reconciled yet")
    t = state.transcript
    emitted = state.secret.secret_packets
    n_source_total = state.cfg.n * state.cfg.n_source
    total_repair = state.plan.total
    nominal_secret = state.mixed_count - total_repair
    payload_packets = n_source_total + total_repair
    return {
        "payload_only": emitted / payload_packets if payload_packets else 0.0,
        "full_cost": state.secret.bit_length / t.total_bits() if t.total_bits() else 0.0,
        "identity": nominal_secret / (n_source_total + nominal_secret)
        if n_source_total + nominal_secret else 0.0,
    }


def efficiency_identity(mixed: int, repair_total: int, n: int, n_source: int) -> float:
    """Closed counter form of the round efficiency: (M - K) / (n N + M - K)."""
    secret = mixed - repair_total
    denom = n * n_source + secret
    return secret / denom if denom else 0.0
