"""Unconditionally secure message authentication and the key ledger.

The tag for a w-bit message m under key (a, b) is a*m + b in GF(2^w), the
canonical one-time polynomial MAC: a forger ignorant of the key passes with
probability exactly 2^-w.  The shared key sigma is split into the (a, b)
pair, used for the authenticators of a single round, and refreshed from
each completed round's secret.

Pairwise authentication binds identity to possession of sigma plus the
reconstructed mixed packets: each side derives its message bits from the
packets the checked terminal reconstructed, so agreement also confirms both
parties hold the same reconstruction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from erasurekey.field import get_field
from erasurekey.channel import SELECTION_INDEX_BITS, Transcript, reliable_broadcast

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuthKey:
    """Shared secret sigma, read as the (a, b) pair of GF(2^w) elements."""
    sigma: int
    sigma_bits: int

    def __post_init__(self):
        if self.sigma_bits % 2:
            raise ValueError("sigma must have an even number of bits")
        if self.sigma < 0 or self.sigma >> self.sigma_bits:
            raise ValueError("sigma wider than its declared bit length")

    @property
    def tag_bits(self) -> int:
        return self.sigma_bits // 2

    @property
    def scale(self) -> int:   # a
        return self.sigma >> self.tag_bits

    @property
    def offset(self) -> int:  # b
        return self.sigma & ((1 << self.tag_bits) - 1)


def auth(message: int, key: AuthKey) -> int:
    """Tag = a * message + b over GF(2^w); deterministic in its inputs."""
    w = key.tag_bits
    if message < 0 or message >> w:
        raise ValueError(f"message must be exactly {w} bits")
    gf = get_field(w)
    return int(gf.mul(key.scale, message)) ^ key.offset


def packet_bits(payload_row: np.ndarray, symbol_bits: int, start: int, count: int) -> int:
    """`count` bits of a packet starting at bit `start`, MSB-first per symbol."""
    total = payload_row.size * symbol_bits
    if start + count > total:
        raise ValueError(f"packet holds {total} bits, cannot take {start}+{count}")
    value = 0
    for sym in payload_row.tolist():
        value = (value << symbol_bits) | int(sym)
    return (value >> (total - start - count)) & ((1 << count) - 1)


def selection_message(known_indices: np.ndarray, payload_lookup, symbol_bits: int,
                      tag_bits: int, slot: int) -> tuple[int, int]:
    """Message bits for one authentication direction.

    Takes the lowest-indexed mixed packet the terminal reconstructed; slot 0
    uses its first w bits and slot 1 the next w, so the two directions of a
    handshake never tag the same bits.  Returns (packet_index, message).
    """
    if known_indices.size == 0:
        raise ValueError("terminal reconstructed no packets; nothing to authenticate")
    index = int(known_indices.min())
    row = payload_lookup(index)
    return index, packet_bits(row, symbol_bits, slot * tag_bits, tag_bits)


@dataclass
class PairwiseOutcome:
    initiator_ok: bool   # the terminal accepted Alice's proof
    responder_ok: bool   # Alice accepted the terminal's proof


def pairwise_authenticate(initiator_lookup, responder_lookup, responder_known: np.ndarray,
                          symbol_bits: int, tag_bits: int,
                          initiator_key: AuthKey | None, responder_key: AuthKey | None,
                          transcript: Transcript | None = None,
                          rng: np.random.Generator | None = None) -> PairwiseOutcome:
    """Mutual authentication over the responder's reconstructed packets.

    Each lookup returns that side's payload row for a mixed-packet index;
    the two views differ only when a side is an impostor.  A side holding
    None instead of the key broadcasts a uniformly random tag, the best
    forgery available, and can never verify its peer.
    """
    w = tag_bits

    def make_tag(known, lookup, key, slot):
        _, message = selection_message(known, lookup, symbol_bits, w, slot=slot)
        if key is None:
            if rng is None:
                raise ValueError("an impostor needs an RNG to fabricate tags")
            return int(rng.integers(0, 1 << w)), message
        return auth(message, key), message

    def verify(tag, known, lookup, key, slot):
        if key is None:
            return False
        _, message = selection_message(known, lookup, symbol_bits, w, slot=slot)
        return auth(message, key) == tag

    alpha, _ = make_tag(responder_known, initiator_lookup, initiator_key, slot=0)
    if transcript is not None:
        reliable_broadcast(transcript, "auth-tag", overhead_bits=w + SELECTION_INDEX_BITS,
                           direction="initiator")
    initiator_ok = verify(alpha, responder_known, responder_lookup, responder_key, slot=0)

    beta, _ = make_tag(responder_known, responder_lookup, responder_key, slot=1)
    if transcript is not None:
        reliable_broadcast(transcript, "auth-tag", overhead_bits=w + SELECTION_INDEX_BITS,
                           direction="responder")
    responder_ok = verify(beta, responder_known, initiator_lookup, initiator_key, slot=1)
    return PairwiseOutcome(initiator_ok=initiator_ok, responder_ok=responder_ok)


@dataclass
class KeyLedger:
    """Current sigma plus the history of refresh events.

    Each sigma backs the authenticators of at most one round; a completed
    round's secret replaces it.
    """
    sigma_bits: int
    current: AuthKey
    history: list[dict] = field(default_factory=list)

    @classmethod
    def bootstrap(cls, sigma_bits: int, rng: np.random.Generator) -> "KeyLedger":
        sigma = int(rng.integers(0, 1 << min(sigma_bits, 62)))
        if sigma_bits > 62:
            sigma = (sigma << (sigma_bits - 62)) | int(rng.integers(0, 1 << (sigma_bits - 62)))
        return cls(sigma_bits, AuthKey(sigma, sigma_bits))

    def refresh(self, bundle) -> tuple["KeyLedger", int]:
        """Replace sigma with the first sigma_bits of the round secret.

        Those bits are spent on authentication and must not be double
        counted as output secrecy; returns (ledger, net_secret_bits).  A
        bundle too short to cover sigma leaves the ledger unchanged.
        """
        if bundle.bit_length < self.sigma_bits:
            log.warning("round secret (%d bits) shorter than sigma (%d bits); keeping old key",
                        bundle.bit_length, self.sigma_bits)
            return self, bundle.bit_length
        payload = bundle.payload_bytes()
        need = (self.sigma_bits + 7) // 8
        head = int.from_bytes(payload[:need], "big")
        excess = need * 8 - self.sigma_bits
        sigma = head >> excess
        self.history.append({"round_id": bundle.round_id, "sigma_bits": self.sigma_bits})
        fresh = KeyLedger(self.sigma_bits, AuthKey(sigma, self.sigma_bits), self.history)
        return fresh, bundle.bit_length - self.sigma_bits
