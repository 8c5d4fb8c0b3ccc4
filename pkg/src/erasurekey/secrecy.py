"""Adversary knowledge tracking and the rank-based quality metrics.

A party's knowledge is modeled as the row space, over the global source-
packet coordinate system, of everything it can linearly reconstruct: the
source packets it received directly plus every reliably broadcast coded
payload.  That is the strongest adversary consistent with the erasure
model, granted unbounded computation over its observations.

All entropy bookkeeping happens in packet units (ranks); conversion to bits
multiplies by packet length and field order only at the reporting edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from erasurekey.field import GF


class KnowledgeBasis:
    """Row space in reduced row echelon form; grows monotonically.

    Rows are expressed in global source-packet coordinates; information is
    never forgotten within a round.
    """

    def __init__(self, gf: GF, dim: int, owner=None):
        self.gf = gf
        self.dim = int(dim)
        self.owner = owner
        self._rows = np.zeros((0, self.dim), dtype=gf.dtype)

    @property
    def rank(self) -> int:
        return self._rows.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._rows

    def copy(self) -> "KnowledgeBasis":
        dup = KnowledgeBasis(self.gf, self.dim, self.owner)
        dup._rows = self._rows.copy()
        return dup

    def ingest(self, rows: np.ndarray) -> "KnowledgeBasis":
        rows = self.gf.asmatrix(rows) if np.size(rows) else None
        if rows is None:
            return self
        if rows.shape[1] != self.dim:
            raise ValueError(f"rows have {rows.shape[1]} coordinates, basis has {self.dim}")
        stacked = np.vstack([self._rows, rows]) if self._rows.size else rows
        rref, pivots = self.gf.row_reduce(stacked)
        self._rows = rref[: len(pivots)]
        return self

    def ingest_units(self, indices) -> "KnowledgeBasis":
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            return self
        rows = np.zeros((indices.size, self.dim), dtype=self.gf.dtype)
        rows[np.arange(indices.size), indices] = 1
        return self.ingest(rows)

    def rank_with(self, rows: np.ndarray) -> int:
        """Rank of this basis joined with extra rows, without mutating it."""
        rows = self.gf.asmatrix(rows) if np.size(rows) else None
        if rows is None:
            return self.rank
        stacked = np.vstack([self._rows, rows]) if self._rows.size else rows
        return self.gf.rank(stacked)


def conditional_entropy_packets(gf: GF, secret_coeffs: np.ndarray, observer: KnowledgeBasis) -> int:
    """H(secret | observer) in packet units: rank([S; E]) - rank(E)."""
    return observer.rank_with(secret_coeffs) - observer.rank


def reliability(gf: GF, secret_coeffs: np.ndarray, observer: KnowledgeBasis) -> float | None:
    """Fraction of secret entropy surviving the observer's knowledge.

    Returns None for an empty secret: the ratio is undefined and callers
    must treat the round as carrying no secret rather than as perfect.
    """
    secret_coeffs = gf.asmatrix(secret_coeffs) if np.size(secret_coeffs) else None
    if secret_coeffs is None or secret_coeffs.shape[0] == 0:
        return None
    total = gf.rank(secret_coeffs)
    if total == 0:
        return None
    surviving = conditional_entropy_packets(gf, secret_coeffs, observer)
    return min(max(surviving / total, 0.0), 1.0)


@dataclass
class QualityReport:
    """Per-round quality metrics plus the raw counters behind them."""

    protocol: str
    status: str                      # ok | zero_secret | exchange_infeasible | auth_failure
    reliability: float | None
    efficiency_payload: float
    efficiency_full: float
    secret_packets: int
    secret_bits: int
    counters: dict = field(default_factory=dict)
    secrecy_exact: bool | None = None   # True when the eavesdropper learned nothing
    secret_digest: str | None = None

    def to_jsonable(self) -> dict:
        return {
            "protocol": self.protocol,
            "status": self.status,
            "reliability": self.reliability,
            "efficiency_payload": self.efficiency_payload,
            "efficiency_full": self.efficiency_full,
            "secret_packets": self.secret_packets,
            "secret_bits": self.secret_bits,
            "secrecy_exact": self.secrecy_exact,
            "secret_digest": self.secret_digest,
            "counters": self.counters,
        }


def concentration_sweep(n: int, delta: float, delta_eve: float, sizes, trials: int,
                        seed: int) -> list[dict]:
    """Empirical mean/deviation of L/N and M/N across round sizes.

    Uses counter-level rounds (reception statistics only), which determine
    the secret and mixing counts exactly without building payload matrices.
    """
    from erasurekey.basic import BasicConfig, counters_round
    from erasurekey.channel import IdealChannel

    if trials < 30:
        raise ValueError("need at least 30 trials per size for a stable deviation estimate")
    rows = []
    for size_index, n_packets in enumerate(sizes):
        rng = np.random.default_rng([seed, size_index])
        l_vals, m_vals = [], []
        for _ in range(trials):
            if delta_eve == 0.0:
                # an all-hearing eavesdropper admits no combinations at all
                l_vals.append(0.0)
                m_vals.append(0.0)
                continue
            channel = IdealChannel([delta] * n, delta_eve, rng)
            cfg = BasicConfig(n=n, n_source=n_packets, delta_eve=delta_eve,
                              packet_symbols=1, field_order=16)
            counts = counters_round(cfg, channel)
            l_vals.append(counts["secret_packets"] / n_packets)
            m_vals.append(counts["mixed_packets"] / n_packets)
        l_arr = np.asarray(l_vals)
        m_arr = np.asarray(m_vals)
        rows.append({
            "n_source": int(n_packets),
            "trials": trials,
            "mean_secret_ratio": float(l_arr.mean()),
            "std_secret_ratio": float(l_arr.std(ddof=1)),
            "mean_mixed_ratio": float(m_arr.mean()),
            "std_mixed_ratio": float(m_arr.std(ddof=1)),
        })
    return rows
