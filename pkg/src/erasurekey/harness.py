"""Experiment orchestration: validated configs, single rounds with
authentication, parameter sweeps, placement enumeration, and CSV emission.

Every run is deterministic in (config, seed): the seed is mandatory, each
sweep point derives its own RNG stream from (master seed, point index), and
output rows are ordered by point index.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from erasurekey import adapted as adp
from erasurekey import basic as bsc
from erasurekey import channel as chan
from erasurekey.auth import KeyLedger, pairwise_authenticate
from erasurekey.exchange import InfeasibleExchangeError
from erasurekey.field import InsufficientRankError
from erasurekey.secrecy import KnowledgeBasis, QualityReport, reliability

CSV_SCHEMA_VERSION = "erasurekey-csv v1"
PROTOCOLS = ("basic", "adapted", "alternative-formula-only")
SWEEP_RUN_GUARD = 10 ** 6
GRID_CELLS = tuple((r, c) for r in range(3) for c in range(3))


class ConfigError(ValueError):
    """An experiment configuration violates a named constraint."""


def derive_seed(*parts: int) -> int:
    """Well-mixed per-point seed from (master seed, point index, ...)."""
    state = np.random.SeedSequence(list(parts)).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


@dataclass
class ExperimentConfig:
    protocol: str
    n: int
    n_source: int
    seed: int
    field_order: int = 8
    packet_symbols: int = 16
    alpha: float = 1.0
    sigma_bits: int = 32
    authenticate: bool = True
    trials: int = 1
    mode: str = "full"              # full | counters
    channel: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.seed is None:
            raise ConfigError("seed is mandatory; wall-clock seeding is not reproducible")
        if self.protocol == "alternative-formula-only":
            return
        if self.n < 2:
            raise ConfigError("n: need at least 2 terminals")
        if self.protocol == "adapted" and self.n < 3:
            raise ConfigError("n: the adapted protocol does not work with 2 terminals")
        if self.n_source < 1:
            raise ConfigError("n_source: need at least one packet")
        if self.n_source > (1 << self.field_order):
            raise ConfigError("n_source: exceeds field size 2^s; raise field_order")
        if self.mode not in ("full", "counters"):
            raise ConfigError("mode: must be 'full' or 'counters'")
        if self.mode == "counters" and self.protocol != "basic":
            raise ConfigError("mode: counters-only rounds exist for the basic protocol")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha: must lie in (0, 1]")
        if self.sigma_bits % 2 or self.sigma_bits < 2:
            raise ConfigError("sigma_bits: must be a positive even number")
        if self.sigma_bits // 2 not in (1, 2, 4, 8, 16):
            raise ConfigError("sigma_bits: tag width sigma_bits/2 must be 1, 2, 4, 8, or 16")
        if self.authenticate and self.mode == "full" and \
                self.packet_symbols * self.field_order < self.sigma_bits:
            raise ConfigError("packet_symbols: packets too short to carry both "
                              "authentication messages; need packet bits >= sigma_bits")
        kind = self.channel.get("kind")
        if kind == "ideal":
            deltas = self.channel.get("deltas")
            if not isinstance(deltas, (list, tuple)) or len(deltas) != self.n:
                raise ConfigError("channel.deltas: need one erasure probability per terminal")
            for d in list(deltas) + [self.channel.get("delta_eve")]:
                if d is None or not 0.0 <= float(d) <= 1.0:
                    raise ConfigError("channel: erasure probabilities must lie in [0, 1]")
            if self.protocol == "basic":
                de = float(self.channel["delta_eve"])
                if not 0.0 < de < 1.0:
                    raise ConfigError("channel.delta_eve: basic rounds need 0 < delta_eve < 1")
        elif kind == "grid":
            cells = self.channel.get("cells")
            if not isinstance(cells, dict):
                raise ConfigError("channel.cells: need a node -> [row, col] mapping")
            wanted = {str(i) for i in range(self.n)} | {chan.EVE}
            if {str(k) for k in cells} != wanted:
                raise ConfigError(f"channel.cells: must place terminals 0..{self.n - 1} and '{chan.EVE}'")
            eps = self.channel.get("epsilon", 0.0)
            if not 0.0 <= float(eps) <= 1.0:
                raise ConfigError("channel.epsilon: must lie in [0, 1]")
        else:
            raise ConfigError("channel.kind: must be 'ideal' or 'grid'")

    @classmethod
    def from_jsonable(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        if "packet_bytes" in obj:
            # payload lengths may be given in bytes; symbols carry s bits each
            nbytes = int(obj.pop("packet_bytes"))
            s = int(obj.get("field_order", 8))
            if (nbytes * 8) % s:
                raise ConfigError(f"packet_bytes: {nbytes} bytes do not split "
                                  f"into whole {s}-bit symbols")
            obj["packet_symbols"] = nbytes * 8 // s
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "seed" not in obj:
            raise ConfigError("seed is mandatory; wall-clock seeding is not reproducible")
        return cls(**obj)

    def to_jsonable(self) -> dict:
        return {
            "protocol": self.protocol, "n": self.n, "n_source": self.n_source,
            "seed": self.seed, "field_order": self.field_order,
            "packet_symbols": self.packet_symbols, "alpha": self.alpha,
            "sigma_bits": self.sigma_bits, "authenticate": self.authenticate,
            "trials": self.trials, "mode": self.mode, "channel": self.channel,
        }


def build_channel(cfg: ExperimentConfig, rng: np.random.Generator):
    kind = cfg.channel["kind"]
    if kind == "ideal":
        return chan.IdealChannel(cfg.channel["deltas"], cfg.channel["delta_eve"], rng)
    cells = {}
    for key, rc in cfg.channel["cells"].items():
        node = chan.EVE if key == chan.EVE else int(key)
        cells[node] = (int(rc[0]), int(rc[1]))
    return chan.GridChannel(cells, float(cfg.channel.get("epsilon", 0.0)), rng)


class _ImpersonatedChannel:
    """Wraps a channel so chosen terminals report the eavesdropper's reception.

    Models an active adversary claiming a terminal's identity during
    feedback: the claimed reception set is what she actually received.
    """

    def __init__(self, inner, impersonated):
        self.inner = inner
        self.impersonated = set(impersonated)

    def transmit(self, transmitter, count, transcript=None):
        record = self.inner.transmit(transmitter, count, transcript)
        for i in self.impersonated:
            record.received[i] = record.received[chan.EVE].copy()
        return record


def _eve_basis_basic(state: bsc.RoundState) -> KnowledgeBasis:
    basis = KnowledgeBasis(state.gf, state.cfg.n_source, owner=chan.EVE)
    basis.ingest_units(state.reception.indices(chan.EVE))
    basis.ingest(bsc.repair_coeffs_source(state))
    return basis


def _eve_basis_adapted(state: adp.AdaptedRoundState) -> KnowledgeBasis:
    basis = KnowledgeBasis(state.gf, state.source_dim, owner=chan.EVE)
    basis.ingest_units(state.eve_source_indices())
    basis.ingest(state.repair_coeffs_source())
    return basis


def _authenticate_basic(state: bsc.RoundState, ledger: KeyLedger,
                        impersonated: set, impostor_rng: np.random.Generator) -> list[int]:
    """Pairwise authentication after the initial phase; returns exclusions."""
    gf = state.gf
    lookup = lambda idx: state.mixed_payloads[idx]
    excluded = []
    for i in range(1, state.cfg.n):
        known = state.known_mixed[i]
        responder_key = None if i in impersonated else ledger.current
        out = pairwise_authenticate(lookup, lookup, known, gf.s, ledger.current.tag_bits,
                                    ledger.current, responder_key,
                                    transcript=state.transcript, rng=impostor_rng)
        if not out.responder_ok:
            state.discard_terminal(i)
            excluded.append(i)
    return excluded


def _authenticate_adapted(state: adp.AdaptedRoundState, ledger: KeyLedger) -> bool:
    """Mutual authentication over mixed packets both Alice and the peer hold."""
    gf = state.gf
    alice_known = set(state.known_mixed[0].tolist())
    lookup = lambda idx: state.mixed_payloads[idx]
    for i in range(1, state.cfg.n):
        common = np.asarray(sorted(alice_known.intersection(state.known_mixed[i].tolist())),
                            dtype=np.int64)
        if common.size == 0:
            return False
        out = pairwise_authenticate(lookup, lookup, common, gf.s, ledger.current.tag_bits,
                                    ledger.current, ledger.current,
                                    transcript=state.transcript)
        if not (out.initiator_ok and out.responder_ok):
            return False
    return True


def _abort_report(protocol: str, status: str, counters: dict) -> QualityReport:
    return QualityReport(protocol=protocol, status=status, reliability=None,
                         efficiency_payload=0.0, efficiency_full=0.0,
                         secret_packets=0, secret_bits=0, counters=counters,
                         secrecy_exact=None, secret_digest=None)


def run_basic_experiment(cfg: ExperimentConfig, impersonated=(), trace: dict | None = None):
    # separate streams so counter-level and full rounds see identical channels
    rng = np.random.default_rng([cfg.seed, 2])
    rng_auth = np.random.default_rng([cfg.seed, 1])
    channel = build_channel(cfg, np.random.default_rng([cfg.seed, 0]))
    if impersonated:
        channel = _ImpersonatedChannel(channel, impersonated)
    bcfg = bsc.BasicConfig(n=cfg.n, n_source=cfg.n_source,
                           delta_eve=float(cfg.channel["delta_eve"]) if cfg.channel["kind"] == "ideal"
                           else float(cfg.channel.get("assumed_delta_eve", 0.5)),
                           packet_symbols=cfg.packet_symbols, field_order=cfg.field_order)

    if cfg.mode == "counters":
        counts = bsc.counters_round(bcfg, channel)
        packet_bits = cfg.packet_symbols * cfg.field_order
        secret_bits = counts["secret_packets"] * packet_bits
        payload_bits = (counts["n_source"] + counts["repair_packets"]) * packet_bits
        overhead = (cfg.n - 1) * counts["n_source"] * chan.FEEDBACK_BITS_PER_PACKET
        status = "ok" if counts["secret_packets"] else "zero_secret"
        return QualityReport(
            protocol="basic", status=status, reliability=None,
            efficiency_payload=counts["efficiency_payload"],
            efficiency_full=secret_bits / (payload_bits + overhead) if payload_bits else 0.0,
            secret_packets=counts["secret_packets"], secret_bits=secret_bits,
            counters=counts, secrecy_exact=None, secret_digest=None), None

    ledger = KeyLedger.bootstrap(cfg.sigma_bits, rng_auth) if cfg.authenticate else None
    try:
        state = bsc.run_initial_phase(bcfg, channel, rng)
    except bsc.ZeroSecretError:
        return _abort_report("basic", "zero_secret",
                             {"n": cfg.n, "n_source": cfg.n_source}), None

    excluded: list[int] = []
    if cfg.authenticate:
        excluded = _authenticate_basic(state, ledger, set(impersonated), rng_auth)
        if len(excluded) == cfg.n - 1:
            return _abort_report("basic", "auth_failure",
                                 {"n": cfg.n, "excluded": excluded}), state
    try:
        bundle = bsc.run_reconciliation(state)
    except bsc.ZeroSecretError:
        return _abort_report("basic", "zero_secret",
                             {"n": cfg.n, "n_source": cfg.n_source,
                              "excluded": excluded}), state

    basis = _eve_basis_basic(state)
    rel = reliability(state.gf, bundle.coeffs_source, basis)
    net_bits = bundle.bit_length
    if cfg.authenticate:
        ledger, net_bits = ledger.refresh(bundle)
    eff = bsc.efficiency_measured(state)
    counters = {
        "n": cfg.n, "n_source": cfg.n_source,
        "coverage": int(sum(b.source_indices.size for b in state.blocks)),
        "source_per_terminal": {str(i): int(state.reception.indices(i).size)
                                for i in range(1, cfg.n)},
        "eve_source": int(state.reception.indices(chan.EVE).size),
        "mixed_packets": state.mixed_count,
        "mixed_per_terminal": {str(i): int(v) for i, v in state.mixed_counts_active().items()},
        "repair_packets": int(state.repair_coeffs.shape[0]),
        "secret_packets": bundle.secret_packets,
        "net_secret_bits": int(net_bits),
        "excluded": excluded,
    }
    if trace is not None:
        trace.update({
            "protocol": "basic", "config": cfg.to_jsonable(),
            "reception": state.reception.to_jsonable(),
            "mixed_coeffs": state.mixed_coeffs.tolist(),
            "repair_coeffs": state.repair_coeffs.tolist(),
            "secret_coeffs_source": bundle.coeffs_source.tolist(),
            "secret_digest": bundle.digest, "counters": counters,
        })
    return QualityReport(protocol="basic", status="ok", reliability=rel,
                         efficiency_payload=eff["payload_only"], efficiency_full=eff["full_cost"],
                         secret_packets=bundle.secret_packets, secret_bits=int(net_bits),
                         counters=counters, secrecy_exact=(rel == 1.0),
                         secret_digest=bundle.digest), state


def run_adapted_experiment(cfg: ExperimentConfig, trace: dict | None = None):
    rng = np.random.default_rng([cfg.seed, 2])
    rng_auth = np.random.default_rng([cfg.seed, 1])
    channel = build_channel(cfg, np.random.default_rng([cfg.seed, 0]))
    acfg = adp.AdaptedConfig(n=cfg.n, n_source=cfg.n_source,
                             packet_symbols=cfg.packet_symbols,
                             field_order=cfg.field_order, alpha=cfg.alpha)
    ledger = KeyLedger.bootstrap(cfg.sigma_bits, rng_auth) if cfg.authenticate else None
    state = adp.run_adapted_initial(acfg, channel, rng)
    counters_base = {
        "n": cfg.n, "n_source": cfg.n_source,
        "per_turn_mixed": [t.mixed_count for t in state.turns],
        "per_turn_delta_eve": [t.estimate.delta_eve for t in state.turns],
        "mixed_packets": state.mixed_count,
    }
    if cfg.authenticate and not _authenticate_adapted(state, ledger):
        return _abort_report("adapted", "auth_failure", counters_base), state
    try:
        bundle = adp.run_adapted_reconciliation(state)
    except bsc.ZeroSecretError:
        return _abort_report("adapted", "zero_secret", counters_base), state
    except InfeasibleExchangeError:
        return _abort_report("adapted", "exchange_infeasible", counters_base), state
    except InsufficientRankError:
        return _abort_report("adapted", "decode_failure", counters_base), state

    basis = _eve_basis_adapted(state)
    rel = reliability(state.gf, bundle.coeffs_source, basis)
    net_bits = bundle.bit_length
    if cfg.authenticate:
        ledger, net_bits = ledger.refresh(bundle)
    eff = adp.measured_efficiency(state)
    counters = dict(counters_base)
    counters.update({
        "exchange_plan": list(state.plan.counts),
        "repair_packets": int(state.plan.total),
        "secret_packets": bundle.secret_packets,
        "net_secret_bits": int(net_bits),
        "known_mixed_sizes": {str(i): int(v.size) for i, v in state.known_mixed.items()},
        "efficiency_identity": eff["identity"],
    })
    if trace is not None:
        trace.update({
            "protocol": "adapted", "config": cfg.to_jsonable(),
            "receptions": [t.reception.to_jsonable() for t in state.turns],
            "estimates": [{str(k): v for k, v in t.estimate.per_receiver_delta.items()}
                          for t in state.turns],
            "exchange_plan": list(state.plan.counts),
            "repair_coeffs": state.repair_coeffs.tolist(),
            "secret_coeffs_source": bundle.coeffs_source.tolist(),
            "secret_digest": bundle.digest, "counters": counters,
        })
    report = QualityReport(protocol="adapted", status="ok", reliability=rel,
                           efficiency_payload=eff["payload_only"],
                           efficiency_full=eff["full_cost"],
                           secret_packets=bundle.secret_packets, secret_bits=int(net_bits),
                           counters=counters, secrecy_exact=(rel == 1.0),
                           secret_digest=bundle.digest)
    return report, state


def run_experiment(cfg: ExperimentConfig, trace: dict | None = None) -> QualityReport:
    """One full round: initial phase, authentication, reconciliation, metrics."""
    if cfg.protocol == "basic":
        report, _ = run_basic_experiment(cfg, trace=trace)
        return report
    if cfg.protocol == "adapted":
        report, _ = run_adapted_experiment(cfg, trace=trace)
        return report
    raise ConfigError("run_experiment needs a runnable protocol, not formula-only")


# ----------------------------------------------------------------------
# sweeps
# ----------------------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (list, tuple)):
        return "|".join(str(x) for x in v)
    return str(v)


def write_csv(path, schema: str, columns: list[str], rows: list[dict]) -> None:
    lines = [f"# {CSV_SCHEMA_VERSION} schema={schema}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(row.get(c)) for c in columns))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


EFFICIENCY_COLUMNS = ["n", "delta", "formula", "alt_formula", "maurer",
                      "measured_mean", "measured_sd", "trials", "n_source"]


def sweep_efficiency(ns, deltas, n_source: int, trials: int, seed: int,
                     measure: bool = True) -> list[dict]:
    """Formula and Monte-Carlo efficiency over identical channels delta_i = delta_E."""
    points = [(n, d) for n in ns for d in deltas]
    if len(points) * max(trials, 1) > SWEEP_RUN_GUARD:
        raise ConfigError(f"sweep would exceed {SWEEP_RUN_GUARD} runs")
    rows = []
    for index, (n, delta) in enumerate(points):
        row = {
            "n": n, "delta": float(delta),
            "formula": bsc.efficiency_formula(n, [delta] * (n - 1), delta),
            "alt_formula": bsc.alt_efficiency_formula(n, [delta] * (n - 1), delta),
            "maurer": bsc.maurer_bound(delta, delta),
            "measured_mean": None, "measured_sd": None,
            "trials": trials if measure else 0, "n_source": n_source,
        }
        if measure:
            if delta in (0.0, 1.0):
                # no secrecy possible at the endpoints; nothing to simulate
                row["measured_mean"], row["measured_sd"] = 0.0, 0.0
            else:
                vals = []
                for t in range(trials):
                    cfg = ExperimentConfig(
                        protocol="basic", n=n, n_source=n_source,
                        seed=derive_seed(seed, index, t), field_order=16,
                        packet_symbols=1, authenticate=False, mode="counters",
                        channel={"kind": "ideal", "deltas": [delta] * n, "delta_eve": delta})
                    vals.append(run_basic_experiment(cfg)[0].efficiency_payload)
                row["measured_mean"] = float(np.mean(vals))
                row["measured_sd"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        rows.append(row)
    return rows


def enumerate_placements(n: int, labeled: bool = False):
    """All grid placements: an eavesdropper cell times terminal cells.

    Unlabeled placements take terminal cells as a set (9 * C(8, n), matching
    504 for n = 3 and 9 for n = 8); labeled ones order them (9 * P(8, n)).
    """
    if n + 1 > len(GRID_CELLS):
        raise ConfigError("placement: need at most 8 terminals on a 3x3 grid")
    for eve_cell in GRID_CELLS:
        rest = [c for c in GRID_CELLS if c != eve_cell]
        gen = itertools.permutations(rest, n) if labeled else itertools.combinations(rest, n)
        for cells in gen:
            yield eve_cell, cells


PLACEMENT_COLUMNS = ["protocol", "n", "n_source", "placement", "eve_cell", "status",
                     "secret_bits", "e_payload", "e_full", "reliability", "seed"]
PLACEMENT_SUMMARY_COLUMNS = ["n", "placements", "completed", "aborted",
                             "r_min", "r_mean", "r_q50", "r_q05",
                             "e_min", "e_mean", "e_q50", "e_q05"]


def placement_sweep(n: int, n_source: int, epsilon: float, seed: int,
                    alpha: float = 1.0, labeled: bool = False,
                    packet_symbols: int = 4, authenticate: bool = False):
    """Run one adapted round per grid placement; returns (rows, summary)."""
    rows = []
    reliabilities, efficiencies = [], []
    for index, (eve_cell, cells) in enumerate(enumerate_placements(n, labeled)):
        cell_map = {str(i): list(c) for i, c in enumerate(cells)}
        cell_map[chan.EVE] = list(eve_cell)
        cfg = ExperimentConfig(protocol="adapted", n=n, n_source=n_source,
                               seed=derive_seed(seed, index),
                               field_order=16, packet_symbols=packet_symbols,
                               alpha=alpha, authenticate=authenticate,
                               channel={"kind": "grid", "cells": cell_map,
                                        "epsilon": epsilon})
        report = run_experiment(cfg)
        placement_id = f"E{eve_cell[0]}{eve_cell[1]}-" + ".".join(f"{r}{c}" for r, c in cells)
        rows.append({
            "protocol": "adapted", "n": n, "n_source": n_source,
            "placement": placement_id, "eve_cell": f"{eve_cell[0]}{eve_cell[1]}",
            "status": report.status, "secret_bits": report.secret_bits,
            "e_payload": report.efficiency_payload, "e_full": report.efficiency_full,
            "reliability": report.reliability, "seed": cfg.seed,
        })
        if report.status == "ok":
            reliabilities.append(report.reliability)
            efficiencies.append(report.efficiency_payload)
    summary = summarize_placements(n, rows, reliabilities, efficiencies)
    return rows, summary


def summarize_placements(n: int, rows, reliabilities, efficiencies) -> dict:
    """Min/mean and the reported quantiles of reliability and efficiency.

    q50 and q05 are the values achieved by at least 50% and 95% of the
    completed experiments, i.e. the 0.5 and 0.05 quantiles from below.
    """
    def stats(vals):
        if not vals:
            return {"min": None, "mean": None, "q50": None, "q05": None}
        arr = np.asarray(vals, dtype=float)
        return {"min": float(arr.min()), "mean": float(arr.mean()),
                "q50": float(np.quantile(arr, 0.5, method="lower")),
                "q05": float(np.quantile(arr, 0.05, method="lower"))}

    r, e = stats(reliabilities), stats(efficiencies)
    return {"n": n, "placements": len(rows),
            "completed": len(reliabilities),
            "aborted": len(rows) - len(reliabilities),
            "r_min": r["min"], "r_mean": r["mean"], "r_q50": r["q50"], "r_q05": r["q05"],
            "e_min": e["min"], "e_mean": e["mean"], "e_q50": e["q50"], "e_q05": e["q05"]}


def reliability_for_alpha(state: adp.AdaptedRoundState, alphas) -> list[tuple[float, float]]:
    """Replay one reconciled round's transcript at different emission fractions.

    The repair broadcasts are fixed; only the number of emitted secret
    combinations varies, so reliability must be non-increasing in alpha.
    """
    if state.extension_rows is None or state.plan is None:
        raise bsc.ProtocolError("round not reconciled yet")
    nominal = state.mixed_count - state.plan.total
    basis = _eve_basis_adapted(state)
    out = []
    for a in alphas:
        emitted = math.floor(a * nominal)
        if emitted < 1:
            continue
        coeffs = state.gf.matmul(state.extension_rows[:emitted], state.mixed_coeffs)
        out.append((float(a), reliability(state.gf, coeffs, basis)))
    return out
