import numpy as np
import pytest

from erasurekey.adapted import (AdaptedConfig, efficiency_identity,
                                estimate_eve_erasure, measured_efficiency,
                                run_adapted_initial, run_adapted_reconciliation)
from erasurekey.basic import ZeroSecretError
from erasurekey.channel import EVE, GridChannel, IdealChannel, ReceptionRecord
from erasurekey.secrecy import KnowledgeBasis, reliability


def grid_round(cells, n, seed=7, n_source=18, epsilon=0.0, alpha=1.0, payloads=True):
    rng = np.random.default_rng(seed)
    channel = GridChannel(cells, epsilon, rng)
    cfg = AdaptedConfig(n=n, n_source=n_source, packet_symbols=4,
                        field_order=16, alpha=alpha)
    state = run_adapted_initial(cfg, channel, rng, payloads=payloads)
    bundle = run_adapted_reconciliation(state)
    return state, bundle


def eve_reliability(state, bundle):
    basis = KnowledgeBasis(state.gf, state.source_dim, EVE)
    basis.ingest_units(state.eve_source_indices())
    basis.ingest(state.repair_coeffs_source())
    return reliability(state.gf, bundle.coeffs_source, basis)


THREE_GOOD = {0: (0, 0), 1: (0, 1), 2: (1, 0), EVE: (1, 1)}


# ---------------------------------------------------------------------------
# overlap estimation
# ---------------------------------------------------------------------------

def test_estimator_worked_turn():
    # receiver 1 got packets 1,2,3,4,7,8 and receiver 2 got 1,3,5,6 (1-based)
    record = ReceptionRecord(0, 10, {1: np.array([0, 1, 2, 3, 6, 7]),
                                     2: np.array([0, 2, 4, 5]),
                                     EVE: np.array([], dtype=int)})
    est = estimate_eve_erasure(record, 0, range(3))
    assert est.per_receiver_counts == {1: 6, 2: 4}
    assert est.pair_overlaps[(1, 2)] == 2
    assert est.per_receiver_delta[1] == pytest.approx(1 / 3)
    assert est.per_receiver_delta[2] == pytest.approx(1 / 2)
    assert est.delta_eve == pytest.approx(1 / 2)


def test_estimator_full_overlap():
    same = np.array([0, 1, 2])
    record = ReceptionRecord(0, 5, {1: same, 2: same, EVE: np.array([], dtype=int)})
    assert estimate_eve_erasure(record, 0, range(3)).delta_eve == 1.0


def test_estimator_disjoint_sets():
    record = ReceptionRecord(0, 6, {1: np.array([0, 1]), 2: np.array([3, 4]),
                                    EVE: np.array([], dtype=int)})
    assert estimate_eve_erasure(record, 0, range(3)).delta_eve == 0.0


def test_estimator_inestimable_when_nothing_received():
    record = ReceptionRecord(0, 6, {1: np.array([], dtype=int),
                                    2: np.array([], dtype=int),
                                    EVE: np.array([], dtype=int)})
    assert estimate_eve_erasure(record, 0, range(3)).delta_eve is None


def test_estimator_skips_empty_receiver():
    record = ReceptionRecord(0, 6, {1: np.array([0, 1]), 2: np.array([], dtype=int),
                                    3: np.array([0]), EVE: np.array([], dtype=int)})
    est = estimate_eve_erasure(record, 0, range(4))
    assert est.per_receiver_delta[2] is None
    # receiver 3's single packet is shared with receiver 1, driving the max
    assert est.per_receiver_delta[3] == 1.0
    assert est.delta_eve == 1.0


# ---------------------------------------------------------------------------
# initial phase
# ---------------------------------------------------------------------------

def test_worked_turn_mixing_count():
    # delta estimate 0.5 over 8 covered packets gives 4 combinations
    records = [ReceptionRecord(0, 10, {1: np.array([0, 1, 2, 3, 6, 7]),
                                       2: np.array([0, 2, 4, 5]),
                                       EVE: np.array([], dtype=int)})]
    # remaining turns carry nothing
    for j in (1, 2):
        records.append(ReceptionRecord(j, 10, {i: np.array([], dtype=int)
                                               for i in range(3) if i != j} | {EVE: np.array([], dtype=int)}))

    class Replay:
        def __init__(self, recs):
            self.recs = list(recs)

        def transmit(self, transmitter, count, transcript=None):
            return self.recs.pop(0)

    cfg = AdaptedConfig(n=3, n_source=10, packet_symbols=4, field_order=16)
    state = run_adapted_initial(cfg, Replay(records), np.random.default_rng(0))
    assert state.turns[0].mixed_count == 4
    assert state.turns[1].mixed_count == 0  # inestimable turns contribute nothing


def test_two_terminals_rejected():
    with pytest.raises(ValueError):
        AdaptedConfig(n=2, n_source=9)


def test_every_turn_mixes_on_clean_grid():
    state, _ = grid_round(THREE_GOOD, 3)
    assert all(t.mixed_count > 0 for t in state.turns)


def test_transmitter_knows_own_turn():
    state, _ = grid_round(THREE_GOOD, 3)
    for j, turn in enumerate(state.turns):
        own = np.arange(turn.mix_offset, turn.mix_offset + turn.mixed_count)
        assert np.isin(own, state.known_mixed[j]).all()


# ---------------------------------------------------------------------------
# reconciliation
# ---------------------------------------------------------------------------

def test_clean_grid_round_is_exactly_secret():
    state, bundle = grid_round(THREE_GOOD, 3)
    assert bundle.secret_packets == state.mixed_count - state.plan.total
    assert eve_reliability(state, bundle) == 1.0


def test_plan_total_zero_when_everyone_knows_everything():
    # perfect reception makes the estimates 1.0, every block floors to its
    # size, and every terminal reconstructs everything; the exchange then
    # costs nothing but the secret is fully public
    rng = np.random.default_rng(3)
    channel = IdealChannel([0.0, 0.0, 0.0], 0.0, rng)
    cfg = AdaptedConfig(n=3, n_source=12, packet_symbols=2, field_order=16)
    state = run_adapted_initial(cfg, channel, rng)
    bundle = run_adapted_reconciliation(state)
    assert state.plan.counts == (0, 0, 0)
    assert bundle.secret_packets == state.mixed_count
    assert eve_reliability(state, bundle) == 0.0  # she heard it all too


def test_alpha_scales_emitted_combinations():
    state, bundle = grid_round(THREE_GOOD, 3, alpha=0.5)
    nominal = state.mixed_count - state.plan.total
    assert bundle.secret_packets == int(np.floor(0.5 * nominal))


def test_alpha_one_percent_aborts_small_round():
    with pytest.raises(ZeroSecretError):
        grid_round(THREE_GOOD, 3, alpha=0.01)


def test_counters_only_round_matches_full():
    full_state, full_bundle = grid_round(THREE_GOOD, 3, seed=9)
    lean_state, lean_bundle = grid_round(THREE_GOOD, 3, seed=9, payloads=False)
    assert lean_state.plan.counts == full_state.plan.counts
    assert lean_bundle.secret_packets == full_bundle.secret_packets
    assert eve_reliability(lean_state, lean_bundle) == eve_reliability(full_state, full_bundle)


def test_efficiency_identity_matches_counters():
    state, bundle = grid_round(THREE_GOOD, 3)
    eff = measured_efficiency(state)
    m, k = state.mixed_count, state.plan.total
    assert eff["identity"] == pytest.approx(efficiency_identity(m, k, 3, 18))
    assert eff["identity"] == pytest.approx((m - k) / (3 * 18 + m - k))
    assert eff["payload_only"] == pytest.approx(bundle.secret_packets / (3 * 18 + k))


def test_full_cost_efficiency_below_payload_only():
    state, _ = grid_round(THREE_GOOD, 3)
    eff = measured_efficiency(state)
    assert 0 < eff["full_cost"] < eff["payload_only"]


def test_grid_epsilon_round_completes():
    state, bundle = grid_round(THREE_GOOD, 3, epsilon=0.05, seed=21)
    assert bundle.secret_packets >= 1
    assert 0.0 <= eve_reliability(state, bundle) <= 1.0
