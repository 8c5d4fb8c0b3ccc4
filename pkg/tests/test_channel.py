import numpy as np
import pytest

from erasurekey.channel import (EVE, GridChannel, IdealChannel, ManualChannel,
                                ReceptionRecord, Transcript, reliable_broadcast)


def make_grid(epsilon=0.0, seed=0, cells=None):
    cells = cells or {0: (0, 0), 1: (1, 0), 2: (2, 2), EVE: (1, 1)}
    return GridChannel(cells, epsilon, np.random.default_rng(seed))


def test_ideal_zero_erasure_delivers_everything():
    ch = IdealChannel([0.0, 0.0], 0.0, np.random.default_rng(0))
    rec = ch.transmit(0, 50)
    assert rec.indices(1).size == 50 and rec.indices(EVE).size == 50


def test_ideal_certain_erasure_delivers_nothing():
    ch = IdealChannel([1.0, 1.0], 1.0, np.random.default_rng(0))
    rec = ch.transmit(0, 50)
    assert rec.indices(1).size == 0 and rec.indices(EVE).size == 0


def test_ideal_received_by_terminal_not_eve_fraction():
    # delta_1 = 0.5 and delta_E = 0.4: terminal-only packets ~ 0.4 * 0.5
    ch = IdealChannel([0.0, 0.5], 0.4, np.random.default_rng(42))
    rec = ch.transmit(0, 100_000)
    only = np.setdiff1d(rec.indices(1), rec.indices(EVE)).size / 100_000
    assert abs(only - 0.2) < 0.01


def test_ideal_empirical_frequency_within_binomial_band():
    delta, n = 0.3, 2000
    bound = 4 * np.sqrt(delta * (1 - delta) / n)
    bad = 0
    for seed in range(100):
        ch = IdealChannel([0.0, delta], 0.1, np.random.default_rng(seed))
        rec = ch.transmit(0, n)
        f = 1 - rec.indices(1).size / n
        if abs(f - delta) >= bound:
            bad += 1
    assert bad <= 1


def test_ideal_replay_is_bit_identical():
    a = IdealChannel([0.3, 0.6], 0.4, np.random.default_rng(7)).transmit(0, 500)
    b = IdealChannel([0.3, 0.6], 0.4, np.random.default_rng(7)).transmit(0, 500)
    for who in (1, EVE):
        assert np.array_equal(a.indices(who), b.indices(who))


def test_transmitter_knows_own_packets():
    ch = IdealChannel([1.0, 1.0], 1.0, np.random.default_rng(0))
    rec = ch.transmit(0, 10)
    assert np.array_equal(rec.indices(0), np.arange(10))


def test_reception_record_rejects_out_of_range():
    with pytest.raises(ValueError):
        ReceptionRecord(0, 5, {1: np.array([5])})


# ---------------------------------------------------------------------------
# grid model
# ---------------------------------------------------------------------------

def test_grid_interfered_node_receives_nothing():
    ch = make_grid()
    # slot (0, 0): node 0 sits at row 0 -> erased
    rec = ch.transmit_slot(2, 0, 9)
    assert rec.indices(0).size == 0


def test_grid_clear_node_receives_everything():
    ch = make_grid()
    # slot (0, 0) leaves eve at (1,1) clear
    rec = ch.transmit_slot(2, 0, 9)
    assert rec.indices(EVE).size == 9


def test_grid_deterministic_iff_row_or_column_hit():
    ch = make_grid()
    for slot, (row, col) in enumerate(ch.schedule):
        rec = ch.transmit_slot(0, slot, 3)
        for who, (r, c) in ch.cells.items():
            if who == 0:
                continue
            expected = 0 if (r == row or c == col) else 3
            assert rec.indices(who).size == expected


def test_grid_row_sharing_terminal_gets_two_ninths_eve_misses():
    # terminal 1 shares eve's row: exactly 2 of 9 patterns hit eve only
    ch = make_grid(cells={0: (0, 0), 1: (1, 0), EVE: (1, 1)})
    n = 9 * 50
    rec = ch.transmit(0, n)
    only = np.setdiff1d(rec.indices(1), rec.indices(EVE))
    assert only.size == 2 * n // 9


def test_grid_epsilon_flip_rate():
    ch = make_grid(epsilon=0.05, seed=3)
    nominal = make_grid(epsilon=0.0)
    n = 9 * 2000
    noisy = ch.transmit(0, n)
    clean = nominal.transmit(0, n)
    flips = np.setxor1d(noisy.indices(1), clean.indices(1)).size / n
    assert abs(flips - 0.05) < 0.01


def test_grid_round_robin_covers_patterns_equally():
    ch = make_grid()
    rec = ch.transmit(0, 90)
    # eve is clear in the 4 patterns avoiding her row and column
    assert rec.indices(EVE).size == 40


def test_grid_rejects_shared_cell():
    with pytest.raises(ValueError):
        GridChannel({0: (0, 0), 1: (0, 0), EVE: (1, 1)}, 0.0, np.random.default_rng(0))


def test_grid_replay_with_epsilon_is_identical():
    a = make_grid(epsilon=0.1, seed=5).transmit(0, 90)
    b = make_grid(epsilon=0.1, seed=5).transmit(0, 90)
    assert np.array_equal(a.indices(1), b.indices(1))
    assert np.array_equal(a.indices(EVE), b.indices(EVE))


# ---------------------------------------------------------------------------
# transcript accounting
# ---------------------------------------------------------------------------

def test_broadcast_counts_payload_bits():
    t = Transcript(packet_symbols=20, symbol_bits=8)
    reliable_broadcast(t, "repair", payload_packets=3)
    assert t.total_bits() == 3 * 20 * 8


def test_eve_sees_every_broadcast_in_order():
    t = Transcript(packet_symbols=4, symbol_bits=8)
    reliable_broadcast(t, "feedback", overhead_bits=10)
    reliable_broadcast(t, "repair", payload_packets=1)
    reliable_broadcast(t, "secret-coefficients", overhead_bits=32)
    assert [e["kind"] for e in t.eve_view] == ["feedback", "repair", "secret-coefficients"]


def test_transmissions_are_not_in_eve_broadcast_view():
    t = Transcript(packet_symbols=4, symbol_bits=8)
    ch = IdealChannel([0.5, 0.5], 0.5, np.random.default_rng(0))
    ch.transmit(0, 10, t)
    assert t.source_packets == 10 and t.eve_view == []


def test_manual_channel_replays_fixed_record():
    rec = ReceptionRecord(0, 4, {1: np.array([0, 2]), EVE: np.array([1])})
    ch = ManualChannel([rec])
    out = ch.transmit(0, 4)
    assert np.array_equal(out.indices(1), [0, 2])
