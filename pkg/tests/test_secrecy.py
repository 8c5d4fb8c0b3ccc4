import itertools

import numpy as np
import pytest

from erasurekey.field import get_field, mds_generator
from erasurekey.secrecy import (KnowledgeBasis, concentration_sweep,
                                conditional_entropy_packets, reliability)


def unit_rows(gf, dim, indices):
    rows = np.zeros((len(indices), dim), dtype=gf.dtype)
    for r, c in enumerate(indices):
        rows[r, c] = 1
    return rows


def test_ingest_spanned_row_leaves_rank():
    gf = get_field(8)
    basis = KnowledgeBasis(gf, 4)
    basis.ingest(gf.asmatrix([[1, 1, 0, 0]]))
    rank = basis.rank
    basis.ingest(gf.asmatrix([[1, 1, 0, 0]]))
    assert basis.rank == rank


def test_ingest_fresh_unit_increases_rank():
    gf = get_field(8)
    basis = KnowledgeBasis(gf, 4).ingest_units([1])
    assert basis.rank == 1
    basis.ingest_units([3])
    assert basis.rank == 2


def test_rank_grows_monotonically():
    gf = get_field(8)
    rng = np.random.default_rng(0)
    basis = KnowledgeBasis(gf, 6)
    last = 0
    for _ in range(10):
        basis.ingest(gf.random_matrix(2, 6, rng))
        assert basis.rank >= last
        last = basis.rank


def test_dimension_mismatch_rejected():
    gf = get_field(8)
    with pytest.raises(ValueError):
        KnowledgeBasis(gf, 4).ingest(gf.asmatrix([[1, 0]]))


def test_repair_rows_add_expected_rank():
    # observer whose span is disjoint from the mixed space gains exactly
    # one dimension per public repair combination
    gf = get_field(8)
    rng = np.random.default_rng(1)
    mixed = mds_generator(gf, 10, 4)  # rows over packets 0..9
    basis = KnowledgeBasis(gf, 10)
    repair = gf.matmul(gf.asmatrix([[1, 2, 3, 4], [5, 6, 7, 8]]), mixed)
    basis.ingest(repair)
    assert basis.rank == 2


def test_reliability_when_observer_knows_nothing():
    gf = get_field(8)
    secret = unit_rows(gf, 5, [0, 2])
    assert reliability(gf, secret, KnowledgeBasis(gf, 5)) == 1.0


def test_reliability_when_observer_spans_secret():
    gf = get_field(8)
    secret = unit_rows(gf, 5, [0, 2])
    basis = KnowledgeBasis(gf, 5).ingest_units([0, 1, 2])
    assert reliability(gf, secret, basis) == 0.0


def test_reliability_of_worked_example_scenario():
    # eavesdropper holds packets 1,3,5,6,8,10; the secret mixes 1+5+9 and 3+7
    gf = get_field(8)
    secret = np.zeros((2, 10), dtype=gf.dtype)
    secret[0, [0, 4, 8]] = 1
    secret[1, [2, 6]] = 1
    basis = KnowledgeBasis(gf, 10).ingest_units([0, 2, 4, 5, 7, 9])
    assert reliability(gf, secret, basis) == 1.0


def test_empty_secret_is_flagged_not_scored():
    gf = get_field(8)
    assert reliability(gf, np.zeros((0, 4)), KnowledgeBasis(gf, 4)) is None


def test_conditional_entropy_identity_exhaustive_small():
    # rank([mix; observed]) - rank(observed) equals the safe dimension for
    # every observer subset, every round size up to 12
    gf = get_field(8)
    for n in range(1, 13):
        for n_eve in range(0, n + 1):
            k = n - n_eve
            gen = mds_generator(gf, n, k) if k else np.zeros((0, n), dtype=gf.dtype)
            for subset in itertools.combinations(range(n), n_eve):
                basis = KnowledgeBasis(gf, n).ingest_units(list(subset))
                assert conditional_entropy_packets(gf, gen, basis) == k


def test_concentration_mean_and_shrinking_spread():
    rows = concentration_sweep(n=2, delta=0.5, delta_eve=0.5,
                               sizes=[250, 4000], trials=30, seed=3)
    small, large = rows
    assert large["mean_secret_ratio"] == pytest.approx(0.25, rel=0.02)
    assert large["std_secret_ratio"] < small["std_secret_ratio"]


def test_concentration_zero_variance_without_secrecy():
    rows = concentration_sweep(n=2, delta=0.5, delta_eve=0.0,
                               sizes=[100], trials=30, seed=4)
    assert rows[0]["mean_secret_ratio"] == 0.0
    assert rows[0]["std_secret_ratio"] == 0.0


def test_concentration_requires_enough_trials():
    with pytest.raises(ValueError):
        concentration_sweep(2, 0.5, 0.5, [100], trials=5, seed=0)
