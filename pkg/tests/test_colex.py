import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crossquad import colex


def test_rank_of_colex_sequence_is_position():
    for k in (1, 2, 3):
        tuples = sorted(itertools.combinations(range(7), k), key=lambda t: t[::-1])
        assert [colex.rank(t) for t in tuples] == list(range(comb(7, k)))


@given(st.integers(0, 5000), st.integers(1, 5))
def test_unrank_inverts_rank(r, k):
    t = colex.unrank(r, k)
    assert list(t) == sorted(set(t)) and len(t) == k
    assert colex.rank(t) == r


def test_rank_rejects_unsorted():
    with pytest.raises(ValueError):
        colex.rank((2, 1))


def test_index_table_matches_unrank():
    table = colex.index_table(9, 3)
    assert table.shape == (comb(9, 3), 3)
    assert all(tuple(row) == colex.unrank(r, 3) for r, row in enumerate(table))
    assert not table.flags.writeable


def test_block_bounds():
    assert colex.block_bounds(6, 2).tolist() == [comb(c, 2) for c in range(7)]
