from math import comb

import pytest

from subradiant import InvalidParams, Level, ModelParams, index_of, level_of, multiplicity, state_count
from subradiant.model import levels


@pytest.mark.parametrize("N,expected", [(2, 4), (4, 9), (100, 2601)])
def test_state_count(N, expected):
    assert state_count(ModelParams(N, 0.1)) == expected
    assert expected == (N + 2) ** 2 // 4


@pytest.mark.parametrize("N", [1, 3, 0, -2, 101])
def test_odd_or_small_N_rejected(N):
    with pytest.raises(InvalidParams):
        ModelParams(N, 0.1)


@pytest.mark.parametrize("w,gamma", [(-0.1, 0.1), (0.1, -1e-9), (float("nan"), 0.1), (0.1, float("inf"))])
def test_bad_rates_rejected(w, gamma):
    with pytest.raises(InvalidParams):
        ModelParams(10, w, gamma)


def test_default_gamma():
    assert ModelParams(10, 0.2).gamma == 0.1


def test_index_convention():
    p = ModelParams(2, 0.0, 0.0)
    assert index_of(p, Level(0, 0)) == 0
    assert [index_of(p, Level(1, m)) for m in (-1, 0, 1)] == [1, 2, 3]


def test_round_trip_exhaustive():
    p = ModelParams(10, 0.1)
    seen = []
    for J in range(6):
        for M in range(-J, J + 1):
            i = index_of(p, Level(J, M))
            assert level_of(p, i) == (J, M)
            seen.append(i)
    assert sorted(seen) == list(range(state_count(p)))
    Js, Ms = levels(p)
    assert all(index_of(p, (int(j), int(m))) == k for k, (j, m) in enumerate(zip(Js, Ms)))


@pytest.mark.parametrize("level", [(6, 0), (2, 3), (-1, 0), (1, -2)])
def test_index_out_of_range(level):
    with pytest.raises(InvalidParams):
        index_of(ModelParams(10, 0.1), level)


@pytest.mark.parametrize("index", [-1, 36])
def test_level_out_of_range(index):
    with pytest.raises(InvalidParams):
        level_of(ModelParams(10, 0.1), index)


def test_multiplicity_examples():
    assert multiplicity(2, 1) == 1
    assert multiplicity(4, 0) == 2
    assert [multiplicity(4, J) for J in range(3)] == [2, 3, 1]


def test_multiplicity_dimension_identity():
    for N in range(2, 201, 2):
        assert sum(multiplicity(N, J) * (2 * J + 1) for J in range(N // 2 + 1)) == 2**N


def test_multiplicity_large_N_exact():
    # ballot-number form, independent of the factorial formula
    N, J = 10_000, 37
    k = N // 2 - J
    assert multiplicity(N, J) == comb(N, k) - comb(N, k - 1)


def test_multiplicity_rejects_bad_J():
    with pytest.raises(InvalidParams):
        multiplicity(4, 3)
