import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pollbatch.batch import BatchSupport, cyclic_span, last_queue
from pollbatch.errors import EmptyBatchSupport, EmptyConditioningSet, InvalidBatch, InvalidModel

MODEL_B = BatchSupport([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1 / 3, 1 / 3, 1 / 3])
MODEL_C = BatchSupport([[1, 1, 0], [1, 0, 3]], [0.8, 0.2])


def test_cyclic_span_and_last_queue():
    assert cyclic_span(2, 0, 3) == [2, 0]
    assert cyclic_span(1, 1, 3) == [1]
    assert last_queue([1, 1, 0], 0) == 1
    assert last_queue([1, 1, 0], 1) == 0
    assert last_queue([1, 0, 3], 2) == 0


def test_model_b_completion_sets():
    assert MODEL_B.comp[0] == pytest.approx([1 / 3] * 3, rel=1e-15)
    assert MODEL_B.conditional_mean(1, 0, 1) == pytest.approx(1.0, rel=1e-14)


def test_model_c_conditional_means():
    assert MODEL_C.conditional_mean(0, 0, 2) == pytest.approx(1.0, rel=1e-14)
    assert MODEL_C.conditional_mean(2, 0, 2) == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(EmptyConditioningSet):
        MODEL_C.conditional_mean(0, 2, 2)


def test_moments():
    assert MODEL_C.mean == pytest.approx([1.0, 0.8, 0.6])
    f = MODEL_C.factorial_moments
    # E(K_1 K_3) = 0.2 * 3, E(K_33) = E(K_3^2) - E(K_3) = 0.2 * 9 - 0.6
    assert f[0, 2] == pytest.approx(0.6)
    assert f[2, 2] == pytest.approx(1.2)
    assert MODEL_C.batch_mates(2)[0] == pytest.approx(0.6 / 0.6)
    assert MODEL_C.batch_mates(2)[2] == pytest.approx(1.2 / (2 * 0.6))


def test_pgf_examples():
    assert MODEL_B.pgf([0.2, 1, 1]) == pytest.approx((0.2 + 1 + 1) / 3, rel=1e-15)
    assert MODEL_C.conditional_pgf([0.5, 0.5, 0.3], 0, 1) == pytest.approx(0.25, rel=1e-15)
    assert MODEL_C.one_minus_pgf(np.ones(3)) == 0.0
    assert MODEL_C.pgf([0.0, 1.0, 1.0]) == 0.0


def test_one_minus_pgf_is_accurate_near_one():
    eps = 1e-13
    z = np.full(3, 1 - eps)
    assert MODEL_C.one_minus_pgf(z) == pytest.approx(eps * MODEL_C.mean.sum(), rel=1e-6)


def test_validation():
    with pytest.raises(EmptyBatchSupport):
        BatchSupport.from_entries([])
    with pytest.raises(InvalidModel):
        BatchSupport([[1, 0]], [0.9])
    with pytest.raises(InvalidBatch):
        BatchSupport([[0, 0]], [1.0])
    with pytest.raises(InvalidBatch):
        BatchSupport([[1, -1]], [1.0])


def test_entries_round_trip():
    assert BatchSupport.from_entries(MODEL_C.to_entries()) == MODEL_C


@st.composite
def supports(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 5))
    rows = []
    for _ in range(m):
        row = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
        if sum(row) == 0:
            row[draw(st.integers(0, n - 1))] = 1
        rows.append(row)
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=m, max_size=m)))
    return BatchSupport(rows, w / w.sum())


@given(supports())
@settings(max_examples=60, deadline=None)
def test_completion_sets_partition(b):
    assert np.allclose(b.comp.sum(axis=1), 1.0, atol=1e-12)


@given(supports(), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_pgf_normalization_and_range(b, x):
    assert b.pgf(np.ones(b.n)) == pytest.approx(1.0, abs=1e-15)
    v = b.pgf(np.full(b.n, x))
    assert -1e-15 <= v <= 1 + 1e-15
    # conditional PGFs average back to the unconditional one
    total = sum(b.comp[0, j] * b.conditional_pgf(np.full(b.n, x), 0, j) for j in range(b.n) if b.comp[0, j] > 0)
    assert total == pytest.approx(v, abs=1e-12)
