import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnnqubo import qubo as qio
from bnnqubo.errors import DimensionError, ParseError
from bnnqubo.qubo import Qubo


def random_qubo(rng, n=10, density=0.5, lo=-9, hi=9):
    q = Qubo(n, offset=int(rng.integers(lo, hi)))
    for i in range(n):
        for j in range(i, n):
            if rng.random() < density:
                q.add_term(i, j, int(rng.integers(lo, hi)))
    return q


def double_loop_energy(q: Qubo, bits):
    """Independent oracle: symmetric dense matrix, plain double loop."""
    n = q.num_vars
    full = [[0] * n for _ in range(n)]
    for (i, j), c in q.terms.items():
        if i == j:
            full[i][i] += c
        else:
            full[i][j] += Fraction(c, 2) if isinstance(c, int) else c / 2
            full[j][i] += Fraction(c, 2) if isinstance(c, int) else c / 2
    e = q.offset
    for i in range(n):
        for j in range(n):
            e += full[i][j] * bits[i] * bits[j]
    return e


def test_all_zero_assignment_gives_offset():
    q = Qubo(3, [(0, 1, 4), (2, 2, -1)], offset=7)
    assert q.energy([0, 0, 0]) == 7


def test_single_variable_energy_and_delta():
    q = Qubo(1, [(0, 0, 3)])
    assert q.energy([1]) == 3
    assert q.flip_delta([0], 0) == 3
    assert q.flip_delta([1], 0) == -3


def test_energy_matches_double_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        q = random_qubo(rng)
        bits = rng.integers(0, 2, size=10)
        assert q.energy(bits) == double_loop_energy(q, bits)


def test_flip_delta_matches_reevaluation_for_all_k():
    rng = np.random.default_rng(12)
    q = random_qubo(rng)
    for _ in range(10):
        bits = rng.integers(0, 2, size=10)
        for k in range(10):
            flipped = bits.copy()
            flipped[k] ^= 1
            assert q.flip_delta(bits, k) == q.energy(flipped) - q.energy(bits)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 8).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(-20, 20)), max_size=20),
            st.lists(st.integers(0, 1), min_size=n, max_size=n),
            st.integers(0, n - 1),
        )
    )
)
def test_flip_property(case):
    n, terms, bits, k = case
    q = Qubo(n, terms, offset=3)
    flipped = list(bits)
    flipped[k] ^= 1
    assert q.energy(flipped) == q.energy(bits) + q.flip_delta(bits, k)


def test_length_mismatch_and_index_errors():
    q = Qubo(2)
    with pytest.raises(DimensionError):
        q.energy([0, 1, 0])
    with pytest.raises(IndexError):
        q.add_term(0, 2, 1)
    with pytest.raises(IndexError):
        q.flip_delta([0, 0], 5)


def test_add_term_canonicalizes_and_cancels():
    q = Qubo(3)
    q.add_term(2, 1, 5).add_term(1, 2, -5)
    assert (1, 2) not in q.terms
    q.add_term(0, 0, 1).add_term(0, 0, 1)
    assert q.get(0, 0) == 2
    q.add_term(2, 0, 4)
    assert q.terms == {(0, 0): 2, (0, 2): 4}


def test_integer_energy_is_exact_for_large_coefficients():
    big = 2**62
    q = Qubo(2, [(0, 0, big), (1, 1, big), (0, 1, -big)])
    assert q.energy([1, 1]) == big
    assert isinstance(q.energy([1, 1]), int)


def test_csr_view_is_symmetric_and_typed():
    q = Qubo(3, [(0, 1, 2), (1, 2, -3), (1, 1, 4)])
    linear, indptr, indices, data = q.to_csr()
    assert linear.dtype == np.int64 and data.dtype == np.int64
    assert linear.tolist() == [0, 4, 0]
    rows = {k: dict(zip(indices[indptr[k]:indptr[k + 1]], data[indptr[k]:indptr[k + 1]])) for k in range(3)}
    assert rows == {0: {1: 2}, 1: {0: 2, 2: -3}, 2: {1: -3}}
    fq = Qubo(1, [(0, 0, 0.5)])
    assert fq.to_csr()[0].dtype == np.float64


@pytest.mark.parametrize("dump,load", [(qio.dumps, qio.loads), (qio.dumps_text, qio.loads_text)])
def test_round_trip_formats(dump, load):
    empty = Qubo(0)
    assert load(dump(empty)) == empty
    rng = np.random.default_rng(3)
    q = random_qubo(rng, n=12)
    back = load(dump(q))
    assert back == q
    assert dump(back) == dump(q)


def test_json_keeps_names_and_fractions():
    q = Qubo(2, [(0, 1, Fraction(1, 3))], offset=Fraction(-2, 5), var_names=["a", "b"])
    back = qio.loads(qio.dumps(q))
    assert back == q
    assert back.var_names == ("a", "b")
    assert back.get(0, 1) == Fraction(1, 3)


def test_canonicalization_is_idempotent():
    text = '{"num_vars": 3, "offset": 1, "terms": [[2, 0, 3], [0, 2, -1], [1, 1, 0]]}'
    once = qio.dumps(qio.loads(text))
    assert once == qio.dumps(qio.loads(once))
    assert qio.loads(once).terms == {(0, 2): 2}


def test_parse_errors_carry_location():
    with pytest.raises(ParseError, match="terms\\[0\\]"):
        qio.loads('{"num_vars": 2, "terms": [[0, 2, 1]]}')
    with pytest.raises(ParseError, match="line 3"):
        qio.loads_text("qubo 2 2 0\n0 0 1\n0 5 1\n")
    with pytest.raises(ParseError, match="declares"):
        qio.loads_text("qubo 2 3 0\n0 0 1\n")
    with pytest.raises(ParseError, match="header"):
        qio.loads_text("cubo 2 0 0\n")
    with pytest.raises(ParseError):
        qio.loads("{not json")


def test_text_format_allows_comments():
    q = qio.loads_text("# a comment\nqubo 2 1 -4  # header\n\n0 1 7\n")
    assert q == Qubo(2, [(0, 1, 7)], offset=-4)


def test_training_qubo_round_trips_bit_exactly():
    from bnnqubo.bnn import BnnArchitecture, LabeledDataset
    from bnnqubo.builder import build_training_qubo

    rng = np.random.default_rng(5)
    ds = LabeledDataset(rng.choice([-1, 1], size=(4, 3)), rng.choice([-1, 1], size=4))
    q, _ = build_training_qubo(BnnArchitecture([3, 3, 1]), ds)
    text = qio.dumps(q)
    back = qio.loads(text)
    assert back == q and qio.dumps(back) == text
    assert back.var_names == q.var_names


def test_add_qubo_with_mapping_and_scale():
    frag = Qubo(2, [(0, 1, 3), (1, 1, -1)], offset=2)
    big = Qubo(4)
    big.add_qubo(frag, mapping=[3, 1], scale=2)
    assert big.terms == {(1, 3): 6, (1, 1): -2}
    assert big.offset == 4
    for bits in itertools.product([0, 1], repeat=2):
        full = [0, bits[1], 0, bits[0]]
        assert big.energy(full) == 2 * frag.energy(bits)
