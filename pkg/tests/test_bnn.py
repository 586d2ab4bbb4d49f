import itertools

import numpy as np
import pytest

from bnnqubo.bnn import (
    BnnArchitecture,
    LabeledDataset,
    WeightSet,
    dataset_loss,
    distance,
    enumerate_optimal_weights,
    forward,
    forward_trace,
    loss01,
    sign,
    spin_gap,
)
from bnnqubo.errors import CapacityError, DimensionError, TieError, UnsupportedFanInError


def naive_forward(mats, x):
    y = list(x)
    for m in mats:
        y = [1 if sum(int(m[j][i]) * y[i] for i in range(len(y))) > 0 else -1 for j in range(len(m))]
    return y[0]


def python_oracle(arch, ds):
    """Independent brute force with itertools and plain lists."""
    shapes = arch.weight_shapes()
    n = arch.num_weights
    best, count, first = None, 0, None
    for bits in itertools.product([0, 1], repeat=n):
        mats, pos = [], 0
        for r, c in shapes:
            mats.append([[2 * bits[pos + j * c + i] - 1 for i in range(c)] for j in range(r)])
            pos += r * c
        loss = sum(naive_forward(mats, x) != y for x, y in zip(ds.inputs.tolist(), ds.labels.tolist()))
        if best is None or loss < best:
            best, count, first = loss, 1, bits
        elif loss == best:
            count += 1
    return best, count, first


def test_architecture_parsing_and_validation():
    a = BnnArchitecture.parse("3-3-1")
    assert a.layer_sizes == (3, 3, 1) and a.num_weights == 12
    assert a.weight_shapes() == [(3, 3), (1, 3)]
    assert str(a) == "3-3-1"
    with pytest.raises(UnsupportedFanInError):
        BnnArchitecture([4, 1])
    with pytest.raises(ValueError):
        BnnArchitecture([3, 2])
    with pytest.raises(ValueError):
        BnnArchitecture.parse("3-x-1")


def test_sign():
    assert sign(3) == 1 and sign(-1) == -1
    with pytest.raises(TieError):
        sign(0)


def test_forward_examples():
    assert forward(WeightSet([[[1]]]), [1]) == 1
    assert forward(WeightSet([[[1, 1, -1]]]), [1, 1, 1]) == 1
    rng = np.random.default_rng(0)
    arch = BnnArchitecture([7, 1])
    for _ in range(20):
        w = WeightSet.random(arch, rng)
        x = rng.choice([-1, 1], size=7)
        assert forward(w.negated(), x) == -forward(w, x)


def test_forward_trace_layers():
    w = WeightSet([np.ones((3, 3)), np.array([[1, -1, 1]])])
    trace = forward_trace(w, [1, 1, -1])
    assert [t.tolist() for t in trace] == [[1, 1, -1], [1, 1, 1], [1]]
    with pytest.raises(DimensionError):
        forward(w, [1, 1])


def test_network_is_odd():
    rng = np.random.default_rng(1)
    arch = BnnArchitecture([3, 3, 1])
    for _ in range(20):
        w = WeightSet.random(arch, rng)
        x = rng.choice([-1, 1], size=3)
        assert forward(w, -x) == -forward(w, x)


def test_loss01():
    assert loss01(1, 1) == 0 and loss01(1, -1) == 1
    for y, yh in itertools.product([-1, 1], repeat=2):
        assert loss01(y, yh) == ((y - yh) // 2) ** 2


def test_dataset_loss_matches_loop_and_conflict_bound():
    rng = np.random.default_rng(2)
    arch = BnnArchitecture([3, 3, 1])
    for _ in range(10):
        w = WeightSet.random(arch, rng)
        ds = LabeledDataset(rng.choice([-1, 1], size=(6, 3)), rng.choice([-1, 1], size=6))
        expected = sum(naive_forward(w.to_json(), x) != y for x, y in zip(ds.inputs.tolist(), ds.labels.tolist()))
        assert dataset_loss(w, ds) == expected
    conflict = LabeledDataset([[1, -1, 1], [1, -1, 1]], [1, -1])
    assert all(dataset_loss(WeightSet.random(arch, rng), conflict) >= 1 for _ in range(10))


def test_weight_bits_round_trip():
    rng = np.random.default_rng(3)
    arch = BnnArchitecture([3, 3, 1])
    w = WeightSet.random(arch, rng)
    assert WeightSet.from_bits(arch, w.to_bits()) == w
    assert WeightSet.from_json(w.to_json()) == w
    zero = WeightSet.from_bits(arch, np.zeros(12, dtype=int))
    assert all((m == -1).all() for m in zero.matrices)
    with pytest.raises(DimensionError):
        WeightSet.from_bits(arch, [0] * 11)
    with pytest.raises(ValueError):
        WeightSet([[[0, 1]]])


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((0, 3)), [])
    with pytest.raises(DimensionError):
        LabeledDataset([[1, 1, 1]], [1, -1])
    with pytest.raises(ValueError):
        LabeledDataset([[1, 0, 1]], [1])
    ds = LabeledDataset([[1, 1, 1], [1, 1, 1], [-1, 1, 1]], [1, -1, 1])
    assert ds.conflicts() == 1
    assert LabeledDataset.from_json(ds.to_json()).inputs.tolist() == ds.inputs.tolist()
    with pytest.raises(DimensionError):
        ds.check(BnnArchitecture([7, 1]))


@pytest.mark.parametrize("layers,D,seed", [((3, 1), 4, 0), ((1, 3, 1), 5, 1), ((3, 3, 1), 4, 2), ((3, 1, 1), 6, 3)])
def test_oracle_matches_python_brute_force(layers, D, seed):
    rng = np.random.default_rng(seed)
    arch = BnnArchitecture(layers)
    ds = LabeledDataset(rng.choice([-1, 1], size=(D, layers[0])), rng.choice([-1, 1], size=D))
    res = enumerate_optimal_weights(arch, ds)
    best, count, first = python_oracle(arch, ds)
    assert res.min_loss == best
    assert res.num_optima == count
    assert res.weights.to_bits().tolist() == list(first)
    assert dataset_loss(res.weights, ds) == best


def test_oracle_single_point_and_conflicts():
    arch = BnnArchitecture([3, 3, 1])
    rng = np.random.default_rng(4)
    for _ in range(5):
        ds = LabeledDataset(rng.choice([-1, 1], size=(1, 3)), rng.choice([-1, 1], size=1))
        assert enumerate_optimal_weights(arch, ds).min_loss == 0
    conflict = LabeledDataset([[1, 1, -1], [1, 1, -1]], [1, -1])
    assert enumerate_optimal_weights(arch, conflict).min_loss >= 1


def test_oracle_early_exit_and_capacity():
    arch = BnnArchitecture([3, 3, 1])
    ds = LabeledDataset([[1, 1, 1]], [1])
    full = enumerate_optimal_weights(arch, ds)
    early = enumerate_optimal_weights(arch, ds, early_exit=True)
    assert early.min_loss == 0 and early.num_optima is None
    assert early.patterns_visited < full.patterns_visited == 2**12
    assert early.weights == full.weights
    with pytest.raises(CapacityError):
        enumerate_optimal_weights(BnnArchitecture([7, 7, 1]), LabeledDataset([[1] * 7], [1]))


def test_distance_and_spin_gap():
    arch = BnnArchitecture([3, 1])
    ds = LabeledDataset([[1, 1, 1], [-1, -1, 1], [1, -1, -1]], [1, -1, 1])
    opt = enumerate_optimal_weights(arch, ds)
    assert distance(opt.weights, ds, opt.min_loss) == 0
    rng = np.random.default_rng(5)
    for _ in range(10):
        w = WeightSet.random(arch, rng)
        d = distance(w, ds, opt.min_loss)
        assert d == dataset_loss(w, ds) - opt.min_loss
        # each misclassification is worth 2 on spins; worse weights give a negative gap
        assert -spin_gap(w, opt.weights, ds) == 2 * d
    with pytest.raises(RuntimeError):
        distance(opt.weights, ds, opt.min_loss + 1)
