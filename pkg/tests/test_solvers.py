import itertools
import json

import numpy as np
import pytest

from bnnqubo.errors import CapacityError, DimensionError
from bnnqubo.penalties import MajorityGadget, XnorGadget, majority_penalty, xnor_penalty
from bnnqubo.qubo import Qubo
from bnnqubo.solvers import (
    SampleSet,
    SaSchedule,
    default_temperatures,
    gray_code_states,
    polish,
    solve_exhaustive,
    solve_sa,
)


def brute_minimum(q):
    best, arg, count = None, None, 0
    for bits in itertools.product([0, 1], repeat=q.num_vars):
        e = q.energy(bits)
        if best is None or e < best:
            best, arg, count = e, bits, 1
        elif e == best:
            count += 1
    return best, arg, count


def random_qubo(rng, n, lo=-5, hi=6):
    q = Qubo(n, offset=int(rng.integers(-3, 4)))
    for i in range(n):
        for j in range(i, n):
            if rng.random() < 0.6:
                q.add_term(i, j, int(rng.integers(lo, hi)))
    return q


def test_two_variable_example():
    q = Qubo(2, [(0, 0, 1), (1, 1, 1), (0, 1, -3)])
    ss = solve_exhaustive(q)
    assert ss.first.energy == -1
    assert ss.first.bits.tolist() == [1, 1]


def test_exhaustive_matches_brute_force():
    rng = np.random.default_rng(0)
    for n in range(1, 11):
        q = random_qubo(rng, n)
        best, arg, count = brute_minimum(q)
        ss = solve_exhaustive(q)
        assert ss.first.energy == best
        # lexicographically smallest minimiser, and every minimiser counted
        assert tuple(ss.first.bits.tolist()) == arg
        assert ss.info["num_ground_states"] == count


def test_exhaustive_handles_float_coefficients():
    q = Qubo(3, [(0, 0, -0.5), (1, 2, -1.25), (2, 2, 0.75)])
    best, arg, _ = brute_minimum(q)
    ss = solve_exhaustive(q)
    assert ss.first.energy == pytest.approx(best)
    assert tuple(ss.first.bits.tolist()) == arg


def test_gadget_fragments_have_zero_minimum():
    assert solve_exhaustive(xnor_penalty(XnorGadget(0, 1, 2, 3, 50))).first.energy == 0
    assert solve_exhaustive(majority_penalty(MajorityGadget(list(range(7)), 7, [8, 9], 50))).first.energy == 0


def test_exhaustive_capacity():
    with pytest.raises(CapacityError):
        solve_exhaustive(Qubo(29))
    with pytest.raises(CapacityError):
        solve_exhaustive(Qubo(12), max_bits=10)


@pytest.mark.parametrize("n", [0, 1, 5, 12, 16])
def test_gray_code_visits_every_state_once(n):
    visited = gray_code_states(n)
    assert len(visited) == 2**n
    assert len(set(visited.tolist())) == 2**n
    # consecutive states differ in exactly one bit
    diffs = np.bitwise_xor(visited[1:], visited[:-1])
    assert all(bin(int(d)).count("1") == 1 for d in diffs)


def test_sa_strong_field_finds_all_ones_every_restart():
    n = 20
    q = Qubo(n, [(i, i, -10) for i in range(n)] + [(i, i + 1, 1) for i in range(n - 1)])
    ss = solve_sa(q)
    assert len(ss) == 20
    assert all(s.bits.tolist() == [1] * n for s in ss.samples)


def test_sa_zero_qubo():
    ss = solve_sa(Qubo(5, offset=4), SaSchedule(sweeps=10, restarts=3))
    assert all(s.energy == 4 for s in ss.samples)


def test_sa_is_deterministic_and_reports_true_energies():
    rng = np.random.default_rng(1)
    q = random_qubo(rng, 30)
    a = solve_sa(q, SaSchedule(sweeps=200, restarts=5, seed=9))
    b = solve_sa(q, SaSchedule(sweeps=200, restarts=5, seed=9))
    assert [s.bits.tolist() for s in a.samples] == [s.bits.tolist() for s in b.samples]
    for s in a.samples:
        assert s.energy == q.energy(s.bits)


def test_sa_never_beats_exhaustive():
    rng = np.random.default_rng(2)
    for _ in range(10):
        q = random_qubo(rng, 12)
        ground = solve_exhaustive(q).first.energy
        ss = solve_sa(q, SaSchedule(sweeps=100, restarts=4))
        assert ss.first.energy >= ground


def test_samples_sorted_by_energy_then_bits():
    rng = np.random.default_rng(3)
    q = random_qubo(rng, 8)
    ss = solve_sa(q, SaSchedule(sweeps=5, restarts=15, t_start=50.0, t_end=40.0))
    keys = [s.sort_key() for s in ss.samples]
    assert keys == sorted(keys)


def test_schedule_validation_and_ladder():
    with pytest.raises(ValueError):
        SaSchedule(sweeps=0)
    with pytest.raises(ValueError):
        SaSchedule(restarts=0)
    with pytest.raises(ValueError):
        SaSchedule(t_start=1.0, t_end=2.0)
    with pytest.raises(ValueError):
        SaSchedule(t_end=0.0)
    q = Qubo(2, [(0, 1, 90)])
    assert default_temperatures(q) == (3.0, 1.0)
    temps = SaSchedule(sweeps=5).temperatures(q)
    assert temps[0] == pytest.approx(3.0) and temps[-1] == pytest.approx(1.0)
    assert np.all(np.diff(temps) < 0)
    assert default_temperatures(Qubo(3)) == (1 / 30, 1 / 90)


def test_polish_local_minimum_and_monotonicity():
    rng = np.random.default_rng(4)
    q = random_qubo(rng, 15)
    for _ in range(20):
        bits = rng.integers(0, 2, size=15)
        out = polish(q, bits)
        assert q.energy(out) <= q.energy(bits)
        assert all(q.flip_delta(out, k) >= 0 for k in range(15))
        again = polish(q, out)
        assert again.tolist() == out.tolist()
    with pytest.raises(DimensionError):
        polish(q, [0, 1])


def test_polish_repairs_flipped_ancilla():
    from bnnqubo.bnn import BnnArchitecture, LabeledDataset, WeightSet
    from bnnqubo.builder import MulAncilla, build_training_qubo, witness_assignment

    rng = np.random.default_rng(5)
    arch = BnnArchitecture([3, 3, 1])
    ds = LabeledDataset(rng.choice([-1, 1], size=(4, 3)), rng.choice([-1, 1], size=4))
    q, reg = build_training_qubo(arch, ds)
    wit = witness_assignment(arch, ds, WeightSet.random(arch, rng), reg)
    bad = wit.copy()
    bad[reg[MulAncilla(2, 1, 1, 0)]] ^= 1
    assert q.energy(bad) > q.energy(wit)
    assert q.energy(polish(q, bad)) <= q.energy(wit)


def test_sampleset_json_round_trip():
    rng = np.random.default_rng(6)
    q = random_qubo(rng, 13)
    ss = solve_sa(q, SaSchedule(sweeps=20, restarts=3, seed=2))
    data = json.loads(json.dumps(ss.to_json()))
    assert data["schema"] == "bnnqubo.samples/1"
    assert data["info"]["schedule"]["sweeps"] == 20
    back = SampleSet.from_json(data)
    assert [s.bits.tolist() for s in back.samples] == [s.bits.tolist() for s in ss.samples]
    assert [s.energy for s in back.samples] == [s.energy for s in ss.samples]
