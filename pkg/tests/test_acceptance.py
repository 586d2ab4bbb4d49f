"""Acceptance suite: each test prints one ``CRITERION n: PASS|FAIL`` line and asserts it.

Run on its own with ``pytest -v -s tests/test_acceptance.py``; the lines are
also visible without ``-s`` because they bypass output capture.
"""

import itertools
import time

import numpy as np
import pytest

from bnnqubo.bench import log_linear_fit, run_scaling_suite, run_type_suite
from bnnqubo.bnn import BnnArchitecture, LabeledDataset, WeightSet, dataset_loss, enumerate_optimal_weights
from bnnqubo.builder import (
    BuildOptions,
    audit,
    build_training_qubo,
    decode_weights,
    witness_assignment,
)
from bnnqubo.dataio import sample_instances, synthetic_adult_like
from bnnqubo.embedding import chimera_graph, embed_qubo, find_embedding
from bnnqubo.penalties import MajorityGadget, XnorGadget, majority_penalty, xnor_penalty
from bnnqubo.solvers import solve_exhaustive


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {n}: {detail}"


# ---------------------------------------------------------------- 1


def test_criterion_1_xnor_gadget(capsys):
    t0 = time.perf_counter()
    bad = []
    for P in (1, 7, 50):
        q = xnor_penalty(XnorGadget(0, 1, 2, 3, P))
        for a, b, o in itertools.product((0, 1), repeat=3):
            want = 0 if o == (1 if a == b else 0) else P
            got = min(q.energy([a, b, o, c]) for c in (0, 1))
            if got != want:
                bad.append((P, a, b, o, got))
    elapsed = time.perf_counter() - t0
    report(capsys, 1, not bad and elapsed < 1.0, f"{len(bad)} wrong rows, {elapsed:.3f}s")


# ---------------------------------------------------------------- 2


def test_criterion_2_majority_gadget(capsys):
    t0 = time.perf_counter()
    bad = []
    P = 50
    for fan_in in (1, 3, 7):
        n_bits = fan_in.bit_length()
        ins = list(range(fan_in))
        out = fan_in
        anc = list(range(fan_in + 1, fan_in + n_bits))
        q = majority_penalty(MajorityGadget(ins, out, anc, P))
        for x in itertools.product((0, 1), repeat=fan_in):
            ones = sum(x)
            maj = 1 if 2 * ones > fan_in else 0
            energies = {}
            for rest in itertools.product((0, 1), repeat=n_bits):
                energies[rest] = q.energy(list(x) + list(rest))
            # the popcount in binary: ancillas are the low bits, out the top bit
            encoding = (ones >> (n_bits - 1),) + tuple((ones >> k) & 1 for k in range(n_bits - 1))
            best = min(energies.values())
            wrong = min(e for r, e in energies.items() if r[0] != maj)
            if best != 0 or energies[encoding] != 0 or encoding[0] != maj or wrong < P:
                bad.append((fan_in, x))
    elapsed = time.perf_counter() - t0
    report(capsys, 2, not bad and elapsed < 1.0, f"{len(bad)} wrong inputs, {elapsed:.3f}s")


# ---------------------------------------------------------------- 3


def test_criterion_3_witness_identity(capsys):
    rng = np.random.default_rng(2024)
    archs = [BnnArchitecture(s) for s in ((3, 1), (3, 3, 1), (7, 3, 1))]
    t0 = time.perf_counter()
    bad = []
    for trial in range(50):
        arch = archs[trial % 3]
        D = int(rng.integers(1, 9))
        ds = LabeledDataset(rng.choice([-1, 1], size=(D, arch.input_size)), rng.choice([-1, 1], size=D))
        w = WeightSet.random(arch, rng)
        q, reg = build_training_qubo(arch, ds)
        bits = witness_assignment(arch, ds, w, reg)
        rep = audit(bits, reg, arch, ds)
        loss = dataset_loss(w, ds)
        if q.energy(bits) != loss or not rep.feasible or rep.diverged or rep.output_loss != loss:
            bad.append(trial)
    elapsed = time.perf_counter() - t0
    report(capsys, 3, not bad and elapsed < 5.0, f"{50 - len(bad)}/50 exact, {elapsed:.2f}s")


# ---------------------------------------------------------------- 4


def test_criterion_4_ground_state_equivalence(capsys):
    rng = np.random.default_rng(7)
    cases = [((1, 1), D) for D in (1, 2, 3, 4) for _ in range(3)] + [((3, 1), 2)] * 6
    t0 = time.perf_counter()
    bad, largest = [], 0
    for layers, D in cases:
        arch = BnnArchitecture(layers)
        ds = LabeledDataset(rng.choice([-1, 1], size=(D, arch.input_size)), rng.choice([-1, 1], size=D))
        q, reg = build_training_qubo(arch, ds, BuildOptions(penalty=10))
        largest = max(largest, q.num_vars)
        assert q.num_vars <= 26
        ground = solve_exhaustive(q).first
        oracle = enumerate_optimal_weights(arch, ds)
        decoded_loss = dataset_loss(decode_weights(ground.bits, reg), ds)
        if ground.energy != oracle.min_loss or decoded_loss != oracle.min_loss:
            bad.append((layers, D))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60.0
    report(capsys, 4, ok, f"{len(cases) - len(bad)}/{len(cases)} match, up to {largest} vars, {elapsed:.2f}s")


# ---------------------------------------------------------------- 5 and 6

TYPE_A_SEED = 0


@pytest.fixture(scope="module")
def type_a_run():
    t0 = time.perf_counter()
    records = run_type_suite(points=4, seed=TYPE_A_SEED, count=20)
    return records, time.perf_counter() - t0


def test_criterion_5_sa_on_qubo(capsys, type_a_run):
    records, elapsed = type_a_run
    sa = [r for r in records if r.formulation == "qubo" and r.solver == "sa"]
    assert len(sa) == 20
    hits = sum(r.distance == 0 for r in sa)
    sa_seconds = sum(r.runtime_ms for r in sa) / 1000
    ok = hits >= 16 and elapsed < 300.0
    report(capsys, 5, ok, f"{hits}/20 at distance 0, SA {sa_seconds:.1f}s, whole suite {elapsed:.1f}s")


def test_criterion_6a_embedded_witness_energy(capsys):
    data = synthetic_adult_like()
    hw = chimera_graph(16)
    arch = BnnArchitecture([3, 3, 1])
    rng = np.random.default_rng(11)
    checked, bad = 0, []
    for inst in sample_instances(data, 3, 4, 20, TYPE_A_SEED):
        q, reg = build_training_qubo(arch, inst.data)
        emb = find_embedding(q, hw, seed=TYPE_A_SEED * 1000 + inst.index)
        eq = embed_qubo(q, emb, hw)
        oracle = enumerate_optimal_weights(arch, inst.data)
        for w in [oracle.weights] + [WeightSet.random(arch, rng) for _ in range(4)]:
            bits = witness_assignment(arch, inst.data, w, reg)
            checked += 1
            if eq.qubo.energy(eq.expand(bits)) != q.energy(bits) or q.energy(bits) != dataset_loss(w, inst.data):
                bad.append(inst.index)
    report(capsys, "6a", not bad, f"{checked - len(bad)}/{checked} witnesses preserved exactly")


def test_criterion_6b_sa_on_embedded_qubo(capsys, type_a_run):
    records, _ = type_a_run
    eq = [r for r in records if r.formulation == "equbo"]
    assert len(eq) == 20
    hits = sum(r.distance == 0 for r in eq)
    mean_break = float(np.mean([r.chain_break_fraction for r in eq]))
    qubits = int(np.mean([r.num_vars for r in eq]))
    report(capsys, "6b", hits >= 10,
           f"{hits}/20 at distance 0, mean chain-break fraction {mean_break:.3f}, mean {qubits} qubits")


# ---------------------------------------------------------------- 7


def test_criterion_7_exponential_scaling(capsys):
    records = run_scaling_suite(seed=0)
    x = [r.num_weights for r in records]
    assert x == [6, 9, 12, 15, 18, 21, 24]
    fit = log_linear_fit(x, [r.runtime_ms for r in records])
    ok = 0.7 <= fit["slope"] <= 1.3 and fit["r2"] >= 0.9
    report(capsys, 7, ok, f"slope {fit['slope']:.3f}, R^2 {fit['r2']:.3f}")


# ---------------------------------------------------------------- 8


def closed_form(layers, D, fold=False):
    """Independent count: weights, then per datum hidden activations, two
    variables per product (value and multiplication ancilla), popcount bits
    beyond the output bit, and one output variable."""
    weights = sum(a * b for a, b in zip(layers, layers[1:]))
    products = weights - (layers[0] * layers[1] if fold else 0)
    hidden = sum(layers[1:-1])
    counts = sum(b * (a.bit_length() - 1) for a, b in zip(layers, layers[1:]))
    return weights + D * (hidden + 2 * products + counts + 1)


def test_criterion_8_count_formula(capsys):
    rng = np.random.default_rng(8)
    checked, bad = 0, []
    for _ in range(10):
        depth = int(rng.integers(1, 4))
        layers = tuple(int(rng.choice([1, 3, 7])) for _ in range(depth)) + (1,)
        arch = BnnArchitecture(layers)
        for D in (1, 4, 8):
            ds = LabeledDataset(rng.choice([-1, 1], size=(D, layers[0])), rng.choice([-1, 1], size=D))
            for fold in (False, True):
                q, _ = build_training_qubo(arch, ds, BuildOptions(fold_constant_inputs=fold))
                checked += 1
                if q.num_vars != closed_form(layers, D, fold):
                    bad.append((layers, D, fold))
    rng2 = np.random.default_rng(0)
    ds4 = LabeledDataset(rng2.choice([-1, 1], size=(4, 3)), rng2.choice([-1, 1], size=4))
    n_type_a = build_training_qubo(BnnArchitecture([3, 3, 1]), ds4)[0].num_vars
    ok = not bad and n_type_a == 140
    report(capsys, 8, ok, f"{checked - len(bad)}/{checked} counts match, 3-3-1 with D=4 gives {n_type_a}")
