"""Classical QUBO samplers: Gray-code exhaustive search, simulated annealing, greedy polish.

All kernels run on the symmetric CSR view from :meth:`Qubo.to_csr` and keep a
local field ``h_k = Q_kk + sum_m Q_km q_m`` so a single flip costs
O(degree).  Randomness comes from numba's Mersenne Twister, seeded
explicitly per restart, so results are reproducible across platforms.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CapacityError, DimensionError
from .qubo import Qubo

__all__ = [
    "Sample",
    "SampleSet",
    "SaSchedule",
    "default_temperatures",
    "solve_exhaustive",
    "solve_sa",
    "polish",
    "gray_code_states",
]


@dataclass
class Sample:
    bits: np.ndarray
    energy: object
    restart: int = 0

    def sort_key(self):
        return (self.energy, tuple(int(b) for b in self.bits))


@dataclass
class SampleSet:
    """Samples sorted by ``(energy, bits)``; ``info`` echoes solver settings."""

    samples: list[Sample]
    wall_time: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples.sort(key=Sample.sort_key)

    @property
    def first(self) -> Sample:
        return self.samples[0]

    def __len__(self):
        return len(self.samples)

    def to_json(self) -> dict:
        return {
            "schema": "bnnqubo.samples/1",
            "info": self.info,
            "wall_time": self.wall_time,
            "samples": [
                {
                    "bits": pack_bits(s.bits),
                    "num_vars": int(s.bits.size),
                    "energy": _json_scalar(s.energy),
                    "restart": s.restart,
                }
                for s in self.samples
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SampleSet":
        samples = [
            Sample(unpack_bits(s["bits"], s["num_vars"]), s["energy"], s.get("restart", 0))
            for s in data["samples"]
        ]
        return cls(samples, data.get("wall_time", 0.0), data.get("info", {}))


def _json_scalar(x):
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def pack_bits(bits) -> str:
    """Hex string of the bits packed MSB-first (``numpy.packbits`` order)."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def unpack_bits(text: str, num_vars: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    return np.unpackbits(raw)[:num_vars].astype(np.int8)


# -- exhaustive ----------------------------------------------------------


@numba.njit(cache=True)
def _gray_kernel(linear, indptr, indices, data, offset, visited):
    n = linear.shape[0]
    state = np.zeros(n, dtype=np.int8)
    h = linear.copy()
    e = offset
    best = e
    code = 0
    best_code = 0
    count = 1
    record = visited.shape[0] > 0
    if record:
        visited[0] = 0
    total = 1 << n
    for t in range(1, total):
        # flip the lowest set bit of t: standard reflected Gray code
        k = 0
        while not (t >> k) & 1:
            k += 1
        if state[k] == 0:
            e += h[k]
            state[k] = 1
            sgn = 1
        else:
            e -= h[k]
            state[k] = 0
            sgn = -1
        for p in range(indptr[k], indptr[k + 1]):
            h[indices[p]] += sgn * data[p]
        code ^= 1 << (n - 1 - k)
        if record:
            visited[t] = code
        if e < best:
            best = e
            best_code = code
            count = 1
        elif e == best:
            count += 1
            if code < best_code:
                best_code = code
    return best, best_code, count


def _code_to_bits(code: int, n: int) -> np.ndarray:
    return np.array([(code >> (n - 1 - k)) & 1 for k in range(n)], dtype=np.int8)


def solve_exhaustive(qubo: Qubo, max_bits: int = 28) -> SampleSet:
    """Exact ground state by visiting all ``2**N`` assignments in Gray-code order.

    Returns one sample, the lexicographically smallest minimiser;
    ``info["num_ground_states"]`` counts all minimisers.
    """
    n = qubo.num_vars
    if n > max_bits:
        raise CapacityError(f"{n} variables exceed the exhaustive limit of {max_bits}")
    t0 = time.perf_counter()
    linear, indptr, indices, data = qubo.to_csr()
    offset = linear.dtype.type(qubo.offset)
    _, code, count = _gray_kernel(linear, indptr, indices, data, offset, np.zeros(0, dtype=np.int64))
    bits = _code_to_bits(int(code), n)
    elapsed = time.perf_counter() - t0
    info = {"solver": "exhaustive", "num_vars": n, "num_ground_states": int(count)}
    return SampleSet([Sample(bits, qubo.energy(bits), 0)], elapsed, info)


def gray_code_states(n: int) -> np.ndarray:
    """Every state visited by the exhaustive kernel, as lexicographic integer codes."""
    if n > 20:
        raise CapacityError("state recording is limited to 20 bits")
    visited = np.zeros(1 << n, dtype=np.int64)
    z = np.zeros(n, dtype=np.int64)
    _gray_kernel(z, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64), z[:0], 0, visited)
    return visited


# -- simulated annealing -------------------------------------------------


@dataclass(frozen=True)
class SaSchedule:
    """Geometric temperature ladder from ``t_start`` to ``t_end`` over ``sweeps``.

    Temperatures left as ``None`` are derived from the instance by
    :func:`default_temperatures`.
    """

    sweeps: int = 1000
    restarts: int = 20
    t_start: float | None = None
    t_end: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.t_end is not None and self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.t_start is not None and self.t_start <= 0:
            raise ValueError("t_start must be positive")
        if self.t_start is not None and self.t_end is not None and self.t_start < self.t_end:
            raise ValueError("t_start must be >= t_end")

    def temperatures(self, qubo: Qubo) -> np.ndarray:
        hot, cold = default_temperatures(qubo)
        t0 = self.t_start if self.t_start is not None else hot
        t1 = self.t_end if self.t_end is not None else min(cold, t0)
        t0 = max(float(t0), float(t1))
        if self.sweeps == 1:
            return np.array([t1], dtype=np.float64)
        return np.geomspace(t0, t1, self.sweeps)

    def to_json(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "restarts": self.restarts,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "seed": self.seed,
        }


HOT_DIVISOR = 30
COLD_DIVISOR = 90


def default_temperatures(qubo: Qubo) -> tuple[float, float]:
    """``(max|Q| / 30, max|Q| / 90)``; ``(1, 1/3)`` for an all-zero QUBO.

    Penalty QUBOs are glassy: above roughly a third of a penalty unit the
    walk never settles into feasible states, below a tenth it freezes.  The
    divisors put the ladder inside that window for any penalty size
    (tuned on 3-3-1 training instances with P in {7, 50, 200}).
    """
    m = float(qubo.max_abs_coefficient()) or 1.0
    return m / HOT_DIVISOR, m / COLD_DIVISOR


@numba.njit(cache=True)
def _sa_kernel(linear, indptr, indices, data, offset, temps, seed):
    np.random.seed(seed)
    n = linear.shape[0]
    state = np.zeros(n, dtype=np.int8)
    for k in range(n):
        state[k] = np.random.randint(0, 2)
    h = linear.copy()
    for k in range(n):
        if state[k]:
            for p in range(indptr[k], indptr[k + 1]):
                h[indices[p]] += data[p]
    e = offset
    for k in range(n):
        if state[k]:
            e += linear[k]
            for p in range(indptr[k], indptr[k + 1]):
                m = indices[p]
                if m > k and state[m]:
                    e += data[p]
    best = e
    best_state = state.copy()
    order = np.arange(n)
    for s in range(temps.shape[0]):
        beta = 1.0 / temps[s]
        np.random.shuffle(order)
        for idx in range(n):
            k = order[idx]
            delta = h[k] if state[k] == 0 else -h[k]
            if delta > 0 and np.random.random() >= math.exp(-delta * beta):
                continue
            sgn = 1 if state[k] == 0 else -1
            state[k] = 1 - state[k]
            e += delta
            for p in range(indptr[k], indptr[k + 1]):
                h[indices[p]] += sgn * data[p]
            if e < best:
                best = e
                best_state[:] = state
    return best_state, best


def solve_sa(qubo: Qubo, schedule: SaSchedule | None = None) -> SampleSet:
    """One sample per restart: the lowest-energy state that restart visited.

    Restart ``r`` is seeded with ``seed ^ r``; each sweep visits the bits in
    a fresh random permutation and applies the Metropolis rule.
    """
    schedule = schedule or SaSchedule()
    t0 = time.perf_counter()
    linear, indptr, indices, data = qubo.to_csr()
    offset = linear.dtype.type(qubo.offset)
    temps = schedule.temperatures(qubo)
    samples = []
    for r in range(schedule.restarts):
        bits, _ = _sa_kernel(linear, indptr, indices, data, offset, temps, (schedule.seed ^ r) & 0xFFFFFFFF)
        samples.append(Sample(bits, qubo.energy(bits), r))
    elapsed = time.perf_counter() - t0
    info = {"solver": "sa", "schedule": schedule.to_json(), "t_start_used": float(temps[0])}
    return SampleSet(samples, elapsed, info)


# -- greedy polish -------------------------------------------------------


@numba.njit(cache=True)
def _polish_kernel(linear, indptr, indices, data, state):
    n = linear.shape[0]
    h = linear.copy()
    for k in range(n):
        if state[k]:
            for p in range(indptr[k], indptr[k + 1]):
                h[indices[p]] += data[p]
    while True:
        best_k = -1
        best_d = linear.dtype.type(0)
        for k in range(n):
            d = h[k] if state[k] == 0 else -h[k]
            if d < best_d:
                best_d = d
                best_k = k
        if best_k < 0:
            return state
        sgn = 1 if state[best_k] == 0 else -1
        state[best_k] = 1 - state[best_k]
        for p in range(indptr[best_k], indptr[best_k + 1]):
            h[indices[p]] += sgn * data[p]


def polish(qubo: Qubo, bits) -> np.ndarray:
    """Steepest-descent single-bit flips until no flip lowers the energy."""
    state = np.array(bits, dtype=np.int8)
    if state.shape != (qubo.num_vars,):
        raise DimensionError(f"assignment has {state.size} bits, QUBO has {qubo.num_vars}")
    linear, indptr, indices, data = qubo.to_csr()
    return _polish_kernel(linear, indptr, indices, data, state)
