"""Binary neural network semantics and the exhaustive weight oracle.

Weights, inputs and activations are spins in {-1, +1}.  A layer computes
``y_next = sign(W @ y)``; fan-ins are odd so the pre-activation is never 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import CapacityError, DimensionError, TieError, UnsupportedFanInError
from .penalties import is_valid_fan_in

__all__ = [
    "BnnArchitecture",
    "WeightSet",
    "LabeledDataset",
    "OracleResult",
    "sign",
    "forward",
    "forward_trace",
    "loss01",
    "dataset_loss",
    "enumerate_optimal_weights",
    "distance",
    "spin_gap",
]


@dataclass(frozen=True)
class BnnArchitecture:
    """Layer widths ``[n0, n1, ..., 1]``; ``n_l`` is the fan-in of layer ``l``."""

    layer_sizes: tuple[int, ...]

    def __init__(self, layer_sizes: Sequence[int]):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2:
            raise ValueError("architecture needs an input width and an output layer")
        if sizes[-1] != 1:
            raise ValueError(f"final layer must have exactly one neuron, got {sizes[-1]}")
        for n in sizes[:-1]:
            if not is_valid_fan_in(n):
                raise UnsupportedFanInError(f"fan-in {n} is not of the form 2**n - 1")
        object.__setattr__(self, "layer_sizes", sizes)

    @classmethod
    def parse(cls, text: str) -> "BnnArchitecture":
        """Parse ``"3-3-1"`` style strings."""
        try:
            sizes = [int(t) for t in text.replace(",", "-").split("-") if t.strip()]
        except ValueError:
            raise ValueError(f"bad architecture string {text!r}") from None
        return cls(sizes)

    def __str__(self):
        return "-".join(str(s) for s in self.layer_sizes)

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    def weight_shapes(self) -> list[tuple[int, int]]:
        s = self.layer_sizes
        return [(s[l + 1], s[l]) for l in range(self.num_layers)]

    @property
    def num_weights(self) -> int:
        return sum(r * c for r, c in self.weight_shapes())


class WeightSet:
    """Spin weight matrices, one ``(n_{l+1}, n_l)`` array per layer."""

    def __init__(self, matrices: Sequence[np.ndarray]):
        mats = []
        for m in matrices:
            a = np.asarray(m, dtype=np.int8)
            if a.ndim != 2:
                raise DimensionError("weight matrices must be 2-D")
            if not np.all(np.abs(a) == 1):
                raise ValueError("weights must be spins (+1/-1)")
            mats.append(a)
        self.matrices = tuple(mats)

    @classmethod
    def from_bits(cls, arch: BnnArchitecture, bits: Sequence[int]) -> "WeightSet":
        """Spins from bits via ``s = 2q - 1``, flattened layer by layer, row-major."""
        bits = np.asarray(bits, dtype=np.int8)
        if bits.size != arch.num_weights:
            raise DimensionError(f"{bits.size} bits for {arch.num_weights} weights")
        mats, pos = [], 0
        for r, c in arch.weight_shapes():
            mats.append(2 * bits[pos:pos + r * c].reshape(r, c) - 1)
            pos += r * c
        return cls(mats)

    @classmethod
    def random(cls, arch: BnnArchitecture, rng: np.random.Generator) -> "WeightSet":
        return cls.from_bits(arch, rng.integers(0, 2, size=arch.num_weights))

    def to_bits(self) -> np.ndarray:
        return np.concatenate([(m.ravel() + 1) // 2 for m in self.matrices]).astype(np.int8)

    def check(self, arch: BnnArchitecture) -> None:
        shapes = [m.shape for m in self.matrices]
        if shapes != arch.weight_shapes():
            raise DimensionError(f"weight shapes {shapes} do not match {arch.weight_shapes()}")

    def negated(self) -> "WeightSet":
        return WeightSet([-m for m in self.matrices])

    def to_json(self) -> list:
        return [m.tolist() for m in self.matrices]

    @classmethod
    def from_json(cls, data) -> "WeightSet":
        return cls([np.array(m) for m in data])

    def __eq__(self, other):
        if not isinstance(other, WeightSet):
            return NotImplemented
        return len(self.matrices) == len(other.matrices) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices)
        )

    def __repr__(self):
        return f"WeightSet({self.to_json()})"


class LabeledDataset:
    """Spin inputs ``(D, n0)`` with spin labels ``(D,)``."""

    def __init__(self, inputs, labels):
        x = np.asarray(inputs, dtype=np.int8)
        y = np.asarray(labels, dtype=np.int8).ravel()
        if x.ndim != 2:
            raise DimensionError("inputs must be a 2-D array")
        if x.shape[0] == 0:
            raise ValueError("dataset is empty")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(f"{x.shape[0]} inputs but {y.shape[0]} labels")
        if not (np.all(np.abs(x) == 1) and np.all(np.abs(y) == 1)):
            raise ValueError("inputs and labels must be spins (+1/-1)")
        self.inputs = x
        self.labels = y

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_size(self) -> int:
        return self.inputs.shape[1]

    def check(self, arch: BnnArchitecture) -> None:
        if self.input_size != arch.input_size:
            raise DimensionError(
                f"dataset inputs have length {self.input_size}, architecture expects {arch.input_size}"
            )

    def conflicts(self) -> int:
        """Number of input patterns that occur with both labels."""
        seen: dict[bytes, set] = {}
        for row, lab in zip(self.inputs, self.labels):
            seen.setdefault(row.tobytes(), set()).add(int(lab))
        return sum(1 for labs in seen.values() if len(labs) == 2)

    def to_json(self) -> dict:
        return {"inputs": self.inputs.tolist(), "labels": self.labels.tolist()}

    @classmethod
    def from_json(cls, data) -> "LabeledDataset":
        return cls(data["inputs"], data["labels"])


def sign(x: int) -> int:
    if x == 0:
        raise TieError("sign(0) is undefined; fan-ins must be odd")
    return 1 if x > 0 else -1


def forward_trace(w: WeightSet, y0) -> list[np.ndarray]:
    """All activations ``[y^0, y^1, ..., y^L]`` for one input."""
    y = np.asarray(y0, dtype=np.int64)
    trace = [y.astype(np.int8)]
    for m in w.matrices:
        if m.shape[1] != y.shape[0]:
            raise DimensionError(f"layer expects {m.shape[1]} inputs, got {y.shape[0]}")
        pre = m.astype(np.int64) @ y
        y = np.array([sign(int(v)) for v in pre], dtype=np.int64)
        trace.append(y.astype(np.int8))
    return trace


def forward(w: WeightSet, y0) -> int:
    out = forward_trace(w, y0)[-1]
    if out.shape != (1,):
        raise DimensionError("network must end in a single neuron")
    return int(out[0])


def loss01(label: int, out: int) -> int:
    return 0 if label == out else 1


def dataset_loss(w: WeightSet, ds: LabeledDataset) -> int:
    return sum(loss01(int(lab), forward(w, x)) for x, lab in zip(ds.inputs, ds.labels))


# -- exhaustive oracle ---------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    min_loss: int
    weights: WeightSet
    num_optima: int | None
    patterns_visited: int


@numba.njit(cache=True, nogil=True)
def _enumerate_kernel(sizes, inputs, labels, lo, hi, early_exit):
    n_layers = sizes.shape[0] - 1
    n_w = 0
    width = 0
    for l in range(n_layers):
        n_w += sizes[l] * sizes[l + 1]
    for l in range(n_layers + 1):
        width = max(width, sizes[l])
    D = inputs.shape[0]
    w = np.empty(n_w, dtype=np.int64)
    cur = np.empty(width, dtype=np.int64)
    nxt = np.empty(width, dtype=np.int64)
    best = D + 1
    best_p = -1
    count = 0
    visited = 0
    for p in range(lo, hi):
        visited += 1
        for k in range(n_w):
            w[k] = 2 * ((p >> (n_w - 1 - k)) & 1) - 1
        loss = 0
        for d in range(D):
            for i in range(sizes[0]):
                cur[i] = inputs[d, i]
            pos = 0
            for l in range(n_layers):
                rows = sizes[l + 1]
                cols = sizes[l]
                for j in range(rows):
                    s = 0
                    for i in range(cols):
                        s += w[pos + j * cols + i] * cur[i]
                    nxt[j] = 1 if s > 0 else -1
                pos += rows * cols
                for j in range(rows):
                    cur[j] = nxt[j]
            if cur[0] != labels[d]:
                loss += 1
                if loss > best:
                    break
        if loss < best:
            best = loss
            best_p = p
            count = 1
        elif loss == best:
            count += 1
        if early_exit and best == 0:
            break
    return best, best_p, count, visited


def enumerate_optimal_weights(
    arch: BnnArchitecture,
    ds: LabeledDataset,
    limit: int = 30,
    early_exit: bool = False,
) -> OracleResult:
    """Exact minimum of :func:`dataset_loss` over all ``2**num_weights`` weight settings.

    Patterns are visited in lexicographic bit order (weights flattened as in
    :meth:`WeightSet.to_bits`), so the returned argmin is the lexicographically
    smallest optimal pattern.  With ``early_exit`` the search stops at the
    first zero-loss pattern and ``num_optima`` is reported as ``None``.
    """
    ds.check(arch)
    n_w = arch.num_weights
    if n_w > limit:
        raise CapacityError(f"{n_w} weights exceed the oracle limit of {limit}")
    sizes = np.array(arch.layer_sizes, dtype=np.int64)
    best, best_p, count, visited = _enumerate_kernel(
        sizes,
        ds.inputs.astype(np.int64),
        ds.labels.astype(np.int64),
        0,
        1 << n_w,
        early_exit,
    )
    bits = [(best_p >> (n_w - 1 - k)) & 1 for k in range(n_w)]
    stopped_early = early_exit and best == 0 and visited < (1 << n_w)
    return OracleResult(
        min_loss=int(best),
        weights=WeightSet.from_bits(arch, bits),
        num_optima=None if stopped_early else int(count),
        patterns_visited=int(visited),
    )


def distance(w: WeightSet, ds: LabeledDataset, min_loss: int) -> int:
    """Extra misclassifications of ``w`` relative to the optimum."""
    d = dataset_loss(w, ds) - min_loss
    if d < 0:
        raise RuntimeError(f"loss {d + min_loss} is below the claimed optimum {min_loss}")
    return d


def spin_gap(w: WeightSet, w_star: WeightSet, ds: LabeledDataset) -> int:
    """``sum_d |f(w*)(x_d) - y_d| - |f(w)(x_d) - y_d|`` measured on spins.

    Each misclassification contributes 2, and the sign is negative when ``w``
    is worse than ``w_star``; ``-spin_gap / 2 == distance`` for optimal ``w_star``.
    """
    total = 0
    for x, lab in zip(ds.inputs, ds.labels):
        total += abs(forward(w_star, x) - int(lab)) - abs(forward(w, x) - int(lab))
    return total
