"""Sparse binary-attribute datasets (LIBSVM text format) and instance sampling.

A row lists its *active* attributes; every other attribute is inactive.
Projection onto an attribute subset gives spins: active -> +1, inactive -> -1.

Sampling uses ``numpy.random.default_rng(seed)`` (PCG64), whose streams are
identical on every platform.  Instance ``k`` of a call draws from the
generator spawned as ``SeedSequence(seed).spawn(count)[k]``, so instances are
independent of one another and of ``count``'s prefix.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .bnn import LabeledDataset
from .errors import CapacityError, ParseError, UnsupportedFanInError
from .penalties import is_valid_fan_in

__all__ = [
    "SparseBinaryDataset",
    "Instance",
    "parse_sparse",
    "dumps_sparse",
    "to_spins",
    "sample_instances",
    "synthetic_adult_like",
]


@dataclass
class SparseBinaryDataset:
    """Rows of sorted 0-based active attribute indices with spin labels."""

    rows: list[tuple[int, ...]]
    labels: list[int]
    dimension: int

    def __post_init__(self):
        if len(self.rows) != len(self.labels):
            raise ValueError(f"{len(self.rows)} rows but {len(self.labels)} labels")
        self.rows = [tuple(sorted(set(int(i) for i in r))) for r in self.rows]
        for r in self.rows:
            if r and (r[0] < 0 or r[-1] >= self.dimension):
                raise ValueError(f"row {r} has an index outside [0, {self.dimension})")
        for lab in self.labels:
            if lab not in (-1, 1):
                raise ValueError(f"label {lab!r} is not a spin")

    def __len__(self):
        return len(self.rows)

    def dense(self) -> np.ndarray:
        """``(rows, dimension)`` 0/1 matrix."""
        m = np.zeros((len(self.rows), self.dimension), dtype=np.int8)
        for k, r in enumerate(self.rows):
            m[k, list(r)] = 1
        return m


def _parse_label(tok: str, where: str, lineno: int) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"label {tok!r} is not a number", lineno, where) from None
    if v == 1:
        return 1
    if v == -1:
        return -1
    raise ParseError(f"label {tok!r} is not +1 or -1", lineno, where)


def parse_sparse(source, dimension: int | None = None) -> SparseBinaryDataset:
    """Parse ``<label> <idx>:<val> ...`` lines with 1-based indices and ``val == 1``.

    ``source`` is a path, an open text file or an iterable of lines.  Blank
    lines and ``#`` comments are skipped.  The dimension is ``dimension``
    when given (indices beyond it are errors), otherwise the largest index
    seen.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return _parse_lines(fh, str(source), dimension)
    return _parse_lines(source, getattr(source, "name", "<input>"), dimension)


def _parse_lines(lines: Iterable[str], where: str, dimension: int | None) -> SparseBinaryDataset:
    rows, labels = [], []
    max_idx = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_label(toks[0], where, lineno))
        active = []
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"token {tok!r} is not of the form idx:val", lineno, where)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"token {tok!r} is malformed", lineno, where) from None
            if idx < 1:
                raise ParseError(f"index {idx} is not 1-based", lineno, where)
            if dimension is not None and idx > dimension:
                raise ParseError(f"index {idx} exceeds dimension {dimension}", lineno, where)
            if val == 0:
                continue
            if val != 1:
                raise ParseError(f"value {val_s!r} is not binary", lineno, where)
            active.append(idx - 1)
            max_idx = max(max_idx, idx)
        rows.append(tuple(active))
    dim = dimension if dimension is not None else max_idx
    return SparseBinaryDataset(rows, labels, dim)


def dumps_sparse(ds: SparseBinaryDataset) -> str:
    """Inverse of :func:`parse_sparse` (labels as ``+1``/``-1``)."""
    out = io.StringIO()
    for r, lab in zip(ds.rows, ds.labels):
        toks = ["+1" if lab == 1 else "-1"] + [f"{i + 1}:1" for i in r]
        out.write(" ".join(toks) + "\n")
    return out.getvalue()


def to_spins(ds: SparseBinaryDataset, attributes: Sequence[int], rows: Sequence[int] | None = None) -> LabeledDataset:
    """Project ``rows`` (default: all) onto ``attributes`` as spin inputs."""
    attributes = [int(a) for a in attributes]
    if not is_valid_fan_in(len(attributes)):
        raise UnsupportedFanInError(f"{len(attributes)} attributes is not of the form 2**n - 1")
    for a in attributes:
        if not 0 <= a < ds.dimension:
            raise IndexError(f"attribute {a} outside [0, {ds.dimension})")
    rows = range(len(ds)) if rows is None else rows
    x = np.array(
        [[1 if a in set(ds.rows[r]) else -1 for a in attributes] for r in rows], dtype=np.int8
    ).reshape(-1, len(attributes))
    y = np.array([ds.labels[r] for r in rows], dtype=np.int8)
    return LabeledDataset(x, y)


@dataclass
class Instance:
    """A sampled training instance and where it came from."""

    data: LabeledDataset
    attributes: list[int]
    rows: list[int]
    seed: int
    index: int
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "data": self.data.to_json(),
            "attributes": self.attributes,
            "rows": self.rows,
            "seed": self.seed,
            "index": self.index,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Instance":
        return cls(
            LabeledDataset.from_json(d["data"]),
            list(d["attributes"]),
            list(d["rows"]),
            int(d["seed"]),
            int(d["index"]),
            dict(d.get("metadata", {})),
        )


def sample_instances(ds: SparseBinaryDataset, k_attrs: int, num_points: int, count: int, seed: int) -> list[Instance]:
    """Draw ``count`` instances of ``num_points`` rows over ``k_attrs`` attributes.

    Attributes and rows are each chosen uniformly without replacement.
    Label conflicts (one projected input with both labels) are kept and
    counted in ``metadata["conflicts"]``.
    """
    if not is_valid_fan_in(k_attrs):
        raise UnsupportedFanInError(f"{k_attrs} attributes is not of the form 2**n - 1")
    if k_attrs > ds.dimension:
        raise CapacityError(f"{k_attrs} attributes requested from dimension {ds.dimension}")
    if num_points > len(ds):
        raise CapacityError(f"{num_points} points requested from {len(ds)} rows")
    if num_points < 1 or count < 0:
        raise ValueError("num_points must be >= 1 and count >= 0")
    out = []
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(child)
        attrs = sorted(int(a) for a in rng.choice(ds.dimension, size=k_attrs, replace=False))
        rows = sorted(int(r) for r in rng.choice(len(ds), size=num_points, replace=False))
        data = to_spins(ds, attrs, rows)
        meta = {"conflicts": data.conflicts(), "positives": int(np.sum(data.labels == 1))}
        out.append(Instance(data, attrs, rows, seed, k, meta))
    return out


# Column layout of the 14 one-hot groups in the 123-attribute adult encoding.
_ADULT_GROUPS = (5, 7, 16, 7, 14, 6, 5, 2, 3, 3, 3, 5, 5, 42)


def synthetic_adult_like(num_rows: int = 1605, seed: int = 0) -> SparseBinaryDataset:
    """A stand-in with the shape of the binarised adult training split.

    123 attributes in 14 one-hot groups, exactly one active attribute per
    group, and about a quarter positive labels produced by a noisy linear
    rule.  Used where the real file is unavailable; it is not the real data.
    """
    rng = np.random.default_rng(seed)
    starts = np.cumsum((0,) + _ADULT_GROUPS[:-1])
    dim = int(sum(_ADULT_GROUPS))
    score_w = rng.normal(size=dim)
    rows, labels = [], []
    for _ in range(num_rows):
        # skewed category frequencies, like real census columns
        active = [
            int(s + min(int(rng.geometric(0.45)) - 1, g - 1))
            for s, g in zip(starts, _ADULT_GROUPS)
        ]
        rows.append(tuple(active))
        labels.append(float(score_w[active].sum() + rng.normal(scale=1.0)))
    cut = np.quantile(labels, 0.76)
    return SparseBinaryDataset(rows, [1 if v > cut else -1 for v in labels], dim)

