"""Sparse QUBO container, exact evaluation and serialization.

A :class:`Qubo` stores the polynomial

    E(q) = offset + sum_n Q[n, n] q_n + sum_{n < m} Q[n, m] q_n q_m

over bits ``q in {0, 1}^N``.  Only the upper triangle is stored and every
coefficient is the *full* coefficient of its monomial (no symmetric halving).
Linear terms live on the diagonal because ``q**2 == q``.

Coefficients keep whatever scalar type they were given.  With integer input
(the default everywhere in this package) evaluation is exact.
"""

from __future__ import annotations

import json
import numbers
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DimensionError, ParseError

__all__ = ["Qubo", "energy", "flip_delta", "dumps", "loads", "dumps_text", "loads_text"]

FORMAT_VERSION = 1


class Qubo:
    """Quadratic pseudo-boolean function over ``num_vars`` bits.

    Parameters
    ----------
    num_vars : int
        Number of bit variables.
    terms : iterable of (i, j, coeff), optional
        Initial terms, accumulated through :meth:`add_term`.
    offset : scalar
        Constant term.
    var_names : sequence of str, optional
        Human readable names, one per variable.  Carried through
        serialization but ignored by equality.

    Notes
    -----
    Instances are built by accumulation and then treated as read-only;
    solver caches (:meth:`neighbors`, :meth:`to_csr`) are invalidated on any
    mutation.
    """

    def __init__(self, num_vars: int, terms=None, offset=0, var_names=None):
        if num_vars < 0:
            raise ValueError("num_vars must be nonnegative")
        self.num_vars = int(num_vars)
        self.offset = offset
        self._terms: dict[tuple[int, int], numbers.Number] = {}
        self._adj = None
        self._csr = None
        self.var_names = None if var_names is None else tuple(var_names)
        if self.var_names is not None and len(self.var_names) != self.num_vars:
            raise DimensionError(
                f"{len(self.var_names)} names given for {self.num_vars} variables"
            )
        if terms is not None:
            for i, j, c in terms:
                self.add_term(i, j, c)

    # -- construction -------------------------------------------------

    def _check_index(self, i):
        if not 0 <= i < self.num_vars:
            raise IndexError(f"variable index {i} out of range [0, {self.num_vars})")

    def add_term(self, i: int, j: int, coeff) -> "Qubo":
        """Accumulate ``coeff * q_i * q_j``; ``i == j`` is a linear term."""
        i, j = int(i), int(j)
        self._check_index(i)
        self._check_index(j)
        if i > j:
            i, j = j, i
        key = (i, j)
        value = self._terms.get(key, 0) + coeff
        if value == 0:
            self._terms.pop(key, None)
        else:
            self._terms[key] = value
        self._adj = None
        self._csr = None
        return self

    def add_linear(self, i: int, coeff) -> "Qubo":
        return self.add_term(i, i, coeff)

    def add_offset(self, coeff) -> "Qubo":
        self.offset = self.offset + coeff
        return self

    def add_qubo(self, other: "Qubo", mapping: Sequence[int] | None = None, scale=1) -> "Qubo":
        """Accumulate ``scale * other`` with variables relabelled by ``mapping``."""
        for (i, j), c in other._terms.items():
            if mapping is not None:
                i, j = mapping[i], mapping[j]
            self.add_term(i, j, scale * c)
        self.add_offset(scale * other.offset)
        return self

    def copy(self) -> "Qubo":
        out = Qubo(self.num_vars, offset=self.offset, var_names=self.var_names)
        out._terms = dict(self._terms)
        return out

    # -- inspection ---------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, int], numbers.Number]:
        """Read-only view of the canonical term map."""
        return dict(self._terms)

    def items(self) -> Iterator[tuple[int, int, numbers.Number]]:
        """Terms in lexicographic ``(i, j)`` order."""
        for (i, j) in sorted(self._terms):
            yield i, j, self._terms[(i, j)]

    def get(self, i: int, j: int):
        if i > j:
            i, j = j, i
        return self._terms.get((i, j), 0)

    @property
    def num_terms(self) -> int:
        return len(self._terms)

    def quadratic_items(self):
        return [(i, j, c) for i, j, c in self.items() if i != j]

    def is_integer(self) -> bool:
        return all(isinstance(c, numbers.Integral) for c in self._terms.values()) and isinstance(
            self.offset, numbers.Integral
        )

    def max_abs_coefficient(self):
        return max((abs(c) for c in self._terms.values()), default=0)

    def neighbors(self) -> list[dict[int, numbers.Number]]:
        """Per-variable map ``neighbor -> coupling``; self-key holds the linear term."""
        if self._adj is None:
            adj: list[dict] = [dict() for _ in range(self.num_vars)]
            for (i, j), c in self._terms.items():
                adj[i][j] = c
                adj[j][i] = c
            self._adj = adj
        return self._adj

    def to_csr(self):
        """Arrays for compiled kernels: ``(linear, indptr, indices, couplings)``.

        Couplings are stored symmetrically; integer QUBOs give ``int64`` arrays,
        anything else ``float64``.
        """
        if self._csr is None:
            dtype = np.int64 if self.is_integer() else np.float64
            n = self.num_vars
            linear = np.zeros(n, dtype=dtype)
            rows: list[list[tuple[int, numbers.Number]]] = [[] for _ in range(n)]
            for (i, j), c in self._terms.items():
                if i == j:
                    linear[i] = c
                else:
                    rows[i].append((j, c))
                    rows[j].append((i, c))
            indptr = np.zeros(n + 1, dtype=np.int64)
            for k in range(n):
                rows[k].sort()
                indptr[k + 1] = indptr[k] + len(rows[k])
            indices = np.fromiter((j for r in rows for j, _ in r), dtype=np.int64, count=int(indptr[-1]))
            data = np.array([c for r in rows for _, c in r], dtype=dtype)
            self._csr = (linear, indptr, indices, data)
        return self._csr

    def to_dense(self, dtype=None) -> np.ndarray:
        """Upper-triangular dense matrix (offset not included)."""
        m = np.zeros((self.num_vars, self.num_vars), dtype=dtype or object)
        for (i, j), c in self._terms.items():
            m[i, j] = c
        return m

    # -- evaluation ---------------------------------------------------

    def energy(self, bits) -> numbers.Number:
        return energy(self, bits)

    def flip_delta(self, bits, k: int) -> numbers.Number:
        return flip_delta(self, bits, k)

    def __eq__(self, other):
        if not isinstance(other, Qubo):
            return NotImplemented
        return (
            self.num_vars == other.num_vars
            and self.offset == other.offset
            and self._terms == other._terms
        )

    def __repr__(self):
        return f"Qubo(num_vars={self.num_vars}, num_terms={self.num_terms}, offset={self.offset!r})"


def _as_bits(qubo: Qubo, bits) -> list[int]:
    seq = [int(b) for b in bits]
    if len(seq) != qubo.num_vars:
        raise DimensionError(f"assignment has {len(seq)} bits, QUBO has {qubo.num_vars} variables")
    return seq


def energy(qubo: Qubo, bits) -> numbers.Number:
    """Evaluate ``qubo`` at ``bits`` exactly (Python scalar arithmetic)."""
    a = _as_bits(qubo, bits)
    total = qubo.offset
    for (i, j), c in qubo._terms.items():
        if a[i] and a[j]:
            total = total + c
    return total


def flip_delta(qubo: Qubo, bits, k: int) -> numbers.Number:
    """``energy(bits with bit k flipped) - energy(bits)`` in O(degree(k))."""
    a = _as_bits(qubo, bits)
    if not 0 <= k < qubo.num_vars:
        raise IndexError(f"variable index {k} out of range [0, {qubo.num_vars})")
    local = 0
    for m, c in qubo.neighbors()[k].items():
        if m == k or a[m]:
            local = local + c
    return -local if a[k] else local


# -- serialization -----------------------------------------------------


def _scalar_out(c):
    if isinstance(c, bool):
        return int(c)
    if isinstance(c, numbers.Integral):
        return int(c)
    if isinstance(c, Fraction):
        return str(c)
    if isinstance(c, numbers.Real):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _scalar_in(token, line=None, source=None):
    if isinstance(token, bool):
        raise ParseError(f"boolean is not a coefficient: {token!r}", line, source)
    if isinstance(token, (int, float)):
        return token
    if isinstance(token, str):
        text = token.strip()
        try:
            if "/" in text:
                return Fraction(text)
            return int(text)
        except ValueError:
            pass
        try:
            return float(text)
        except ValueError:
            raise ParseError(f"not a number: {token!r}", line, source) from None
    raise ParseError(f"not a number: {token!r}", line, source)


def to_dict(qubo: Qubo) -> dict:
    out = {
        "num_vars": qubo.num_vars,
        "offset": _scalar_out(qubo.offset),
        "terms": [[i, j, _scalar_out(c)] for i, j, c in qubo.items()],
    }
    if qubo.var_names is not None:
        out["var_names"] = list(qubo.var_names)
    return out


def from_dict(data: dict, source=None) -> Qubo:
    if not isinstance(data, dict):
        raise ParseError("top-level JSON value must be an object", source=source)
    try:
        n = data["num_vars"]
        raw_terms = data.get("terms", [])
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", source=source) from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ParseError(f"field 'num_vars' must be a nonnegative integer, got {n!r}", source=source)
    names = data.get("var_names")
    if names is not None and (not isinstance(names, list) or len(names) != n):
        raise ParseError("field 'var_names' must list one name per variable", source=source)
    q = Qubo(n, offset=_scalar_in(data.get("offset", 0), source=source), var_names=names)
    for pos, term in enumerate(raw_terms):
        where = f"terms[{pos}]"
        if not isinstance(term, list) or len(term) != 3:
            raise ParseError(f"{where}: expected [i, j, coeff]", source=source)
        i, j, c = term
        for name, idx in (("i", i), ("j", j)):
            if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < n:
                raise ParseError(f"{where}.{name}: index {idx!r} outside [0, {n})", source=source)
        q.add_term(i, j, _scalar_in(c, source=source))
    return q


def dumps(qubo: Qubo) -> str:
    """Canonical JSON text; terms sorted lexicographically, zeros dropped."""
    return json.dumps(to_dict(qubo), separators=(",", ":"))


def loads(text: str | bytes, source=None) -> Qubo:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    return from_dict(data, source)


def dumps_text(qubo: Qubo) -> str:
    """Plain coordinate format: ``qubo N num_terms offset`` then ``i j coeff`` lines."""
    lines = [f"qubo {qubo.num_vars} {qubo.num_terms} {_scalar_out(qubo.offset)}"]
    lines.extend(f"{i} {j} {_scalar_out(c)}" for i, j, c in qubo.items())
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield lineno, body.split()


def loads_text(text: str | bytes, source=None) -> Qubo:
    if isinstance(text, bytes):
        text = text.decode()
    lines = iter(_content_lines(text))
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("missing 'qubo' header line", source=source) from None
    if len(header) != 4 or header[0] != "qubo":
        raise ParseError("header must be 'qubo <N> <num_terms> <offset>'", lineno, source)
    try:
        n, count = int(header[1]), int(header[2])
    except ValueError:
        raise ParseError("header sizes must be integers", lineno, source) from None
    if n < 0 or count < 0:
        raise ParseError("header sizes must be nonnegative", lineno, source)
    q = Qubo(n, offset=_scalar_in(header[3], lineno, source))
    seen = 0
    for lineno, fields in lines:
        if len(fields) != 3:
            raise ParseError(f"expected 'i j coeff', got {len(fields)} fields", lineno, source)
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError("indices must be integers", lineno, source) from None
        for name, idx in (("i", i), ("j", j)):
            if not 0 <= idx < n:
                raise ParseError(f"field {name}: index {idx} outside [0, {n})", lineno, source)
        q.add_term(i, j, _scalar_in(fields[2], lineno, source))
        seen += 1
    if seen != count:
        raise ParseError(f"header declares {count} terms, found {seen}", source=source)
    return q
