"""Quadratic penalty gadgets for the XNOR product and majority constraints.

Gadget operands are variable indices, or :class:`Fixed` constants for data
inputs that are known at compile time.  Majority inputs may additionally be
:class:`Negated` variables (``1 - q``), which is how folded layer-0 products
are expressed over weight bits.

XNOR gadget
    Enforces ``out = XNOR(a, b)`` with one ancilla ``c`` intended to equal
    ``a * b``::

        P (1 - a - b - out + 2ab + 2b*out + 2a*out - 4c*out)
          + 4P (3c + ab - 2ac - 2bc)

    The second bracket is the Rosenberg substitution penalty, which is zero
    iff ``c == a*b`` and at least 1 otherwise.  Minimised over ``c`` the
    gadget is ``P * [out != XNOR(a, b)]`` exactly.

Majority gadget
    For fan-in ``2**n - 1``::

        P (sum(inputs) - sum_i 2**i anc_i - 2**(n-1) out)**2

    which is zero iff ``(anc..., out)`` is the binary popcount of the inputs,
    so ``out`` is the majority bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError, UnsupportedFanInError
from .qubo import Qubo

__all__ = [
    "Fixed",
    "Negated",
    "XnorGadget",
    "MajorityGadget",
    "is_valid_fan_in",
    "count_bits",
    "add_xnor_penalty",
    "add_majority_penalty",
    "xnor_penalty",
    "majority_penalty",
    "matrix_form",
]


@dataclass(frozen=True)
class Fixed:
    """A compile-time constant bit."""

    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError(f"Fixed bit must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class Negated:
    """The complement ``1 - q`` of variable ``index``."""

    index: int


Operand = Union[int, Fixed]
SumOperand = Union[int, Fixed, Negated]


def is_valid_fan_in(k: int) -> bool:
    """True for 1, 3, 7, 15, ..."""
    return k >= 1 and (k + 1) & k == 0


def count_bits(fan_in: int) -> int:
    """Number of bits ``n`` needed to count up to ``fan_in = 2**n - 1``."""
    if not is_valid_fan_in(fan_in):
        raise UnsupportedFanInError(f"fan-in {fan_in} is not of the form 2**n - 1")
    return (fan_in + 1).bit_length() - 1


def _var_indices(ops) -> list[int]:
    out = []
    for op in ops:
        if isinstance(op, Negated):
            out.append(op.index)
        elif not isinstance(op, Fixed):
            out.append(int(op))
    return out


@dataclass(frozen=True)
class XnorGadget:
    """``out = XNOR(in_a, in_b)`` with product ancilla ``ancilla = in_a * in_b``."""

    in_a: Operand
    in_b: Operand
    out: int
    ancilla: int
    penalty: int = 1

    def __post_init__(self):
        idx = _var_indices([self.in_a, self.in_b, self.out, self.ancilla])
        if len(set(idx)) != len(idx):
            raise ValueError(f"XNOR gadget indices must be distinct, got {idx}")
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")


@dataclass(frozen=True)
class MajorityGadget:
    """Binary counter over ``inputs``; ``out`` is the most significant bit."""

    inputs: Sequence[SumOperand]
    out: int
    ancillas: Sequence[int] = field(default_factory=tuple)
    penalty: int = 1

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "ancillas", tuple(self.ancillas))
        n = count_bits(len(self.inputs))
        if len(self.ancillas) != n - 1:
            raise ValueError(
                f"fan-in {len(self.inputs)} needs {n - 1} ancillas, got {len(self.ancillas)}"
            )
        idx = _var_indices(self.inputs) + [self.out] + list(self.ancillas)
        if len(set(idx)) != len(idx):
            raise ValueError(f"majority gadget indices must be distinct, got {idx}")
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")


def _add_monomial(q: Qubo, coeff, *ops: Operand) -> None:
    """Accumulate ``coeff * prod(ops)`` with constants folded in."""
    idx = []
    for op in ops:
        if isinstance(op, Fixed):
            if op.value == 0:
                return
        else:
            idx.append(op)
    if not idx:
        q.add_offset(coeff)
    elif len(idx) == 1:
        q.add_term(idx[0], idx[0], coeff)
    else:
        q.add_term(idx[0], idx[1], coeff)


def add_xnor_penalty(q: Qubo, g: XnorGadget) -> Qubo:
    """Accumulate the XNOR gadget of ``g`` into ``q``."""
    P = g.penalty
    M = 4 * P
    a, b, o, c = g.in_a, g.in_b, g.out, g.ancilla
    _add_monomial(q, P)
    _add_monomial(q, -P, a)
    _add_monomial(q, -P, b)
    _add_monomial(q, -P, o)
    _add_monomial(q, 2 * P, a, b)
    _add_monomial(q, 2 * P, b, o)
    _add_monomial(q, 2 * P, a, o)
    _add_monomial(q, -4 * P, c, o)
    # Rosenberg term pinning c to a*b
    _add_monomial(q, 3 * M, c)
    _add_monomial(q, M, a, b)
    _add_monomial(q, -2 * M, a, c)
    _add_monomial(q, -2 * M, b, c)
    return q


def add_squared_linear(q: Qubo, weighted: Sequence[tuple[int, SumOperand]], scale=1) -> Qubo:
    """Accumulate ``scale * (sum_k w_k * op_k)**2`` into ``q``."""
    const = 0
    coeffs: dict[int, int] = {}
    for w, op in weighted:
        if isinstance(op, Fixed):
            const += w * op.value
        elif isinstance(op, Negated):
            const += w
            coeffs[op.index] = coeffs.get(op.index, 0) - w
        else:
            coeffs[int(op)] = coeffs.get(int(op), 0) + w
    items = [(i, w) for i, w in coeffs.items() if w != 0]
    q.add_offset(scale * const * const)
    for k, (i, wi) in enumerate(items):
        q.add_term(i, i, scale * (wi * wi + 2 * const * wi))
        for j, wj in items[k + 1:]:
            q.add_term(i, j, scale * 2 * wi * wj)
    return q


def add_majority_penalty(q: Qubo, g: MajorityGadget) -> Qubo:
    """Accumulate the majority gadget of ``g`` into ``q``."""
    n = count_bits(len(g.inputs))
    weighted: list[tuple[int, SumOperand]] = [(1, op) for op in g.inputs]
    weighted += [(-(1 << i), a) for i, a in enumerate(g.ancillas)]
    weighted.append((-(1 << (n - 1)), g.out))
    return add_squared_linear(q, weighted, g.penalty)


def _fragment_size(indices) -> int:
    return max(indices, default=-1) + 1


def xnor_penalty(g: XnorGadget, num_vars: int | None = None) -> Qubo:
    """Stand-alone XNOR fragment over ``num_vars`` (default: max index + 1)."""
    n = num_vars if num_vars is not None else _fragment_size(
        _var_indices([g.in_a, g.in_b, g.out, g.ancilla])
    )
    return add_xnor_penalty(Qubo(n), g)


def majority_penalty(g: MajorityGadget, num_vars: int | None = None) -> Qubo:
    """Stand-alone majority fragment over ``num_vars`` (default: max index + 1)."""
    n = num_vars if num_vars is not None else _fragment_size(
        _var_indices(g.inputs) + [g.out, *g.ancillas]
    )
    return add_majority_penalty(Qubo(n), g)


def matrix_form(fragment: Qubo, variables: Sequence[int]):
    """Dense upper-triangular coefficient matrix of ``fragment`` in ``variables`` order.

    Returns ``(matrix, offset)``.  Entries are full monomial coefficients, so
    ``energy = offset + q @ matrix @ q`` with ``q`` ordered like ``variables``.
    Off-diagonal entries are therefore twice what a symmetric-half
    convention would print.
    """
    pos = {v: k for k, v in enumerate(variables)}
    if len(pos) != len(variables):
        raise ValueError("variable list contains duplicates")
    k = len(variables)
    dtype = np.int64 if fragment.is_integer() else np.float64
    m = np.zeros((k, k), dtype=dtype)
    for i, j, c in fragment.items():
        if i not in pos or j not in pos:
            missing = i if i not in pos else j
            raise DimensionError(f"fragment references variable {missing} not in the list")
        a, b = sorted((pos[i], pos[j]))
        m[a, b] += c
    return m, fragment.offset
