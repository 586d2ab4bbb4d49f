"""Compile BNN training on a dataset into one QUBO.

Variables (all bits, spin ``s`` maps to ``q = (s + 1) / 2``):

* ``W[l,j,i]``          weight of input ``i`` into neuron ``j`` of weight layer ``l``; shared by all data
* ``y[d,l,i]``          hidden activation ``i`` of layer ``l >= 1`` for datum ``d``
* ``Z[d,l,i,j]``        product ``W[l,j,i] * y[d,l,i]`` as a bit (XNOR)
* ``b[d,l,i,j]``        product ancilla of the XNOR gadget (``q_W * q_y``)
* ``a[d,l,j,k]``        bit ``k`` of the popcount of neuron ``j``'s products
* ``out[d]``            network output for datum ``d``

Layer-0 activations are data, so they enter the gadgets as constants.  With
``fold_constant_inputs`` the layer-0 products are also replaced by
``q_W`` or ``1 - q_W`` and their gadgets disappear.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bnn import BnnArchitecture, LabeledDataset, WeightSet, forward_trace
from .errors import DimensionError
from .penalties import (
    Fixed,
    MajorityGadget,
    Negated,
    XnorGadget,
    add_majority_penalty,
    add_xnor_penalty,
    count_bits,
)
from .qubo import Qubo
from . import qubo as qubo_io

__all__ = [
    "VarKey",
    "VarRegistry",
    "BuildOptions",
    "AuditReport",
    "expected_num_vars",
    "build_training_qubo",
    "witness_assignment",
    "decode_weights",
    "audit",
    "interaction_graph",
    "graph_to_dot",
    "graph_to_json",
    "instance_bundle",
    "load_instance_bundle",
]


class VarKey(NamedTuple):
    """Typed variable name.  Unused fields are ``-1``."""

    kind: str
    d: int = -1
    layer: int = -1
    i: int = -1
    j: int = -1

    def __str__(self):
        fields = {
            "W": (self.layer, self.j, self.i),
            "y": (self.d, self.layer, self.i),
            "Z": (self.d, self.layer, self.i, self.j),
            "b": (self.d, self.layer, self.i, self.j),
            "a": (self.d, self.layer, self.i, self.j),
            "out": (self.d,),
        }[self.kind]
        return f"{self.kind}[{','.join(map(str, fields))}]"


def Weight(layer, j, i):
    return VarKey("W", layer=layer, i=i, j=j)


def Activation(d, layer, i):
    return VarKey("y", d=d, layer=layer, i=i)


def Product(d, layer, i, j):
    return VarKey("Z", d=d, layer=layer, i=i, j=j)


def MulAncilla(d, layer, i, j):
    return VarKey("b", d=d, layer=layer, i=i, j=j)


def SumAncilla(d, layer, j, k):
    # stored as (i=j neuron, j=k bit) so that str() reads a[d,l,j,k]
    return VarKey("a", d=d, layer=layer, i=j, j=k)


def Output(d):
    return VarKey("out", d=d)


class VarRegistry:
    """Bijection between :class:`VarKey` and dense indices ``0..N-1``.

    Ordering: all weights (layer, neuron, input), then one block per datum
    holding activations, products, product ancillas, sum ancillas and the
    output, in that order.
    """

    def __init__(self, arch: BnnArchitecture, num_data: int, fold_constant_inputs: bool = False):
        if num_data < 1:
            raise ValueError("dataset is empty")
        self.arch = arch
        self.num_data = num_data
        self.fold = fold_constant_inputs
        self._keys: list[VarKey] = []
        self._index: dict[VarKey, int] = {}
        s = arch.layer_sizes
        L = arch.num_layers
        for l in range(L):
            for j in range(s[l + 1]):
                for i in range(s[l]):
                    self._add(Weight(l, j, i))
        self.num_weights = len(self._keys)
        for d in range(num_data):
            for l in range(1, L):
                for i in range(s[l]):
                    self._add(Activation(d, l, i))
            for kind in (Product, MulAncilla):
                for l in range(L):
                    if l == 0 and fold_constant_inputs:
                        continue
                    for j in range(s[l + 1]):
                        for i in range(s[l]):
                            self._add(kind(d, l, i, j))
            for l in range(L):
                for j in range(s[l + 1]):
                    for k in range(count_bits(s[l]) - 1):
                        self._add(SumAncilla(d, l, j, k))
            self._add(Output(d))

    def _add(self, key: VarKey):
        self._index[key] = len(self._keys)
        self._keys.append(key)

    def __len__(self):
        return len(self._keys)

    def __getitem__(self, key: VarKey) -> int:
        return self._index[key]

    def __contains__(self, key):
        return key in self._index

    def key(self, index: int) -> VarKey:
        return self._keys[index]

    @property
    def keys(self) -> list[VarKey]:
        return list(self._keys)

    def names(self) -> list[str]:
        return [str(k) for k in self._keys]

    def weight_indices(self) -> list[int]:
        return list(range(self.num_weights))


def expected_num_vars(arch: BnnArchitecture, num_data: int, fold_constant_inputs: bool = False) -> int:
    """Closed-form variable count of :func:`build_training_qubo`."""
    s = arch.layer_sizes
    L = arch.num_layers
    products = sum(s[l] * s[l + 1] for l in range(L))
    if fold_constant_inputs:
        products -= s[0] * s[1]
    hidden = sum(s[1:-1])
    sum_anc = sum(s[l + 1] * (count_bits(s[l]) - 1) for l in range(L))
    return arch.num_weights + num_data * (hidden + 2 * products + sum_anc + 1)


@dataclass(frozen=True)
class BuildOptions:
    penalty: int = 50
    fold_constant_inputs: bool = False

    def __post_init__(self):
        if self.penalty < 1:
            raise ValueError("penalty must be a positive integer")


def _bit(spin) -> int:
    return (int(spin) + 1) // 2


def build_training_qubo(
    arch: BnnArchitecture, ds: LabeledDataset, opts: BuildOptions | None = None
) -> tuple[Qubo, VarRegistry]:
    """QUBO whose ground energy equals the minimum misclassification count.

    Sum over data of the label term ``(q_out - label_bit)**2`` plus one XNOR
    gadget per weight/input product and one majority gadget per neuron.
    """
    opts = opts or BuildOptions()
    ds.check(arch)
    D = len(ds)
    P = opts.penalty
    if P <= D:
        warnings.warn(
            f"penalty {P} <= dataset size {D}: the loss can pay for a constraint violation",
            stacklevel=2,
        )
    reg = VarRegistry(arch, D, opts.fold_constant_inputs)
    q = Qubo(len(reg), var_names=reg.names())
    s = arch.layer_sizes
    L = arch.num_layers
    for d in range(D):
        acts = [Fixed(_bit(v)) for v in ds.inputs[d]]
        for l in range(L):
            for j in range(s[l + 1]):
                inputs = []
                for i in range(s[l]):
                    w = reg[Weight(l, j, i)]
                    if l == 0 and opts.fold_constant_inputs:
                        inputs.append(w if acts[i].value == 1 else Negated(w))
                        continue
                    z = reg[Product(d, l, i, j)]
                    add_xnor_penalty(q, XnorGadget(w, acts[i], z, reg[MulAncilla(d, l, i, j)], P))
                    inputs.append(z)
                out = reg[Output(d)] if l == L - 1 else reg[Activation(d, l + 1, j)]
                anc = [reg[SumAncilla(d, l, j, k)] for k in range(count_bits(s[l]) - 1)]
                add_majority_penalty(q, MajorityGadget(inputs, out, anc, P))
            if l < L - 1:
                acts = [reg[Activation(d, l + 1, j)] for j in range(s[l + 1])]
        label = _bit(ds.labels[d])
        q.add_linear(reg[Output(d)], 1 - 2 * label)
        q.add_offset(label)
    return q, reg


def witness_assignment(
    arch: BnnArchitecture, ds: LabeledDataset, w: WeightSet, reg: VarRegistry
) -> np.ndarray:
    """The feasible assignment induced by ``w``: zero penalty, energy = training loss."""
    w.check(arch)
    ds.check(arch)
    if len(ds) != reg.num_data:
        raise DimensionError(f"registry built for {reg.num_data} data, got {len(ds)}")
    bits = np.zeros(len(reg), dtype=np.int8)
    bits[: reg.num_weights] = w.to_bits()
    s = arch.layer_sizes
    L = arch.num_layers
    for d in range(len(ds)):
        trace = forward_trace(w, ds.inputs[d])
        for l in range(L):
            m = w.matrices[l]
            for j in range(s[l + 1]):
                ones = 0
                for i in range(s[l]):
                    z = int(m[j, i]) * int(trace[l][i])
                    ones += _bit(z)
                    key = Product(d, l, i, j)
                    if key in reg:
                        bits[reg[key]] = _bit(z)
                        bits[reg[MulAncilla(d, l, i, j)]] = _bit(m[j, i]) * _bit(trace[l][i])
                n = count_bits(s[l])
                for k in range(n - 1):
                    bits[reg[SumAncilla(d, l, j, k)]] = (ones >> k) & 1
                msb = (ones >> (n - 1)) & 1
                assert msb == _bit(trace[l + 1][j])
                if l == L - 1:
                    bits[reg[Output(d)]] = msb
                else:
                    bits[reg[Activation(d, l + 1, j)]] = msb
    return bits


def decode_weights(bits, reg: VarRegistry) -> WeightSet:
    bits = np.asarray(bits, dtype=np.int8)
    if bits.shape != (len(reg),):
        raise DimensionError(f"assignment has {bits.size} bits, registry has {len(reg)}")
    return WeightSet.from_bits(reg.arch, bits[: reg.num_weights])


@dataclass
class AuditReport:
    xnor_violations: int
    majority_violations: int
    output_loss: int
    recomputed_loss: int
    per_datum_output_loss: list[int] = field(default_factory=list)
    per_datum_recomputed_loss: list[int] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.xnor_violations == 0 and self.majority_violations == 0

    @property
    def diverged(self) -> bool:
        return self.per_datum_output_loss != self.per_datum_recomputed_loss

    def to_json(self) -> dict:
        return {
            "xnor_violations": self.xnor_violations,
            "majority_violations": self.majority_violations,
            "output_loss": self.output_loss,
            "recomputed_loss": self.recomputed_loss,
            "feasible": self.feasible,
            "diverged": self.diverged,
            "per_datum_output_loss": self.per_datum_output_loss,
            "per_datum_recomputed_loss": self.per_datum_recomputed_loss,
        }


def audit(bits, reg: VarRegistry, arch: BnnArchitecture, ds: LabeledDataset) -> AuditReport:
    """Count violated gadgets and compare the output-bit loss with a real forward pass."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.shape != (len(reg),):
        raise DimensionError(f"assignment has {bits.size} bits, registry has {len(reg)}")
    w = decode_weights(bits, reg)
    s = arch.layer_sizes
    L = arch.num_layers
    xnor_bad = maj_bad = 0
    out_losses, true_losses = [], []
    for d in range(len(ds)):
        acts = [_bit(v) for v in ds.inputs[d]]
        for l in range(L):
            next_acts = []
            for j in range(s[l + 1]):
                ones = 0
                for i in range(s[l]):
                    qw = int(bits[reg[Weight(l, j, i)]])
                    key = Product(d, l, i, j)
                    if key in reg:
                        qz = int(bits[reg[key]])
                        qb = int(bits[reg[MulAncilla(d, l, i, j)]])
                        if qz != 1 - (qw ^ acts[i]) or qb != qw * acts[i]:
                            xnor_bad += 1
                    else:
                        qz = 1 - (qw ^ acts[i])
                    ones += qz
                n = count_bits(s[l])
                out_key = Output(d) if l == L - 1 else Activation(d, l + 1, j)
                encoded = sum(int(bits[reg[SumAncilla(d, l, j, k)]]) << k for k in range(n - 1))
                encoded += int(bits[reg[out_key]]) << (n - 1)
                if encoded != ones:
                    maj_bad += 1
                next_acts.append(int(bits[reg[out_key]]))
            acts = next_acts
        label = _bit(ds.labels[d])
        out_losses.append(int(bits[reg[Output(d)]] != label))
        y = forward_trace(w, ds.inputs[d])[-1][0]
        true_losses.append(int(y != ds.labels[d]))
    return AuditReport(
        xnor_violations=xnor_bad,
        majority_violations=maj_bad,
        output_loss=sum(out_losses),
        recomputed_loss=sum(true_losses),
        per_datum_output_loss=out_losses,
        per_datum_recomputed_loss=true_losses,
    )


# -- graph export --------------------------------------------------------


def interaction_graph(q: Qubo, reg: VarRegistry | None = None) -> dict:
    """Nodes are variables, edges are nonzero couplings."""
    names = reg.names() if reg is not None else (q.var_names or [str(i) for i in range(q.num_vars)])
    nodes = [
        {"id": i, "label": names[i], "kind": reg.key(i).kind if reg is not None else None, "bias": q.get(i, i)}
        for i in range(q.num_vars)
    ]
    edges = [
        {"source": i, "target": j, "weight": c, "sign": "+" if c > 0 else "-"}
        for i, j, c in q.quadratic_items()
    ]
    return {"nodes": nodes, "edges": edges}


_KIND_COLORS = {"W": "red", "y": "blue", "Z": "green", "b": "orange", "a": "purple", "out": "black"}


def graph_to_dot(graph: dict) -> str:
    lines = ["graph qubo {"]
    for n in graph["nodes"]:
        color = _KIND_COLORS.get(n["kind"], "gray")
        lines.append(f'  {n["id"]} [label="{n["label"]}", color={color}];')
    for e in graph["edges"]:
        style = "solid" if e["sign"] == "+" else "dashed"
        lines.append(f'  {e["source"]} -- {e["target"]} [weight={e["weight"]}, style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(graph: dict) -> str:
    """JSON adjacency list: ``{"nodes": [...], "adjacency": {id: [[nbr, weight], ...]}}``."""
    adj: dict[int, list] = {n["id"]: [] for n in graph["nodes"]}
    for e in graph["edges"]:
        adj[e["source"]].append([e["target"], e["weight"]])
        adj[e["target"]].append([e["source"], e["weight"]])
    return json.dumps({"nodes": graph["nodes"], "adjacency": {str(k): v for k, v in adj.items()}}, default=str)


# -- instance bundles ----------------------------------------------------


def instance_bundle(
    arch: BnnArchitecture, ds: LabeledDataset, opts: BuildOptions, q: Qubo, metadata: dict | None = None
) -> dict:
    return {
        "schema": "bnnqubo.instance/1",
        "architecture": list(arch.layer_sizes),
        "dataset": ds.to_json(),
        "options": {"penalty": opts.penalty, "fold_constant_inputs": opts.fold_constant_inputs},
        "metadata": metadata or {},
        "qubo": qubo_io.to_dict(q),
    }


def load_instance_bundle(data: dict):
    """Inverse of :func:`instance_bundle`: ``(arch, ds, opts, qubo, registry)``."""
    arch = BnnArchitecture(data["architecture"])
    ds = LabeledDataset.from_json(data["dataset"])
    opts = BuildOptions(**data["options"])
    q = qubo_io.from_dict(data["qubo"])
    reg = VarRegistry(arch, len(ds), opts.fold_constant_inputs)
    if len(reg) != q.num_vars:
        raise DimensionError(f"bundle QUBO has {q.num_vars} variables, registry {len(reg)}")
    return arch, ds, opts, q, reg
