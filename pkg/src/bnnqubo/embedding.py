"""Minor embedding of QUBO interaction graphs onto sparse hardware graphs.

A logical variable becomes a *chain*: a connected set of physical nodes tied
together by equality penalties ``S (p + q - 2 p q)`` along a spanning tree.
Two search back ends are available.  The built-in greedy router places
variables in connected degree-first order, rooting each chain at the node
with the cheapest weighted paths to all placed neighbours; shared nodes are
priced exponentially and removed by rip-up-and-reroute passes.  Dense
training graphs need the stronger search of the minorminer package, used by
default when it is installed.  Verification, QUBO embedding and unembedding
are independent of the back end.
"""

from __future__ import annotations

import json
import random
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import DimensionError, EmbeddingNotFound, ParseError
from .qubo import Qubo

__all__ = [
    "HardwareGraph",
    "ChainEmbedding",
    "EmbeddedQubo",
    "complete_graph",
    "grid_graph",
    "chimera_graph",
    "generate_topology",
    "load_topology",
    "save_topology",
    "logical_graph",
    "find_embedding",
    "verify_embedding",
    "embed_qubo",
    "unembed",
    "default_chain_strength",
]


@dataclass
class HardwareGraph:
    """Simple undirected graph on integer nodes."""

    graph: nx.Graph

    def __post_init__(self):
        if any(u == v for u, v in self.graph.edges):
            raise ValueError("hardware graphs cannot contain self-loops")

    @property
    def num_nodes(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def num_edges(self) -> int:
        return self.graph.number_of_edges()

    def edges(self) -> list[tuple[int, int]]:
        return sorted((min(u, v), max(u, v)) for u, v in self.graph.edges)

    def neighbors(self, n):
        return self.graph.adj[n]


def complete_graph(n: int) -> HardwareGraph:
    if n < 1:
        raise ValueError("graph size must be positive")
    return HardwareGraph(nx.complete_graph(n))


def grid_graph(w: int, h: int) -> HardwareGraph:
    if w < 1 or h < 1:
        raise ValueError("grid dimensions must be positive")
    g = nx.grid_2d_graph(h, w)
    return HardwareGraph(nx.relabel_nodes(g, {(r, c): r * w + c for r, c in g.nodes}))


def chimera_graph(m: int, t: int = 4) -> HardwareGraph:
    """``m x m`` grid of ``K_{t,t}`` cells.

    Node ``((r * m + c) * 2 + side) * t + k``; side 0 couples vertically to
    the same qubit in the cell below, side 1 horizontally to the cell on the right.
    """
    if m < 1 or t < 1:
        raise ValueError("chimera dimensions must be positive")

    def node(r, c, side, k):
        return ((r * m + c) * 2 + side) * t + k

    g = nx.Graph()
    g.add_nodes_from(range(2 * t * m * m))
    for r in range(m):
        for c in range(m):
            for a in range(t):
                for b in range(t):
                    g.add_edge(node(r, c, 0, a), node(r, c, 1, b))
                if r + 1 < m:
                    g.add_edge(node(r, c, 0, a), node(r + 1, c, 0, a))
                if c + 1 < m:
                    g.add_edge(node(r, c, 1, a), node(r, c + 1, 1, a))
    return HardwareGraph(g)


def generate_topology(spec: str) -> HardwareGraph:
    """Parse ``complete:N``, ``grid:WxH`` or ``chimera:M[,T]``."""
    try:
        kind, _, arg = spec.partition(":")
        if kind == "complete":
            return complete_graph(int(arg))
        if kind == "grid":
            w, h = arg.lower().split("x")
            return grid_graph(int(w), int(h))
        if kind == "chimera":
            parts = [int(p) for p in arg.split(",")]
            return chimera_graph(*parts)
    except ValueError as exc:
        raise ValueError(f"bad topology {spec!r}: {exc}") from None
    raise ValueError(f"unknown topology kind {kind!r}")


def load_topology(text: str, source=None) -> HardwareGraph:
    """Edge list, one ``u v`` pair per line; ``#`` starts a comment."""
    g = nx.Graph()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if not body:
            continue
        if len(body) != 2:
            raise ParseError(f"expected 'u v', got {len(body)} fields", lineno, source)
        try:
            u, v = int(body[0]), int(body[1])
        except ValueError:
            raise ParseError("node ids must be integers", lineno, source) from None
        if u == v:
            raise ParseError(f"self-loop on node {u}", lineno, source)
        g.add_edge(u, v)
    return HardwareGraph(g)


def save_topology(hw: HardwareGraph) -> str:
    return "".join(f"{u} {v}\n" for u, v in hw.edges())


def logical_graph(qubo: Qubo) -> nx.Graph:
    """Interaction graph: every variable is a node, nonzero couplings are edges."""
    g = nx.Graph()
    g.add_nodes_from(range(qubo.num_vars))
    g.add_edges_from((i, j) for i, j, _ in qubo.quadratic_items())
    return g


@dataclass
class ChainEmbedding:
    """Logical variable -> sorted list of physical nodes."""

    chains: dict[int, list[int]]

    def __post_init__(self):
        self.chains = {int(v): sorted(int(p) for p in c) for v, c in self.chains.items()}

    def physical_nodes(self) -> list[int]:
        """Sorted physical nodes in use; defines the embedded QUBO's index order."""
        return sorted(p for c in self.chains.values() for p in c)

    def total_qubits(self) -> int:
        return sum(len(c) for c in self.chains.values())

    def max_chain_length(self) -> int:
        return max((len(c) for c in self.chains.values()), default=0)

    def spanning_tree(self, v: int, hw: HardwareGraph) -> list[tuple[int, int]]:
        """BFS tree of chain ``v`` rooted at its smallest node."""
        chain = self.chains[v]
        members = set(chain)
        seen = {chain[0]}
        edges = []
        queue = deque([chain[0]])
        while queue:
            p = queue.popleft()
            for n in sorted(hw.neighbors(p)):
                if n in members and n not in seen:
                    seen.add(n)
                    edges.append((p, n))
                    queue.append(n)
        if len(seen) != len(chain):
            raise ValueError(f"chain of variable {v} is not connected")
        return edges

    def to_json(self) -> dict:
        return {str(v): c for v, c in sorted(self.chains.items())}

    @classmethod
    def from_json(cls, data: Mapping) -> "ChainEmbedding":
        return cls({int(v): list(c) for v, c in data.items()})


def verify_embedding(emb: ChainEmbedding, logical_edges: Iterable[tuple[int, int]], hw: HardwareGraph) -> list[str]:
    """Return a list of problems; empty means the embedding is valid."""
    problems = []
    owner: dict[int, int] = {}
    adj = {n: set(hw.graph.adj[n]) for n in hw.graph.nodes}
    for v, chain in emb.chains.items():
        if not chain:
            problems.append(f"variable {v} has an empty chain")
            continue
        for p in chain:
            if p not in adj:
                problems.append(f"variable {v} uses unknown node {p}")
            elif p in owner:
                problems.append(f"node {p} shared by variables {owner[p]} and {v}")
            else:
                owner[p] = v
        members = set(chain) & adj.keys()
        if members:
            start = next(iter(members))
            reached, stack = {start}, [start]
            while stack:
                for n in adj[stack.pop()] & members:
                    if n not in reached:
                        reached.add(n)
                        stack.append(n)
            if reached != members:
                problems.append(f"chain of variable {v} is disconnected")
    for u, v in logical_edges:
        if u not in emb.chains or v not in emb.chains:
            problems.append(f"logical edge ({u}, {v}) has an unplaced endpoint")
            continue
        cv = set(emb.chains[v])
        if not any(adj.get(p, set()) & cv for p in emb.chains[u]):
            problems.append(f"no coupler between chains of {u} and {v}")
    return problems


class _Router:
    """Weighted shortest-path chain placement on a fixed hardware graph.

    A node used by ``u`` other chains costs ``base ** u`` to enter, so
    overlaps are allowed but expensive and get squeezed out over rounds.
    """

    def __init__(self, hw: HardwareGraph):
        self.nodes = sorted(hw.graph.nodes)
        self.pos = {p: k for k, p in enumerate(self.nodes)}
        n = len(self.nodes)
        rows = [sorted(self.pos[m] for m in hw.neighbors(p)) for p in self.nodes]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        self.indptr[1:] = np.cumsum([len(r) for r in rows])
        self.indices = np.array([m for r in rows for m in r], dtype=np.int64)
        self.base = float(max(2, self._diameter_estimate()))

    def _diameter_estimate(self) -> int:
        far, best = 0, 0
        for _ in range(2):
            dist = {far: 0}
            queue = deque([far])
            while queue:
                p = queue.popleft()
                for m in self.indices[self.indptr[p]:self.indptr[p + 1]]:
                    if m not in dist:
                        dist[m] = dist[p] + 1
                        queue.append(m)
            far = max(dist, key=dist.get)
            best = max(best, dist[far])
        return best

    def place(self, neighbour_chains: list[set], usage: np.ndarray, rng: random.Random, base=None) -> set:
        weight = (base or self.base) ** usage.astype(np.float64)
        if not neighbour_chains:
            low = usage.min()
            return {rng.choice(np.flatnonzero(usage == low).tolist())}
        graph = csr_matrix((weight[self.indices], self.indices, self.indptr), shape=(len(weight),) * 2)
        total = weight * (1 - len(neighbour_chains))
        routes = []
        for chain in neighbour_chains:
            dist, pred, _ = dijkstra(
                graph, directed=True, indices=sorted(chain), min_only=True, return_predecessors=True
            )
            members = sorted(chain)
            dist[members] = weight[members]  # rooting inside a neighbour chain still pays for the node
            total = total + dist
            routes.append((pred, chain))
        low = total.min()
        if not np.isfinite(low):
            return set()
        ties = np.flatnonzero(total <= low + 1e-9 * max(1.0, abs(low)))
        root = int(rng.choice(ties.tolist()))
        chain = {root}
        for pred, source in routes:
            p = root
            while p not in source:
                chain.add(p)
                p = int(pred[p])
        return chain


def _embed_attempt(order, lg: nx.Graph, router: _Router, rng: random.Random, rounds: int):
    usage = np.zeros(len(router.nodes), dtype=np.int64)
    chains: dict = {}

    def reroute(v, base):
        nbrs = [chains[u] for u in lg.adj[v] if u in chains and u != v]
        c = router.place(nbrs, usage, rng, base)
        if not c:
            return False
        chains[v] = c
        usage[list(c)] += 1
        return True

    for v in order:
        if not reroute(v, router.base):
            return chains, usage, False
    for r in range(rounds):
        if usage.max(initial=0) <= 1:
            break
        # overlaps get pricier every round so long free detours eventually win
        base = min(router.base * 2.0 ** (r + 1), 1e12)
        for v in order:
            usage[list(chains.pop(v))] -= 1
            if not reroute(v, base):
                return chains, usage, False
    return chains, usage, usage.max(initial=0) <= 1


def _frontier_order(lg: nx.Graph, tiebreak: dict) -> list:
    """Highest degree first, then always the highest-degree variable touching the placed set.

    Each new variable (except the first of each component) therefore has a
    placed neighbour to grow from, which keeps chains local.
    """
    placed: set = set()
    order = []
    remaining = set(lg.nodes)
    while remaining:
        start = min(remaining, key=lambda v: (-lg.degree[v], tiebreak[v]))
        frontier = {start}
        while frontier:
            v = min(frontier, key=lambda u: (-lg.degree[u], tiebreak[u]))
            frontier.discard(v)
            placed.add(v)
            remaining.discard(v)
            order.append(v)
            frontier.update(u for u in lg.adj[v] if u not in placed)
    return order


def _minorminer_attempt(lg: nx.Graph, hw: HardwareGraph, seed: int, timeout: float):
    import minorminer

    found = minorminer.find_embedding(
        list(lg.edges), list(hw.graph.edges), random_seed=seed, threads=1, timeout=timeout
    )
    chains = {int(v): sorted(int(p) for p in c) for v, c in found.items()}
    if lg.number_of_edges() and not chains:
        return chains, False
    # isolated variables are invisible to an edge-list embedder
    used = {p for c in chains.values() for p in c}
    free = sorted(set(hw.graph.nodes) - used)
    for v in sorted(lg.nodes):
        if v not in chains:
            if not free:
                return chains, False
            chains[v] = [free.pop(0)]
    return chains, True


def _have_minorminer() -> bool:
    try:
        import minorminer  # noqa: F401
    except ImportError:
        return False
    return True


def find_embedding(
    logical: nx.Graph | Qubo,
    hw: HardwareGraph,
    seed: int = 0,
    retries: int = 10,
    method: str = "auto",
    rounds: int = 30,
    timeout: float = 60.0,
) -> ChainEmbedding:
    """Chain embedding of ``logical`` into ``hw``.

    ``method="greedy"`` places variables in connected degree-first order,
    rooting each chain at the node minimising the summed weighted path cost
    to its placed neighbours, then rips up and re-routes overlapping chains
    for up to ``rounds`` passes.  It is adequate for small or loosely
    coupled graphs.  ``method="minorminer"`` delegates the search to the
    minorminer package, which copes with the degree-12 training graphs on
    chimera; ``"auto"`` uses minorminer when importable.

    Attempt ``k`` is seeded with ``seed * 1_000_003 + k``; the first valid
    embedding wins.  Every result is checked by :func:`verify_embedding`.
    """
    lg = logical_graph(logical) if isinstance(logical, Qubo) else logical
    if lg.number_of_nodes() == 0 or hw.num_nodes == 0:
        raise ValueError("cannot embed into or from an empty graph")
    if lg.number_of_nodes() > hw.num_nodes:
        raise EmbeddingNotFound(
            f"{lg.number_of_nodes()} variables cannot fit on {hw.num_nodes} qubits"
        )
    if method == "auto":
        method = "minorminer" if _have_minorminer() else "greedy"
    if method not in ("greedy", "minorminer"):
        raise ValueError(f"unknown embedding method {method!r}")
    router = _Router(hw) if method == "greedy" else None
    best_partial: dict[int, list[int]] = {}
    for attempt in range(max(1, retries)):
        attempt_seed = seed * 1_000_003 + attempt
        if method == "minorminer":
            named, ok = _minorminer_attempt(lg, hw, attempt_seed, timeout)
            clean = named if ok else {}
        else:
            rng = random.Random(attempt_seed)
            jitter = {v: (rng.random() if attempt else 0.0, v) for v in lg.nodes}
            order = _frontier_order(lg, jitter)
            chains, usage, ok = _embed_attempt(order, lg, router, rng, rounds)
            named = {v: [router.nodes[k] for k in c] for v, c in chains.items()}
            clean = {v: c for v, c in named.items() if all(usage[k] == 1 for k in chains[v])}
        if ok:
            emb = ChainEmbedding(named)
            problems = verify_embedding(emb, lg.edges, hw)
            if not problems:
                return emb
        if len(clean) > len(best_partial):
            best_partial = clean
    raise EmbeddingNotFound(
        f"no embedding after {max(1, retries)} attempts; best placed "
        f"{len(best_partial)} of {lg.number_of_nodes()} variables without overlap",
        partial=best_partial,
    )


def default_chain_strength(qubo: Qubo):
    """Twice the largest absolute coefficient of ``qubo``."""
    s = 2 * qubo.max_abs_coefficient()
    if s == 0:
        warnings.warn("all-zero QUBO: chain strength is 0, chains are unconstrained", stacklevel=2)
    return s


def _split(value, parts: int) -> list:
    """Split ``value`` into ``parts`` near-equal shares that sum back exactly."""
    if isinstance(value, (int, np.integer)):
        base, rem = divmod(int(value), parts)
        return [base + (1 if k < rem else 0) for k in range(parts)]
    return [value / parts] * parts


@dataclass
class EmbeddedQubo:
    """Physical QUBO; index ``k`` is physical node ``nodes[k]``."""

    qubo: Qubo
    chain_strength: object
    embedding: ChainEmbedding
    nodes: list[int] = field(default_factory=list)

    def expand(self, logical_bits) -> np.ndarray:
        """Chain-consistent physical assignment for a logical one."""
        logical_bits = np.asarray(logical_bits, dtype=np.int8)
        pos = {p: k for k, p in enumerate(self.nodes)}
        out = np.zeros(len(self.nodes), dtype=np.int8)
        for v, chain in self.embedding.chains.items():
            for p in chain:
                out[pos[p]] = logical_bits[v]
        return out


def embed_qubo(qubo: Qubo, emb: ChainEmbedding, hw: HardwareGraph, chain_strength=None) -> EmbeddedQubo:
    """Spread ``qubo`` over the chains of ``emb`` and tie each chain together.

    Linear terms are split over a chain's nodes and couplings over all
    couplers joining the two chains; integer coefficients are split into
    integer shares so chain-consistent energies are reproduced exactly.
    """
    lg = logical_graph(qubo)
    missing = [v for v in range(qubo.num_vars) if v not in emb.chains]
    problems = verify_embedding(emb, lg.edges, hw)
    if missing or problems:
        raise ValueError(f"invalid embedding: {(problems + [f'unplaced {missing}'])[:5]}")
    S = default_chain_strength(qubo) if chain_strength is None else chain_strength
    nodes = emb.physical_nodes()
    pos = {p: k for k, p in enumerate(nodes)}
    phys = Qubo(len(nodes), offset=qubo.offset)
    for i, j, c in qubo.items():
        if i == j:
            chain = emb.chains[i]
            for p, share in zip(chain, _split(c, len(chain))):
                phys.add_term(pos[p], pos[p], share)
        else:
            cj = set(emb.chains[j])
            couplers = [(p, n) for p in emb.chains[i] for n in sorted(hw.neighbors(p)) if n in cj]
            for (p, n), share in zip(couplers, _split(c, len(couplers))):
                phys.add_term(pos[p], pos[n], share)
    for v in emb.chains:
        for p, n in emb.spanning_tree(v, hw):
            phys.add_term(pos[p], pos[p], S)
            phys.add_term(pos[n], pos[n], S)
            phys.add_term(pos[p], pos[n], -2 * S)
    return EmbeddedQubo(phys, S, emb, nodes)


def unembed(bits, emb: ChainEmbedding, num_logical: int | None = None) -> tuple[np.ndarray, float]:
    """Majority vote per chain (ties -> 0) and the fraction of broken chains.

    ``bits`` is indexed like :meth:`ChainEmbedding.physical_nodes`.
    """
    nodes = emb.physical_nodes()
    bits = np.asarray(bits, dtype=np.int8)
    if bits.shape != (len(nodes),):
        raise DimensionError(f"sample has {bits.size} bits, embedding uses {len(nodes)} qubits")
    pos = {p: k for k, p in enumerate(nodes)}
    n = num_logical if num_logical is not None else max(emb.chains, default=-1) + 1
    out = np.zeros(n, dtype=np.int8)
    broken = 0
    for v, chain in emb.chains.items():
        ones = sum(int(bits[pos[p]]) for p in chain)
        out[v] = 1 if 2 * ones > len(chain) else 0
        if 0 < ones < len(chain):
            broken += 1
    frac = broken / len(emb.chains) if emb.chains else 0.0
    return out, frac


def embedding_to_json(emb: ChainEmbedding) -> str:
    return json.dumps(emb.to_json())
