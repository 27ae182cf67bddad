"""Gadget structures over a prime modulus, their twist group, and canonisation.

Starting from a connected ordered base graph, each directed edge e becomes a
class of q interchangeable "edge nodes" e_0..e_{q-1}, and each vertex v
becomes a gadget of "equation nodes": one node for every assignment
rho: E(v) -> [q] of residues to the edges leaving v whose sum hits the
prescribed value d(v).  Four binary relations tie the universe together:

* ``preorder``: a linear preorder whose classes are the edge classes (in
  directed-edge order) followed by the vertex gadgets (in vertex order);
* ``cycle``: a directed cycle e_0 -> e_1 -> ... -> e_{q-1} -> e_0 per class;
* ``inverse``: pairs (e_x, f_y) with x + y = 0 (mod q) whenever f is the
  reversal of e;
* ``link``: each equation node rho points at the edge node e_{rho(e)} for
  every edge e it constrains.

Twisting shifts whole edge classes by residues that cancel across reversed
edge pairs; the sum of the gadget values mod q is the only thing a twist can
not change, which makes it a complete isomorphism invariant over a fixed
base graph.
"""

from __future__ import annotations

import json
from itertools import product
from typing import Iterator, Mapping, Sequence

import numpy as np

from .caps import check_cap, load_caps
from .errors import InputError
from .gfp import PrimeFieldMatrix, is_prime, kernel_basis
from .relstruct import BaseGraph, RelationalStructure, Vocabulary

PREORDER = "preorder"
CYCLE = "cycle"
INVERSE = "inverse"
LINK = "link"

CFI_VOCABULARY = Vocabulary({PREORDER: 2, CYCLE: 2, INVERSE: 2, LINK: 2})

DirectedEdge = tuple[int, int]
ElementId = tuple


class CfiInstance:
    """A base graph, a prime q, and one gadget value per vertex."""

    __slots__ = ("base", "q", "d")

    def __init__(self, base: BaseGraph, q: int, d: Sequence[int]):
        if not is_prime(q):
            raise InputError(f"modulus must be prime, got {q!r}")
        d = tuple(int(x) for x in d)
        if len(d) != base.n:
            raise InputError(f"need one gadget value per vertex: {len(d)} given, {base.n} vertices")
        if any(not (0 <= x < q) for x in d):
            raise InputError(f"gadget values must lie in [0, {q})")
        self.base = base
        self.q = q
        self.d = d

    def __eq__(self, other) -> bool:
        if not isinstance(other, CfiInstance):
            return NotImplemented
        return self.base == other.base and self.q == other.q and self.d == other.d

    def __hash__(self) -> int:
        return hash((self.base, self.q, self.d))

    def __repr__(self) -> str:
        return f"CfiInstance(q={self.q}, n={self.base.n}, d={self.d})"

    def to_json(self) -> str:
        doc = {"q": self.q, "graph": json.loads(self.base.to_json()), "d": list(self.d)}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CfiInstance":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed instance JSON: {exc}") from None
        if not isinstance(doc, dict) or not {"q", "graph", "d"} <= set(doc):
            raise InputError("instance JSON needs 'q', 'graph' and 'd'")
        base = BaseGraph.from_json(json.dumps(doc["graph"]))
        return cls(base, doc["q"], doc["d"])


class TwistVector:
    """A residue per directed edge, cancelling across reversed pairs.

    These form a group under pointwise addition mod q; they act on instances
    by shifting edge-node indices, see :func:`apply_twist`.
    """

    __slots__ = ("q", "_values")

    def __init__(self, q: int, values: Mapping[DirectedEdge, int]):
        if not is_prime(q):
            raise InputError(f"modulus must be prime, got {q!r}")
        vals = {tuple(e): int(z) % q for e, z in values.items()}
        for (u, v), z in vals.items():
            rev = (v, u)
            if rev not in vals:
                raise InputError(f"edge {(u, v)} present without its reversal")
            if (z + vals[rev]) % q != 0:
                raise InputError(f"values on {(u, v)} and {rev} must cancel mod {q}")
        self.q = q
        self._values = vals

    def value(self, e: DirectedEdge) -> int:
        try:
            return self._values[tuple(e)]
        except KeyError:
            raise InputError(f"twist not defined on edge {e!r}") from None

    @property
    def edges(self) -> tuple[DirectedEdge, ...]:
        return tuple(sorted(self._values))

    def __add__(self, other: "TwistVector") -> "TwistVector":
        if not isinstance(other, TwistVector):
            return NotImplemented
        if self.q != other.q or set(self._values) != set(other._values):
            raise InputError("can only add twists over the same edges and modulus")
        return TwistVector(self.q, {e: self._values[e] + other._values[e] for e in self._values})

    def __neg__(self) -> "TwistVector":
        return TwistVector(self.q, {e: -z for e, z in self._values.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, TwistVector):
            return NotImplemented
        return self.q == other.q and self._values == other._values

    def __hash__(self) -> int:
        return hash((self.q, tuple(sorted(self._values.items()))))

    def __repr__(self) -> str:
        nz = {e: z for e, z in sorted(self._values.items()) if z}
        return f"TwistVector(q={self.q}, {nz})"

    def to_json(self) -> str:
        triples = sorted([u, v, z] for (u, v), z in self._values.items())
        return json.dumps({"q": self.q, "values": triples}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TwistVector":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed twist JSON: {exc}") from None
        return cls(doc["q"], {(u, v): z for u, v, z in doc["values"]})


def zero_twist(base: BaseGraph, q: int) -> TwistVector:
    return TwistVector(q, {e: 0 for e in base.directed_edges()})


def sigma_twist(base: BaseGraph, q: int, edge: DirectedEdge, z: int) -> TwistVector:
    """The twist that shifts by +z along ``edge`` and -z along its reversal."""
    u, v = edge
    if (min(u, v), max(u, v)) not in set(base.edges):
        raise InputError(f"{edge!r} is not an edge of the base graph")
    values = {e: 0 for e in base.directed_edges()}
    values[(u, v)] = z % q
    values[(v, u)] = -z % q
    return TwistVector(q, values)


def path_twist(base: BaseGraph, q: int, path: Sequence[int], z: int) -> TwistVector:
    """Compose single-edge twists along a simple path (or simple cycle).

    Args:
        base: the base graph.
        q: prime modulus.
        path: vertex sequence v_0, ..., v_k with k >= 1; vertices distinct,
            except that v_k = v_0 closes a cycle.
        z: shift, reduced mod q.

    Returns:
        The sum of +z twists on the path's consecutive directed edges.
        Applying it changes d only at the endpoints (+z at the start, -z at
        the end) and not at all on a simple cycle.
    """
    path = [int(v) for v in path]
    if len(path) < 2:
        raise InputError("path needs at least one edge")
    interior = path[:-1] if path[0] == path[-1] else path
    if len(set(interior)) != len(interior):
        raise InputError("path must be simple")
    edge_set = set(base.edges)
    for a, b in zip(path, path[1:]):
        if (min(a, b), max(a, b)) not in edge_set:
            raise InputError(f"consecutive path vertices {a}, {b} are not adjacent")
    total = zero_twist(base, q)
    for a, b in zip(path, path[1:]):
        total = total + sigma_twist(base, q, (a, b), z)
    return total


def gadget_assignments(inst: CfiInstance, v: int) -> list[tuple[int, ...]]:
    """All residue assignments over the edges leaving v that sum to d(v), lexicographic."""
    deg = inst.base.degree(v)
    return [
        rho
        for rho in product(range(inst.q), repeat=deg)
        if sum(rho) % inst.q == inst.d[v]
    ]


class CfiUniverse:
    """Canonical element enumeration for a built instance.

    Edge classes come first, in directed-edge order, each contributing nodes
    ("edge", e, i) for i in [q]; then one gadget per vertex, in vertex order,
    contributing ("eq", v, rho) with rho lexicographic.
    """

    __slots__ = ("elements", "index", "ranks", "q")

    def __init__(self, inst: CfiInstance, caps: Mapping | None = None):
        caps = load_caps(caps)
        q = inst.q
        for v in range(inst.base.n):
            check_cap("gadget_size", q ** max(inst.base.degree(v) - 1, 0), caps)
        elements: list[ElementId] = []
        ranks: list[int] = []
        rank = 0
        for e in inst.base.directed_edges():
            for i in range(q):
                elements.append(("edge", e, i))
                ranks.append(rank)
            rank += 1
        for v in range(inst.base.n):
            for rho in gadget_assignments(inst, v):
                elements.append(("eq", v, rho))
                ranks.append(rank)
            rank += 1
        self.elements = tuple(elements)
        self.index = {el: i for i, el in enumerate(elements)}
        self.ranks = tuple(ranks)
        self.q = q

    def __len__(self) -> int:
        return len(self.elements)


def universe_of(inst: CfiInstance, caps: Mapping | None = None) -> CfiUniverse:
    return CfiUniverse(inst, caps)


def build(inst: CfiInstance, caps: Mapping | None = None) -> RelationalStructure:
    """Materialize the four-relation structure of an instance.

    Args:
        inst: base graph, modulus, gadget values.
        caps: optional cap overrides; the per-vertex gadget size and the
            preorder materialization are both capped.

    Returns:
        A RelationalStructure over the canonical universe enumeration.
    """
    caps = load_caps(caps)
    uni = CfiUniverse(inst, caps)
    n = len(uni)
    check_cap("preorder_universe", n, caps)
    q = inst.q
    idx = uni.index

    preorder = []
    ranks = uni.ranks
    for a in range(n):
        for b in range(n):
            if ranks[a] <= ranks[b]:
                preorder.append((a, b))

    cycle = []
    inverse = []
    for e in inst.base.directed_edges():
        u, v = e
        rev = (v, u)
        for i in range(q):
            cycle.append((idx[("edge", e, i)], idx[("edge", e, (i + 1) % q)]))
            inverse.append((idx[("edge", e, i)], idx[("edge", rev, (-i) % q)]))

    link = []
    for v in range(inst.base.n):
        incident = inst.base.incident(v)
        for rho in gadget_assignments(inst, v):
            a = idx[("eq", v, rho)]
            for j, e in enumerate(incident):
                link.append((a, idx[("edge", e, rho[j])]))

    return RelationalStructure(
        CFI_VOCABULARY,
        n,
        {PREORDER: preorder, CYCLE: cycle, INVERSE: inverse, LINK: link},
    )


def iso_class(inst: CfiInstance) -> int:
    """Sum of the gadget values mod q; complete invariant over a fixed base."""
    return sum(inst.d) % inst.q


def apply_twist(inst: CfiInstance, pi: TwistVector) -> CfiInstance:
    """The instance a twist maps this one onto.

    The new gadget value at v is d(v) plus the twist values on the edges
    leaving v.  The induced element bijection is exposed separately by
    :func:`twist_bijection`.
    """
    if pi.q != inst.q:
        raise InputError(f"twist modulus {pi.q} does not match instance modulus {inst.q}")
    if set(pi.edges) != set(inst.base.directed_edges()):
        raise InputError("twist must be defined on exactly the base graph's directed edges")
    d_new = [
        (inst.d[v] + sum(pi.value(e) for e in inst.base.incident(v))) % inst.q
        for v in range(inst.base.n)
    ]
    return CfiInstance(inst.base, inst.q, d_new)


def twist_bijection(inst: CfiInstance, pi: TwistVector) -> dict[ElementId, ElementId]:
    """Element map from build(inst) onto build(apply_twist(inst, pi)).

    Edge nodes shift index by the twist value on their edge; an equation node
    rho moves to rho plus the twist restricted to its vertex's edges.
    """
    if pi.q != inst.q:
        raise InputError(f"twist modulus {pi.q} does not match instance modulus {inst.q}")
    q = inst.q
    out: dict[ElementId, ElementId] = {}
    for e in inst.base.directed_edges():
        shift = pi.value(e)
        for i in range(q):
            out[("edge", e, i)] = ("edge", e, (i + shift) % q)
    for v in range(inst.base.n):
        incident = inst.base.incident(v)
        shifts = [pi.value(e) for e in incident]
        for rho in gadget_assignments(inst, v):
            moved = tuple((r + s) % q for r, s in zip(rho, shifts))
            out[("eq", v, rho)] = ("eq", v, moved)
    return out


def _canonical_edge_order(base: BaseGraph) -> list[tuple[int, int]]:
    return list(base.edges)


def _twist_from_orientation(base: BaseGraph, q: int, x: Sequence[int]) -> TwistVector:
    values: dict[DirectedEdge, int] = {}
    for (u, v), z in zip(_canonical_edge_order(base), x):
        values[(u, v)] = z % q
        values[(v, u)] = -z % q
    return TwistVector(q, values)


def enumerate_twists(base: BaseGraph, q: int, caps: Mapping | None = None) -> Iterator[TwistVector]:
    """All q^{|E|} twists, ordered by their canonical-orientation value vectors."""
    caps = load_caps(caps)
    m = len(base.edges)
    check_cap("group_enum", q**m, caps)
    for x in product(range(q), repeat=m):
        yield _twist_from_orientation(base, q, x)


def automorphisms(inst: CfiInstance, caps: Mapping | None = None) -> list[TwistVector]:
    """All twists that fix every gadget value: zero signed sum at each vertex.

    Computed as the kernel of the signed vertex-edge incidence map over F_q,
    then enumerated as the span of the kernel basis.  The count is
    q^(|E| - |V| + 1) for a connected base.
    """
    caps = load_caps(caps)
    base, q = inst.base, inst.q
    edges = _canonical_edge_order(base)
    inc = np.zeros((base.n, len(edges)), dtype=np.int64)
    for j, (u, v) in enumerate(edges):
        inc[u, j] = 1
        inc[v, j] = (q - 1) % q
    basis = kernel_basis(PrimeFieldMatrix(q, inc))
    dim = len(basis)
    check_cap("group_enum", q**dim, caps)
    combos = []
    for coeff in product(range(q), repeat=dim):
        x = np.zeros(len(edges), dtype=np.int64)
        for c, b in zip(coeff, basis):
            x = (x + c * b) % q
        combos.append(tuple(int(t) for t in x))
    combos = sorted(set(combos))
    return [_twist_from_orientation(base, q, x) for x in combos]


def brute_iso_oracle(a: CfiInstance, b: CfiInstance, caps: Mapping | None = None) -> bool:
    """Exhaustive search for a twist mapping instance a onto instance b.

    Independent of :func:`iso_class`: it only uses the twist action on gadget
    values, scanning all q^{|E|} candidates.
    """
    if a.base != b.base:
        raise InputError("instances must share the base graph")
    if a.q != b.q:
        raise InputError("instances must share the modulus")
    caps = load_caps(caps)
    base, q = a.base, a.q
    edges = _canonical_edge_order(base)
    m = len(edges)
    check_cap("group_enum", q**m, caps)
    target = [(b.d[v] - a.d[v]) % q for v in range(base.n)]
    pos = [[] for _ in range(base.n)]
    neg = [[] for _ in range(base.n)]
    for j, (u, v) in enumerate(edges):
        pos[u].append(j)
        neg[v].append(j)
    for x in product(range(q), repeat=m):
        if all(
            (sum(x[j] for j in pos[v]) - sum(x[j] for j in neg[v])) % q == target[v]
            for v in range(base.n)
        ):
            return True
    return False


def twist_orbit(inst: CfiInstance, caps: Mapping | None = None) -> frozenset[tuple[int, ...]]:
    """All gadget-value vectors reachable from this instance by a twist."""
    caps = load_caps(caps)
    base, q = inst.base, inst.q
    edges = _canonical_edge_order(base)
    check_cap("group_enum", q ** len(edges), caps)
    pos = [[] for _ in range(base.n)]
    neg = [[] for _ in range(base.n)]
    for j, (u, v) in enumerate(edges):
        pos[u].append(j)
        neg[v].append(j)
    seen = set()
    for x in product(range(q), repeat=len(edges)):
        d_new = tuple(
            (inst.d[v] + sum(x[j] for j in pos[v]) - sum(x[j] for j in neg[v])) % q
            for v in range(base.n)
        )
        seen.add(d_new)
    return frozenset(seen)


def canonical_instance(inst: CfiInstance) -> CfiInstance:
    """The class representative: all of the invariant moved onto vertex 0."""
    z = iso_class(inst)
    d = [0] * inst.base.n
    d[0] = z
    return CfiInstance(inst.base, inst.q, d)


def canonical_form(inst: CfiInstance, caps: Mapping | None = None) -> RelationalStructure:
    """Materialized structure of the class representative.

    Two instances over the same base graph get identical canonical forms
    exactly when they are isomorphic.
    """
    return build(canonical_instance(inst), caps)
