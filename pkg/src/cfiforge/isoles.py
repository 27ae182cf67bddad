"""Linear-system isomorphism test for gadget structures.

Given a materialized gadget structure, this module rebuilds its shape (edge
classes, vertex gadgets, base graph) from the relations alone and assembles a
linear system over F_q whose variables are the edge nodes plus one variable
per base vertex:

1. around each edge class, consecutive cycle nodes differ by one;
2. paired inverse nodes sum to zero;
3. each vertex variable equals the sum of the edge nodes any one of its
   equation nodes links to;
4. the vertex variables sum to a chosen residue z.

The system is solvable exactly when z matches the structure's hidden
invariant, and a solution can be decoded into an explicit isomorphism onto
the instance whose gadget values are the solved vertex variables.  The
builder sees only the relations, so nothing here peeks at the gadget values
used to construct the input.
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

import numpy as np

from .cfi import CYCLE, INVERSE, LINK, PREORDER, CfiInstance, build as build_cfi, universe_of
from .errors import ConsistencyError, InputError
from .gfp import LinearSystem, PrimeFieldMatrix, is_prime, is_solvable
from .relstruct import BaseGraph, RelationalStructure


class CfiShape:
    """Everything recoverable from a gadget structure without its d vector.

    Attributes:
        q: size of every edge class (validated prime).
        base: the reconstructed base graph.
        edge_classes: per class, the node list in element order.
        class_edge: per class, the directed base edge it represents.
        class_of_edge: inverse of class_edge.
        node_class: edge node -> its class id.
        vertex_nodes: per base vertex, its equation nodes in element order.
        links: equation node -> tuple of linked edge nodes, one per incident
            class, ordered like base.incident(vertex).
    """

    __slots__ = (
        "q",
        "base",
        "edge_classes",
        "class_edge",
        "class_of_edge",
        "node_class",
        "vertex_nodes",
        "links",
    )

    def __init__(self, q, base, edge_classes, class_edge, node_class, vertex_nodes, links):
        self.q = q
        self.base = base
        self.edge_classes = edge_classes
        self.class_edge = class_edge
        self.class_of_edge = {e: c for c, e in enumerate(class_edge)}
        self.node_class = node_class
        self.vertex_nodes = vertex_nodes
        self.links = links


def _preorder_classes(structure: RelationalStructure) -> list[list[int]]:
    """Split the universe into the mutual-preorder classes, in preorder rank order."""
    pre = structure.relation(PREORDER)
    n = structure.universe_size
    below = [0] * n
    for a, b in pre:
        if (b, a) not in pre:
            below[b] += 1
    by_rank: dict[int, list[int]] = {}
    for x in range(n):
        by_rank.setdefault(below[x], []).append(x)
    classes = [sorted(by_rank[r]) for r in sorted(by_rank)]
    # a linear preorder must relate every pair in at least one direction
    for a in range(n):
        if (a, a) not in pre:
            raise InputError("preorder is not reflexive")
    expected = set()
    flat_rank = {}
    for r, cls in enumerate(classes):
        for x in cls:
            flat_rank[x] = r
    for a in range(n):
        for b in range(n):
            if flat_rank[a] <= flat_rank[b]:
                expected.add((a, b))
    if expected != set(pre):
        raise InputError("preorder is not a linear preorder with consistent classes")
    return classes


def analyze_structure(structure: RelationalStructure) -> CfiShape:
    """Recover edge classes, gadgets and the base graph, validating as it goes.

    Raises:
        InputError: the structure is not a well-formed gadget structure.
    """
    for name in (PREORDER, CYCLE, INVERSE, LINK):
        if name not in structure.vocabulary.names or structure.vocabulary.arity(name) != 2:
            raise InputError(f"structure lacks binary relation {name!r}")
    classes = _preorder_classes(structure)
    cyc = structure.relation(CYCLE)
    inv = structure.relation(INVERSE)
    link = structure.relation(LINK)
    if not cyc:
        raise InputError("no cycle relation: not a gadget structure")

    cyc_nodes = {a for a, _ in cyc} | {b for _, b in cyc}
    edge_class_ids = [i for i, cls in enumerate(classes) if set(cls) & cyc_nodes]
    eq_class_ids = [i for i, cls in enumerate(classes) if i not in set(edge_class_ids)]
    if edge_class_ids != list(range(len(edge_class_ids))):
        raise InputError("edge classes must precede gadget classes in the preorder")

    edge_classes = [classes[i] for i in edge_class_ids]
    sizes = {len(cls) for cls in edge_classes}
    if len(sizes) != 1:
        raise InputError("edge classes differ in size")
    q = sizes.pop()
    if not is_prime(q):
        raise InputError(f"edge class size {q} is not prime")

    node_class: dict[int, int] = {}
    for c, cls in enumerate(edge_classes):
        for x in cls:
            node_class[x] = c

    # cycle arcs stay inside one class and form a single q-cycle there
    succ: dict[int, int] = {}
    for a, b in cyc:
        if a not in node_class or node_class.get(b) != node_class[a]:
            raise InputError("cycle arc leaves its edge class")
        if a in succ:
            raise InputError("cycle relation branches")
        succ[a] = b
    for cls in edge_classes:
        if any(x not in succ for x in cls):
            raise InputError("cycle relation misses a node")
        at, seen = cls[0], set()
        for _ in cls:
            seen.add(at)
            at = succ[at]
        if at != cls[0] or seen != set(cls):
            raise InputError("edge class does not carry a single cycle")

    # inverse pairing: a symmetric perfect matching between edge classes
    partner: dict[int, int] = {}
    for a, b in inv:
        if (b, a) not in inv:
            raise InputError("inverse relation is not symmetric")
        if a not in node_class or b not in node_class:
            raise InputError("inverse pair touches a non-edge node")
        if partner.setdefault(a, b) != b:
            raise InputError("edge node has two inverse partners")
    class_partner: dict[int, int] = {}
    for cls_id, cls in enumerate(edge_classes):
        partners = {node_class[partner[x]] for x in cls if x in partner}
        if len(partners) != 1 or any(x not in partner for x in cls):
            raise InputError("edge class lacks a unique inverse partner class")
        other = partners.pop()
        if other == cls_id:
            raise InputError("edge class paired with itself")
        class_partner[cls_id] = other
    if any(class_partner[class_partner[c]] != c for c in class_partner):
        raise InputError("inverse pairing is not an involution")

    # links: equation node -> one node in each incident edge class
    eq_nodes = sorted(x for i in eq_class_ids for x in classes[i])
    raw_links: dict[int, list[int]] = {x: [] for x in eq_nodes}
    for a, b in link:
        if a not in raw_links or b not in node_class:
            raise InputError("link must go from an equation node to an edge node")
        raw_links[a].append(b)
    for x, targets in raw_links.items():
        cls_ids = [node_class[t] for t in targets]
        if len(set(cls_ids)) != len(cls_ids) or not cls_ids:
            raise InputError("equation node must link once into each incident class")
    vertex_class_sets: list[set[int]] = []
    for i in eq_class_ids:
        incident_sets = {frozenset(node_class[t] for t in raw_links[x]) for x in classes[i]}
        if len(incident_sets) != 1:
            raise InputError("gadget nodes disagree on their incident edge classes")
        vertex_class_sets.append(set(incident_sets.pop()))

    # each edge class is linked from exactly one vertex: its source endpoint
    source_of: dict[int, int] = {}
    for v, cls_set in enumerate(vertex_class_sets):
        for c in cls_set:
            if c in source_of:
                raise InputError("edge class linked from two gadgets")
            source_of[c] = v
    if set(source_of) != set(range(len(edge_classes))):
        raise InputError("some edge class is linked from no gadget")

    n_vertices = len(eq_class_ids)
    class_edge = [(source_of[c], source_of[class_partner[c]]) for c in range(len(edge_classes))]
    base = BaseGraph(n_vertices, sorted({(min(u, v), max(u, v)) for u, v in class_edge}))
    for v in range(n_vertices):
        deg = base.degree(v)
        if len(classes[eq_class_ids[v]]) != q ** (deg - 1):
            raise InputError("gadget size does not match the vertex degree")

    links: dict[int, tuple[int, ...]] = {}
    class_of_edge = {e: c for c, e in enumerate(class_edge)}
    for v in range(n_vertices):
        order = [class_of_edge[e] for e in base.incident(v)]
        for x in classes[eq_class_ids[v]]:
            by_class = {node_class[t]: t for t in raw_links[x]}
            if set(by_class) != set(order):
                raise InputError("equation node links into the wrong classes")
            links[x] = tuple(by_class[c] for c in order)

    vertex_nodes = [classes[i] for i in eq_class_ids]
    return CfiShape(q, base, edge_classes, class_edge, node_class, vertex_nodes, links)


class IsoSystem:
    """The assembled F_q system plus its variable naming.

    Attributes:
        q: the field modulus.
        variables: variable names; edge-node variables ("e<element>") in
            element order, then vertex variables ("v<index>").
        system: the LinearSystem to feed to the F_q solver.
    """

    __slots__ = ("q", "variables", "system", "shape", "_column")

    def __init__(self, q: int, variables: tuple[str, ...], system: LinearSystem, shape: CfiShape):
        self.q = q
        self.variables = variables
        self.system = system
        self.shape = shape
        self._column = {name: j for j, name in enumerate(variables)}

    def column(self, name: str) -> int:
        try:
            return self._column[name]
        except KeyError:
            raise InputError(f"unknown variable {name!r}") from None

    def to_json(self) -> str:
        doc = {
            "q": self.q,
            "variables": list(self.variables),
            "matrix": self.system.matrix.to_json(),
            "rhs": [int(x) for x in self.system.rhs],
        }
        return json.dumps(doc, sort_keys=True)


def build_system(structure: RelationalStructure, z: int) -> IsoSystem:
    """Assemble the edge/vertex linear system asking "is the invariant z?".

    Args:
        structure: a materialized gadget structure.
        z: candidate residue, 0 <= z < q.

    Returns:
        IsoSystem whose LinearSystem is solvable iff the structure's hidden
        invariant equals z.
    """
    shape = analyze_structure(structure)
    q = shape.q
    if not (0 <= z < q):
        raise InputError(f"z must lie in [0, {q}), got {z}")

    edge_nodes = sorted(shape.node_class)
    col: dict[str, int] = {}
    names: list[str] = []
    for x in edge_nodes:
        col[f"e{x}"] = len(names)
        names.append(f"e{x}")
    for v in range(shape.base.n):
        col[f"v{v}"] = len(names)
        names.append(f"v{v}")

    rows: list[tuple[list[tuple[int, int]], int]] = []
    # (1) consecutive cycle nodes differ by one
    cyc = structure.relation(CYCLE)
    for a, b in sorted(cyc):
        rows.append(([(col[f"e{b}"], 1), (col[f"e{a}"], q - 1)], 1))
    # (2) inverse partners cancel, both orientations
    for a, b in sorted(structure.relation(INVERSE)):
        if a == b:
            raise InputError("inverse relation pairs a node with itself")
        rows.append(([(col[f"e{a}"], 1), (col[f"e{b}"], 1)], 0))
    # (3) each equation node balances its vertex variable
    for v in range(shape.base.n):
        for x in shape.vertex_nodes[v]:
            coeffs = [(col[f"v{v}"], 1)]
            for t in shape.links[x]:
                coeffs.append((col[f"e{t}"], q - 1))
            rows.append((coeffs, 0))
    # (4) the vertex variables sum to z
    rows.append(([(col[f"v{v}"], 1) for v in range(shape.base.n)], z % q))

    mat = np.zeros((len(rows), len(names)), dtype=np.int64)
    rhs = np.zeros(len(rows), dtype=np.int64)
    for i, (coeffs, c) in enumerate(rows):
        for j, a in coeffs:
            mat[i, j] = (mat[i, j] + a) % q
        rhs[i] = c % q
    return IsoSystem(q, tuple(names), LinearSystem(PrimeFieldMatrix(q, mat), rhs), shape)


def decide_class_via_les(structure: RelationalStructure) -> int:
    """The unique residue whose system is solvable.

    Raises:
        ConsistencyError: no residue works, or more than one does; either
            signals a malformed input or an implementation bug.
    """
    shape = analyze_structure(structure)
    first = build_system(structure, 0)
    hits = []
    for z in range(shape.q):
        sys_z = LinearSystem(first.system.matrix, _with_last_rhs(first.system, z))
        if is_solvable(sys_z):
            hits.append(z)
    if len(hits) != 1:
        raise ConsistencyError(f"expected exactly one solvable residue, got {hits}")
    return hits[0]


def _with_last_rhs(system: LinearSystem, z: int) -> np.ndarray:
    rhs = np.array(system.rhs, dtype=np.int64)
    rhs[-1] = z % system.p
    return rhs


class StructureIso:
    """A verified isomorphism from an input structure onto a rebuilt instance."""

    __slots__ = ("target", "mapping")

    def __init__(self, target: CfiInstance, mapping: dict[int, int]):
        self.target = target
        self.mapping = mapping


def solution_to_isomorphism(
    structure: RelationalStructure, z: int, solution: Sequence[int]
) -> StructureIso:
    """Decode a solved system into an explicit structure isomorphism.

    The solution's edge-node values relabel each edge class; the vertex
    values become the gadget values of the target instance.  The returned
    mapping is checked relation-by-relation before being handed back.

    Args:
        structure: the gadget structure the system was built from.
        z: the residue the system was built with.
        solution: a vector solving that system, in variable order.

    Raises:
        InputError: the vector does not solve the system.
        ConsistencyError: the decoded map fails the isomorphism check.
    """
    iso = build_system(structure, z)
    shape = iso.shape
    q = shape.q
    sol = np.asarray(list(solution), dtype=np.int64)
    if sol.shape != (len(iso.variables),):
        raise InputError(f"solution must have {len(iso.variables)} entries")
    sol = sol % q
    lhs = (iso.system.matrix.to_array() @ sol) % q
    if not np.array_equal(lhs, np.asarray(iso.system.rhs) % q):
        raise InputError("vector does not solve the system")

    d_plus = [int(sol[iso.column(f"v{v}")]) for v in range(shape.base.n)]
    target = CfiInstance(shape.base, q, d_plus)
    target_uni = universe_of(target)

    mapping: dict[int, int] = {}
    for x, c in shape.node_class.items():
        e = shape.class_edge[c]
        mapping[x] = target_uni.index[("edge", e, int(sol[iso.column(f"e{x}")]))]
    for v in range(shape.base.n):
        for x in shape.vertex_nodes[v]:
            rho = tuple(int(sol[iso.column(f"e{t}")]) for t in shape.links[x])
            key = ("eq", v, rho)
            if key not in target_uni.index:
                raise ConsistencyError("decoded gadget assignment is not a target element")
            mapping[x] = target_uni.index[key]

    if len(mapping) != structure.universe_size or len(set(mapping.values())) != len(mapping):
        raise ConsistencyError("decoded map is not a bijection")
    target_structure = build_cfi(target)
    for name in structure.vocabulary.names:
        mapped = frozenset((mapping[a], mapping[b]) for a, b in structure.relation(name))
        if mapped != target_structure.relation(name):
            raise ConsistencyError(f"decoded map does not preserve relation {name!r}")
    return StructureIso(target, mapping)
