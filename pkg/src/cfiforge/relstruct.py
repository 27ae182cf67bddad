"""Finite relational structures and ordered base graphs.

A :class:`RelationalStructure` is a universe ``0..n-1`` together with named
relations of fixed arity.  A :class:`BaseGraph` is an undirected, connected,
loop-free graph whose vertex order is the index order; gadget constructions
elsewhere in the package consume these.  The module also provides vertex
connectivity and the atomic type of a tuple, which seeds color refinement.
"""

from __future__ import annotations

import json
from collections import deque
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from .errors import InputError

Tuple_ = tuple[int, ...]


class Vocabulary:
    """Relation names with arities.

    Args:
        arities: mapping from relation name to arity (>= 1).
    """

    __slots__ = ("_arities",)

    def __init__(self, arities: Mapping[str, int]):
        cleaned: dict[str, int] = {}
        for name, ar in arities.items():
            if not isinstance(name, str) or not name:
                raise InputError(f"bad relation name: {name!r}")
            if not isinstance(ar, int) or ar < 1:
                raise InputError(f"arity of {name!r} must be a positive integer, got {ar!r}")
            if name in cleaned:
                raise InputError(f"duplicate relation name: {name!r}")
            cleaned[name] = ar
        self._arities = dict(sorted(cleaned.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._arities)

    def arity(self, name: str) -> int:
        try:
            return self._arities[name]
        except KeyError:
            raise InputError(f"unknown relation: {name!r}") from None

    def items(self):
        return self._arities.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._arities == other._arities

    def __hash__(self) -> int:
        return hash(tuple(self._arities.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}/{a}" for n, a in self._arities.items())
        return f"Vocabulary({inner})"


class RelationalStructure:
    """A finite structure: universe ``0..n-1`` plus named tuple sets.

    Immutable after construction; relations are stored as frozensets keyed by
    name.  Tuples are validated against the vocabulary's arities and the
    universe bounds.
    """

    __slots__ = ("vocabulary", "universe_size", "_relations")

    def __init__(
        self,
        vocabulary: Vocabulary,
        universe_size: int,
        relations: Mapping[str, Iterable[Sequence[int]]],
    ):
        if not isinstance(universe_size, int) or universe_size < 0:
            raise InputError(f"universe size must be a nonnegative integer, got {universe_size!r}")
        self.vocabulary = vocabulary
        self.universe_size = universe_size
        store: dict[str, frozenset[Tuple_]] = {name: frozenset() for name in vocabulary.names}
        for name, tuples in relations.items():
            ar = vocabulary.arity(name)
            bucket = set()
            for t in tuples:
                t = tuple(t)
                if len(t) != ar:
                    raise InputError(f"relation {name!r} expects arity {ar}, got tuple {t}")
                for x in t:
                    if not isinstance(x, int) or not (0 <= x < universe_size):
                        raise InputError(f"tuple entry {x!r} outside universe [0, {universe_size})")
                bucket.add(t)
            store[name] = frozenset(bucket)
        self._relations = store

    def relation(self, name: str) -> frozenset[Tuple_]:
        try:
            return self._relations[name]
        except KeyError:
            raise InputError(f"unknown relation: {name!r}") from None

    def has(self, name: str, t: Sequence[int]) -> bool:
        return tuple(t) in self.relation(name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RelationalStructure):
            return NotImplemented
        return (
            self.vocabulary == other.vocabulary
            and self.universe_size == other.universe_size
            and self._relations == other._relations
        )

    def __hash__(self) -> int:
        return hash(
            (self.vocabulary, self.universe_size, tuple(sorted((n, r) for n, r in self._relations.items())))
        )

    def __repr__(self) -> str:
        sizes = ", ".join(f"{n}:{len(r)}" for n, r in self._relations.items())
        return f"RelationalStructure(n={self.universe_size}, {sizes})"

    def to_json(self) -> str:
        doc = {
            "universe": self.universe_size,
            "relations": {
                name: {
                    "arity": self.vocabulary.arity(name),
                    "tuples": sorted(list(t) for t in tuples),
                }
                for name, tuples in self._relations.items()
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RelationalStructure":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed structure JSON: {exc}") from None
        if not isinstance(doc, dict) or "universe" not in doc or "relations" not in doc:
            raise InputError("structure JSON needs 'universe' and 'relations'")
        rels = doc["relations"]
        if not isinstance(rels, dict):
            raise InputError("'relations' must be an object")
        voc = Vocabulary({name: spec.get("arity") for name, spec in rels.items()})
        tuples = {name: spec.get("tuples", []) for name, spec in rels.items()}
        return cls(voc, doc["universe"], tuples)


def disjoint_union(a: RelationalStructure, b: RelationalStructure) -> RelationalStructure:
    """Disjoint union over a shared vocabulary; ``b``'s elements are shifted by ``a.universe_size``."""
    if a.vocabulary != b.vocabulary:
        raise InputError("disjoint union needs identical vocabularies")
    off = a.universe_size
    rels: dict[str, list[Tuple_]] = {}
    for name in a.vocabulary.names:
        shifted = [tuple(x + off for x in t) for t in b.relation(name)]
        rels[name] = list(a.relation(name)) + shifted
    return RelationalStructure(a.vocabulary, off + b.universe_size, rels)


class BaseGraph:
    """Undirected, connected, ordered graph on vertices ``0..n-1``.

    Edges are stored as pairs ``(u, v)`` with ``u < v``.  The vertex order
    used by downstream constructions is the index order.
    """

    __slots__ = ("n", "edges", "_adj")

    def __init__(self, n: int, edges: Iterable[Sequence[int]]):
        if not isinstance(n, int) or n < 1:
            raise InputError(f"vertex count must be a positive integer, got {n!r}")
        seen: set[tuple[int, int]] = set()
        for e in edges:
            u, v = e
            if not (isinstance(u, int) and isinstance(v, int)):
                raise InputError(f"edge endpoint not an integer: {e!r}")
            if u == v:
                raise InputError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"edge {e!r} outside vertex range [0, {n})")
            seen.add((min(u, v), max(u, v)))
        self.n = n
        self.edges = tuple(sorted(seen))
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self._adj = tuple(tuple(sorted(nb)) for nb in adj)
        if not self._is_connected():
            raise InputError("graph must be connected")

    def _is_connected(self) -> bool:
        if self.n <= 1:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def directed_edges(self) -> tuple[tuple[int, int], ...]:
        """All 2|E| orientations, sorted lexicographically by (source, target)."""
        out = []
        for u, v in self.edges:
            out.append((u, v))
            out.append((v, u))
        return tuple(sorted(out))

    def incident(self, v: int) -> tuple[tuple[int, int], ...]:
        """Directed edges leaving ``v``, in target order."""
        return tuple((v, w) for w in self._adj[v])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BaseGraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"BaseGraph(n={self.n}, m={len(self.edges)})"

    def to_json(self) -> str:
        return json.dumps({"vertices": self.n, "edges": [list(e) for e in self.edges]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BaseGraph":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed graph JSON: {exc}") from None
        if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
            raise InputError("graph JSON needs 'vertices' and 'edges'")
        return cls(doc["vertices"], doc["edges"])


def complete_graph(n: int) -> BaseGraph:
    """K_n on vertices 0..n-1.

    Args:
        n: vertex count, at least 2.
    """
    if not isinstance(n, int) or n < 2:
        raise InputError(f"complete graph needs n >= 2, got {n!r}")
    return BaseGraph(n, list(combinations(range(n), 2)))


def cycle_graph(n: int) -> BaseGraph:
    """Cycle on n >= 3 vertices, edges i -- i+1 mod n."""
    if not isinstance(n, int) or n < 3:
        raise InputError(f"cycle needs n >= 3, got {n!r}")
    return BaseGraph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> BaseGraph:
    """Path on n >= 2 vertices, edges i -- i+1."""
    if not isinstance(n, int) or n < 2:
        raise InputError(f"path needs n >= 2, got {n!r}")
    return BaseGraph(n, [(i, i + 1) for i in range(n - 1)])


def _max_vertex_disjoint_paths(g: BaseGraph, s: int, t: int) -> int:
    """Count of internally vertex-disjoint s-t paths, via unit-capacity max flow.

    Every vertex v is split into v_in = 2v and v_out = 2v+1 joined by a
    capacity-1 arc (uncapped for s and t); each undirected edge contributes
    arcs u_out -> v_in and v_out -> u_in of capacity 1.
    """
    big = g.n + 1
    cap: dict[tuple[int, int], int] = {}
    adj: dict[int, list[int]] = {}

    def arc(a: int, b: int, c: int) -> None:
        if (a, b) not in cap:
            cap[(a, b)] = 0
            cap[(b, a)] = cap.get((b, a), 0)
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        cap[(a, b)] += c

    for v in range(g.n):
        arc(2 * v, 2 * v + 1, big if v in (s, t) else 1)
    for u, v in g.edges:
        arc(2 * u + 1, 2 * v, 1)
        arc(2 * v + 1, 2 * u, 1)

    source, sink = 2 * s + 1, 2 * t
    flow = 0
    while True:
        parent: dict[int, int] = {source: source}
        queue = deque([source])
        while queue and sink not in parent:
            a = queue.popleft()
            for b in adj.get(a, ()):
                if b not in parent and cap.get((a, b), 0) > 0:
                    parent[b] = a
                    queue.append(b)
        if sink not in parent:
            return flow
        b = sink
        while b != source:
            a = parent[b]
            cap[(a, b)] -= 1
            cap[(b, a)] = cap.get((b, a), 0) + 1
            b = a
        flow += 1


def connectivity(g: BaseGraph) -> int:
    """Vertex connectivity of a connected graph.

    K_n scores n-1; otherwise this is the smallest number of vertices whose
    removal disconnects the graph, computed by Menger's theorem as the minimum
    over non-adjacent pairs of the max number of vertex-disjoint paths.
    """
    if g.n == 1:
        return 0
    edge_set = set(g.edges)
    if len(g.edges) == g.n * (g.n - 1) // 2:
        return g.n - 1
    best = g.n - 1
    for u, v in combinations(range(g.n), 2):
        if (u, v) in edge_set:
            continue
        best = min(best, _max_vertex_disjoint_paths(g, u, v))
        if best == 0:
            break
    return best


def atomic_type(s: RelationalStructure, t: Sequence[int]) -> tuple:
    """Canonical code of a tuple: equality pattern plus full relational profile.

    Two tuples get equal codes exactly when the entrywise map between them is
    well defined, injective, and preserves membership for every relation
    applied to every selection of positions.

    Args:
        s: the ambient structure.
        t: tuple of universe elements.

    Returns:
        A hashable code, stable across structures over the same vocabulary.
    """
    t = tuple(t)
    for x in t:
        if not (0 <= x < s.universe_size):
            raise InputError(f"tuple entry {x} outside universe [0, {s.universe_size})")
    k = len(t)
    eq_pattern = tuple(t.index(x) for x in t)
    profile = []
    for name, ar in s.vocabulary.items():
        rel = s.relation(name)
        hits = tuple(
            pos for pos in product(range(k), repeat=ar) if tuple(t[i] for i in pos) in rel
        )
        profile.append((name, hits))
    return (eq_pattern, tuple(profile))
