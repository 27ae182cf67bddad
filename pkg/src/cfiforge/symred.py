"""Symmetry-aware reductions of linear systems over prime fields.

A system whose coefficient matrix is stabilized by a group of paired
row/column permutations can be shrunk: summing the columns of each orbit
("folding") preserves solvability whenever the group is a q-group for a
prime q different from the field characteristic, and a solution of the
folded system expands to one constant on column orbits.  Averaging a matrix
over a row action produces a stabilized matrix with the same all-ones
solvability, and the rank of any matrix can be recovered from solvability
queries alone, which is what the downstream compact-matrix machinery needs.

Groups acting on a system are given on the combined index set: an element
permutes 0..rows-1 (the row part) and rows..rows+cols-1 (the column part)
without mixing the two.
"""

from __future__ import annotations

import json
from collections import deque
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .caps import check_cap, load_caps
from .errors import ConsistencyError, InputError
from .gfp import (
    LinearSystem,
    PrimeFieldMatrix,
    apply_col_permutation,
    apply_row_permutation,
    is_solvable,
    solve,
)

Perm = tuple[int, ...]


def _validate_perm(p: Sequence[int], degree: int) -> Perm:
    p = tuple(int(x) for x in p)
    if len(p) != degree or sorted(p) != list(range(degree)):
        raise InputError(f"not a permutation of degree {degree}: {p!r}")
    return p


def _compose(p: Perm, r: Perm) -> Perm:
    return tuple(p[x] for x in r)


def _invert(p: Perm) -> Perm:
    out = [0] * len(p)
    for i, x in enumerate(p):
        out[x] = i
    return tuple(out)


class PermutationGroup:
    """A permutation group given by generators, enumerable on demand."""

    __slots__ = ("degree", "generators", "_elements")

    def __init__(self, degree: int, generators: Iterable[Sequence[int]], elements=None):
        if not isinstance(degree, int) or degree < 0:
            raise InputError(f"degree must be a nonnegative integer, got {degree!r}")
        self.degree = degree
        self.generators = tuple(_validate_perm(g, degree) for g in generators)
        if elements is not None:
            elements = frozenset(_validate_perm(e, degree) for e in elements)
            if elements != frozenset(self._closure(None)):
                raise InputError("provided enumeration is not the closure of the generators")
        self._elements = elements

    @classmethod
    def trivial(cls, degree: int) -> "PermutationGroup":
        return cls(degree, [])

    def _closure(self, caps: Mapping | None) -> list[Perm]:
        table = load_caps(caps)
        identity = tuple(range(self.degree))
        seen = {identity}
        queue = deque([identity])
        while queue:
            cur = queue.popleft()
            for g in self.generators:
                nxt = _compose(g, cur)
                if nxt not in seen:
                    check_cap("group_enum", len(seen) + 1, table)
                    seen.add(nxt)
                    queue.append(nxt)
        return sorted(seen)

    def elements(self, caps: Mapping | None = None) -> list[Perm]:
        if self._elements is None:
            self._elements = frozenset(self._closure(caps))
        return sorted(self._elements)

    def order(self, caps: Mapping | None = None) -> int:
        return len(self.elements(caps))

    def orbits(self, caps: Mapping | None = None) -> "OrbitPartition":
        """Orbits under the generators, blocks ordered by minimal representative."""
        parent = list(range(self.degree))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in self.generators:
            for i, j in enumerate(g):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
        groups: dict[int, list[int]] = {}
        for x in range(self.degree):
            groups.setdefault(find(x), []).append(x)
        blocks = [tuple(groups[r]) for r in sorted(groups)]
        return OrbitPartition(blocks, self.degree)

    def to_json(self) -> str:
        return json.dumps(
            {"degree": self.degree, "generators": [list(g) for g in self.generators]},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PermutationGroup":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed group JSON: {exc}") from None
        if not isinstance(doc, dict) or "degree" not in doc or "generators" not in doc:
            raise InputError("group JSON needs 'degree' and 'generators'")
        return cls(doc["degree"], doc["generators"])

    def __repr__(self) -> str:
        return f"PermutationGroup(degree={self.degree}, generators={len(self.generators)})"


class OrbitPartition:
    """Ordered disjoint blocks covering 0..size-1; order inside a block is fixed."""

    __slots__ = ("blocks", "size")

    def __init__(self, blocks: Iterable[Sequence[int]], size: int | None = None):
        blocks = tuple(tuple(int(x) for x in b) for b in blocks)
        flat = [x for b in blocks for x in b]
        if size is None:
            size = len(flat)
        if sorted(flat) != list(range(size)):
            raise InputError("blocks must disjointly cover the index set")
        if any(not b for b in blocks):
            raise InputError("empty block")
        self.blocks = blocks
        self.size = size

    @classmethod
    def singletons(cls, n: int) -> "OrbitPartition":
        return cls([(i,) for i in range(n)], n)

    def block_of(self) -> list[int]:
        out = [0] * self.size
        for j, b in enumerate(self.blocks):
            for x in b:
                out[x] = j
        return out

    def to_json(self) -> str:
        return json.dumps({"blocks": [list(b) for b in self.blocks]}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "OrbitPartition":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed partition JSON: {exc}") from None
        if not isinstance(doc, dict) or "blocks" not in doc:
            raise InputError("partition JSON needs 'blocks'")
        return cls(doc["blocks"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, OrbitPartition):
            return NotImplemented
        return self.blocks == other.blocks and self.size == other.size

    def __repr__(self) -> str:
        return f"OrbitPartition({len(self.blocks)} blocks over {self.size})"


def stabilizes(m: PrimeFieldMatrix, pi_rows: Sequence[int], pi_cols: Sequence[int]) -> bool:
    """True iff M(pi_rows(a), pi_cols(b)) = M(a, b) for all a, b."""
    moved = apply_col_permutation(apply_row_permutation(m, pi_rows), pi_cols)
    return moved == m


def split_action(perm: Sequence[int], rows: int, cols: int) -> tuple[Perm, Perm]:
    """Split a combined-index permutation into its row and column parts."""
    perm = _validate_perm(perm, rows + cols)
    row_part = perm[:rows]
    col_part = perm[rows:]
    if any(x >= rows for x in row_part) or any(x < rows for x in col_part):
        raise InputError("permutation mixes row and column indices")
    return tuple(row_part), tuple(x - rows for x in col_part)


def fold_columns(sys: LinearSystem, part: OrbitPartition) -> LinearSystem:
    """Sum the columns of each block; one variable per block, rhs unchanged."""
    m = sys.matrix
    if part.size != m.cols:
        raise InputError(f"partition covers {part.size} indices, matrix has {m.cols} columns")
    a = m.to_array()
    folded = np.zeros((m.rows, len(part.blocks)), dtype=np.int64)
    for j, block in enumerate(part.blocks):
        folded[:, j] = a[:, list(block)].sum(axis=1) % m.p
    return LinearSystem(PrimeFieldMatrix(m.p, folded), sys.rhs)


def expand_folded_solution(part: OrbitPartition, folded_solution: Sequence[int]) -> np.ndarray:
    """Spread block values back onto the original columns."""
    if len(folded_solution) != len(part.blocks):
        raise InputError("folded solution length must match the block count")
    out = np.zeros(part.size, dtype=np.int64)
    for j, block in enumerate(part.blocks):
        out[list(block)] = int(folded_solution[j])
    return out


def _prime_power_base(n: int) -> int | None:
    """The prime q with n = q^k (k >= 1), or None; n = 1 returns 1."""
    if n == 1:
        return 1
    q = n
    for cand in range(2, n):
        if cand * cand > n:
            break
        if n % cand == 0:
            q = cand
            break
    while n % q == 0:
        n //= q
    return q if n == 1 else None


def column_orbits(gamma: PermutationGroup, rows: int, cols: int) -> OrbitPartition:
    """Orbit partition of the column indices under the combined action."""
    col_gens = []
    for g in gamma.generators:
        _, cg = split_action(g, rows, cols)
        col_gens.append(cg)
    return PermutationGroup(cols, col_gens).orbits()


def symmetric_solution(
    sys: LinearSystem, gamma: PermutationGroup, caps: Mapping | None = None
) -> np.ndarray | None:
    """A solution constant on the column orbits of gamma, when one exists.

    Preconditions, all checked: every generator stabilizes the matrix, the
    rhs is invariant under the row action, and the group order is a power of
    a prime different from the field characteristic.  Under these the folded
    system is solvable exactly when the original is, so the expansion of a
    folded solution is returned, or None when the system is unsolvable.
    """
    m = sys.matrix
    rows, cols = m.rows, m.cols
    if gamma.degree != rows + cols:
        raise InputError(
            f"group degree {gamma.degree} must equal rows + cols = {rows + cols}"
        )
    rhs = np.array(sys.rhs, dtype=np.int64)
    for g in gamma.generators:
        rp, cp = split_action(g, rows, cols)
        if not stabilizes(m, rp, cp):
            raise InputError("group does not stabilize the matrix")
        if not np.array_equal(rhs[np.array(rp)], rhs):
            raise InputError("rhs is not invariant under the row action")
    order = gamma.order(caps)
    base = _prime_power_base(order)
    if base is None:
        raise InputError(f"group order {order} is not a prime power")
    if base == m.p:
        raise InputError(
            f"group order {order} shares the field characteristic {m.p}; "
            "folding does not preserve solvability"
        )
    part = column_orbits(gamma, rows, cols)
    folded = fold_columns(sys, part)
    x = solve(folded)
    if x is None:
        return None
    out = expand_folded_solution(part, x)
    lhs = (m.to_array() @ out) % m.p
    if not np.array_equal(lhs, rhs):
        raise ConsistencyError("expanded solution failed verification")
    return out


def group_average(
    m: PrimeFieldMatrix, delta: PermutationGroup, caps: Mapping | None = None
) -> PrimeFieldMatrix:
    """Entrywise sum of M(pi(a), b) over all pi in delta, mod p."""
    if delta.degree != m.rows:
        raise InputError(f"group degree {delta.degree} must equal row count {m.rows}")
    a = m.to_array()
    acc = np.zeros_like(a)
    for pi in delta.elements(caps):
        acc = (acc + a[np.array(pi), :]) % m.p
    return PrimeFieldMatrix(m.p, acc)


def random_stabilized_system(
    rng, p: int, q: int, max_rows: int = 6, max_cols: int = 8
) -> tuple[LinearSystem, PermutationGroup]:
    """A random all-ones system stabilized by a random q-group.

    The group acts on the combined index set with disjoint q-cycles on some
    rows and some columns; the matrix is a random one summed over the group,
    which forces the stabilizer property.  Used by the randomized folding and
    averaging suites; q must differ from p for the folding guarantees.
    """
    rows = rng.randrange(2, max_rows + 1)
    cols = rng.randrange(2, max_cols + 1)
    n_gens = rng.choice([1, 1, 2])

    def cycled(n: int, offset: int) -> list[Perm]:
        # q-cycles on disjoint supports, dealt among the generators so that
        # the generators commute and the group stays a q-group
        idx = list(range(n))
        rng.shuffle(idx)
        perms = [list(range(n)) for _ in range(n_gens)]
        used = 0
        while n - used >= q and rng.random() < 0.7:
            cyc = idx[used : used + q]
            tgt = perms[rng.randrange(n_gens)]
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                tgt[a] = b
            used += q
        return [tuple(x + offset for x in perm) for perm in perms]

    row_parts = cycled(rows, 0)
    col_parts = cycled(cols, rows)
    gamma = PermutationGroup(
        rows + cols, [row_parts[i] + col_parts[i] for i in range(n_gens)]
    )
    order = gamma.order()
    base = _prime_power_base(order)
    if base not in (1, q):
        raise ConsistencyError(f"generator produced order {order}, not a {q}-power")

    m0 = np.array([[rng.randrange(p) for _ in range(cols)] for _ in range(rows)], dtype=np.int64)
    acc = np.zeros_like(m0)
    for g in gamma.elements():
        rp, cp = split_action(g, rows, cols)
        acc = (acc + m0[np.ix_(np.array(rp), np.array(cp))]) % p
    sys = LinearSystem(PrimeFieldMatrix(p, acc), np.ones(rows, dtype=np.int64))
    return sys, gamma


MembershipOracle = Callable[[tuple[int, ...], int], bool]


def span_membership_oracle(m: PrimeFieldMatrix) -> MembershipOracle:
    """The default oracle: column `target` lies in the span of columns `support`.

    Each query is answered by a single solvability test; callers of
    rank_via_solvability never see matrix entries through this interface.
    """
    a = m.to_array()

    def oracle(support: tuple[int, ...], target: int) -> bool:
        sub = a[:, list(support)] if support else np.zeros((m.rows, 0), dtype=np.int64)
        return is_solvable(LinearSystem(PrimeFieldMatrix(m.p, sub), a[:, target]))

    return oracle


def rank_via_solvability(
    m: PrimeFieldMatrix | None,
    blocks: OrbitPartition,
    oracle: MembershipOracle | None = None,
) -> int:
    """Matrix rank from span-membership (solvability) queries alone.

    Blocks are visited in order; within each block, columns are kept when
    they lie outside the span of the kept columns of the current block and
    outside the span of everything kept so far.  The answer is the total
    number of kept columns, which equals the Gaussian rank.

    Args:
        m: the matrix; may be None when an explicit oracle is supplied.
        blocks: ordered column partition with a fixed order inside blocks.
        oracle: span-membership oracle; defaults to solvability tests on m.
    """
    if oracle is None:
        if m is None:
            raise InputError("need a matrix or an explicit oracle")
        if blocks.size != m.cols:
            raise InputError(f"partition covers {blocks.size} indices, matrix has {m.cols} columns")
        oracle = span_membership_oracle(m)
    kept: list[int] = []
    for block in blocks.blocks:
        local: list[int] = []
        for col in block:
            if oracle(tuple(local), col):
                continue
            if oracle(tuple(kept + local), col):
                continue
            local.append(col)
        kept.extend(local)
    return len(kept)
