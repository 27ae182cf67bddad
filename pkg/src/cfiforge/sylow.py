"""The q-Sylow subgroup of Sym([q^r]) and signature-indexed counting.

The group is built as an iterated wreath product: an element at depth r+1
holds q elements of depth r, one per block of size q^r, plus a cyclic shift
of the blocks; depth 1 is the plain cyclic shift.  The points 0..q^r-1 are
the leaves of an implicit complete q-ary tree whose root-to-leaf paths are
the q-adic digit strings, most significant digit first.

The signature of a pair of points is (height of their lowest common
ancestor, cyclic offset between the child subtrees holding them); pairwise
signatures are a complete invariant for the group's orbits on tuples.
Counting tuples that realize a given signature vector, modulo a prime p
coprime to q, is done by the block recursion: anchor one entry, split the
remaining positions by their signature to the anchor, check the forced
cross-signatures between parts, and recurse into the child subtrees.  On
top of that sit per-equality-type counts (inclusion-exclusion over
forbidden coincidences) and the compact signature-indexed matrix of an
equality formula, which is the orbit-level stand-in for the full
tuple-indexed 0/1 matrix.
"""

from __future__ import annotations

import itertools
import json
from typing import Mapping, Sequence

import numpy as np

from .caps import check_cap, load_caps
from .eqformula import EqFormula, EqualityType, build_matrix, decompose
from .errors import ConsistencyError, InputError
from .gfp import LinearSystem, PrimeFieldMatrix, is_prime, is_solvable
from .symred import PermutationGroup, group_average

Signature = tuple[int, int]


def _check_prime(name: str, value: int) -> int:
    if not isinstance(value, int) or not is_prime(value):
        raise InputError(f"{name} must be prime, got {value!r}")
    return value


class SylowGroup:
    """A q-Sylow subgroup of Sym([q^r]) in recursive wreath representation.

    Elements at depth 1 are integers c in [0, q), the powers of the cyclic
    shift.  Elements at depth r > 1 are pairs (subs, c) where subs is a
    tuple of q depth-(r-1) elements, one per block of size q^{r-1}, and c
    shifts the blocks cyclically.  A point acts first by the sub-element of
    its own block, then by the block shift.
    """

    __slots__ = ("q", "r")

    def __init__(self, q: int, r: int):
        self.q = _check_prime("q", q)
        if not isinstance(r, int) or r < 1:
            raise InputError(f"depth r must be a positive integer, got {r!r}")
        self.r = r

    def degree(self) -> int:
        return self.q**self.r

    def order(self) -> int:
        return self.q ** ((self.q**self.r - 1) // (self.q - 1))

    def elements(self, caps: Mapping | None = None) -> list:
        """All recursive elements; the order is checked against the cap first."""
        check_cap("group_enum", self.order(), load_caps(caps))
        return list(_elements(self.q, self.r))

    def to_permutation(self, elem) -> tuple[int, ...]:
        return _to_perm(self.q, self.r, elem)

    def permutations(self, caps: Mapping | None = None) -> list[tuple[int, ...]]:
        """The materialized group, validated to be a subgroup of the right order."""
        perms = [self.to_permutation(e) for e in self.elements(caps)]
        seen = set(perms)
        if len(seen) != self.order():
            raise ConsistencyError(
                f"materialized {len(seen)} distinct permutations, expected {self.order()}"
            )
        if tuple(range(self.degree())) not in seen:
            raise ConsistencyError("materialized group is missing the identity")
        for a in seen:
            for b in seen:
                if tuple(a[x] for x in b) not in seen:
                    raise ConsistencyError("materialized group is not closed under composition")
        return perms

    def generator_permutations(self) -> list[tuple[int, ...]]:
        """A small generating set: the block shift plus generators inside block 0."""
        n = self.degree()
        shift = self.q ** (self.r - 1)
        gens = [tuple((a + shift) % n for a in range(n))]
        if self.r > 1:
            for g in SylowGroup(self.q, self.r - 1).generator_permutations():
                gens.append(tuple(g[a] if a < shift else a for a in range(n)))
        return gens

    def __repr__(self) -> str:
        return f"SylowGroup(q={self.q}, r={self.r})"


def sylow_group(q: int, r: int) -> SylowGroup:
    return SylowGroup(q, r)


def _elements(q: int, r: int):
    if r == 1:
        yield from range(q)
        return
    for subs in itertools.product(tuple(_elements(q, r - 1)), repeat=q):
        for c in range(q):
            yield (subs, c)


def _to_perm(q: int, r: int, elem) -> tuple[int, ...]:
    if r == 1:
        if not isinstance(elem, int) or not 0 <= elem < q:
            raise InputError(f"depth-1 element must be an integer in [0, {q}), got {elem!r}")
        return tuple((x + elem) % q for x in range(q))
    if not isinstance(elem, tuple) or len(elem) != 2:
        raise InputError(f"depth-{r} element must be a (subs, shift) pair, got {elem!r}")
    subs, c = elem
    if not isinstance(subs, tuple) or len(subs) != q:
        raise InputError(f"element needs {q} sub-elements, got {subs!r}")
    if not isinstance(c, int) or not 0 <= c < q:
        raise InputError(f"block shift must be an integer in [0, {q}), got {c!r}")
    block = q ** (r - 1)
    out = [0] * (q**r)
    for y in range(q):
        sub = _to_perm(q, r - 1, subs[y])
        base = ((y + c) % q) * block
        for off in range(block):
            out[y * block + off] = base + sub[off]
    return tuple(out)


def signature(q: int, r: int, a: int, b: int) -> Signature:
    """(LCA height, cyclic offset) of two points in the q-adic block tree."""
    n = q**r
    if not (0 <= a < n and 0 <= b < n):
        raise InputError(f"points must lie in [0, {n}), got {a}, {b}")
    if a == b:
        return (0, 0)
    for m in reversed(range(r)):
        da = (a // q**m) % q
        db = (b // q**m) % q
        if da != db:
            return (m + 1, (db - da) % q)
    raise AssertionError("unreachable: distinct points share all digits")


def tuple_signature(q: int, r: int, points: Sequence[int]) -> tuple[Signature, ...]:
    """Signatures of all pairs (i, j), i < j, in lexicographic pair order."""
    pts = tuple(int(a) for a in points)
    return tuple(
        signature(q, r, pts[i], pts[j])
        for i in range(len(pts))
        for j in range(i + 1, len(pts))
    )


def _pairs(ell: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(ell) for j in range(i + 1, ell)]


def _check_sigma(q: int, r: int, ell: int, sigma) -> tuple[Signature, ...]:
    try:
        sigma = tuple((int(h), int(d)) for h, d in sigma)
    except (TypeError, ValueError):
        raise InputError(f"malformed signature vector: {sigma!r}") from None
    want = ell * (ell - 1) // 2
    if len(sigma) != want:
        raise InputError(
            f"signature vector for {ell} positions needs {want} entries, got {len(sigma)}"
        )
    for h, d in sigma:
        if not 0 <= h <= r:
            raise InputError(f"signature height {h} outside [0, {r}]")
        if not 0 <= d < q:
            raise InputError(f"signature offset {d} outside [0, {q})")
        if h == 0 and d != 0:
            raise InputError("height-0 signatures must carry offset 0")
    return sigma


class _CountEngine:
    """The block recursion for one signature vector, with a shared memo.

    count() reports (realizable, residue mod p, witness): realizable tracks
    the exact count being nonzero, which the residue alone cannot, and the
    witness is the lexicographically least completion of the fixed entries.
    """

    def __init__(self, q: int, r: int, p: int, ell: int, sigma: Sequence[Signature]):
        self.q = q
        self.r = r
        self.p = p
        self.sig = {pair: sigma[t] for t, pair in enumerate(_pairs(ell))}
        self.memo: dict = {}

    def oriented(self, g1: int, g2: int) -> Signature:
        if g1 < g2:
            return self.sig[(g1, g2)]
        h, d = self.sig[(g2, g1)]
        return (h, (-d) % self.q)

    def count(self, idxs: tuple[int, ...], fixed: dict[int, int], i: int, x: int):
        key = (idxs, tuple(sorted(fixed.items())), i, x)
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = self._count(idxs, fixed, i, x)
        return hit

    def _count(self, idxs, fixed, i, x):
        q, p = self.q, self.p
        if not idxs:
            return True, 1 % p, {}
        lo = x * q**i
        if any(not lo <= v < lo + q**i for v in fixed.values()):
            return False, 0, {}
        for t1, g1 in enumerate(idxs):
            for g2 in idxs[t1 + 1 :]:
                if self.sig[(g1, g2)][0] > i:
                    return False, 0, {}

        fixed_here = [g for g in idxs if g in fixed]
        if fixed_here:
            anchor = fixed_here[0]
            anchor_val = fixed[anchor]
            residue = 1 % p
        else:
            # every anchor value admits equally many completions, so fix the
            # block minimum and scale by the block size, reduced via Fermat
            anchor = idxs[0]
            anchor_val = lo
            residue = pow(q, i % (p - 1), p)

        parts: dict[Signature, list[int]] = {}
        for g in idxs:
            if g != anchor:
                parts.setdefault(self.oriented(anchor, g), []).append(g)
        for h, d in parts:
            if h >= 1 and d == 0:
                return False, 0, {}  # an LCA at height h forces distinct child slots

        keys = sorted(parts)
        for a_key, b_key in itertools.combinations(keys, 2):
            h1, d1 = a_key
            h2, d2 = b_key
            if h1 == h2:
                want = (h1, (d2 - d1) % q)
            elif h1 < h2:
                want = (h2, d2)
            else:
                want = (h1, (-d1) % q)
            for g1 in parts[a_key]:
                for g2 in parts[b_key]:
                    if self.oriented(g1, g2) != want:
                        return False, 0, {}

        witness = {anchor: anchor_val}
        for (h, d), members in sorted(parts.items()):
            part_fixed = {g: fixed[g] for g in members if g in fixed}
            if h == 0:
                sub_i, sub_x = 0, anchor_val
            else:
                child = (anchor_val // q ** (h - 1)) % q
                sub_i = h - 1
                sub_x = (anchor_val // q**h) * q + (child + d) % q
            ok, sub_res, sub_wit = self.count(tuple(members), part_fixed, sub_i, sub_x)
            if not ok:
                return False, 0, {}
            residue = residue * sub_res % p
            witness.update(sub_wit)
        return True, residue, witness


def count_realizations(
    q: int,
    r: int,
    p: int,
    ell: int,
    sigma,
    i: int,
    x: int,
    fixed: Sequence[int] = (),
) -> tuple[int, tuple[int, ...] | None]:
    """Number of tuples in block i, x realizing sigma, mod p, plus a witness.

    The first len(fixed) positions are pinned to the given block elements.
    The witness is the full tuple (fixed prefix included) and is present
    exactly when the exact count is nonzero; the residue may still be 0.
    """
    _check_prime("q", q)
    _check_prime("p", p)
    if p == q:
        raise InputError(f"p and q must differ, got both {p}")
    if not isinstance(r, int) or r < 1:
        raise InputError(f"depth r must be a positive integer, got {r!r}")
    if not isinstance(ell, int) or ell < 0:
        raise InputError(f"tuple length must be nonnegative, got {ell!r}")
    sigma = _check_sigma(q, r, ell, sigma)
    if not 0 <= i <= r:
        raise InputError(f"subtree height {i} outside [0, {r}]")
    if not 0 <= x < q ** (r - i):
        raise InputError(f"block index {x} outside [0, {q ** (r - i)})")
    if len(fixed) > ell:
        raise InputError(f"{len(fixed)} fixed entries for a tuple of length {ell}")
    lo = x * q**i
    fixed_map = {}
    for j, v in enumerate(fixed):
        v = int(v)
        if not lo <= v < lo + q**i:
            raise InputError(f"fixed entry {v} outside block [{lo}, {lo + q ** i})")
        fixed_map[j] = v
    engine = _CountEngine(q, r, p, ell, sigma)
    ok, residue, witness = engine.count(tuple(range(ell)), fixed_map, i, x)
    if not ok:
        return 0, None
    return residue, tuple(witness[j] for j in range(ell))


def realizable_signatures(q: int, r: int, ell: int) -> list[tuple[Signature, ...]]:
    """All signature vectors realized by some tuple in [q^r]^ell, lex order.

    Feasibility is decided by the counting recursion itself; brute listing
    is only ever used as a test oracle.
    """
    helper_p = 3 if q == 2 else 2
    entries = [(0, 0)] + [(h, d) for h in range(1, r + 1) for d in range(q)]
    out = []
    for cand in itertools.product(entries, repeat=ell * (ell - 1) // 2):
        engine = _CountEngine(q, r, helper_p, ell, cand)
        ok, _, _ = engine.count(tuple(range(ell)), {}, r, 0)
        if ok:
            out.append(cand)
    return out


def count_per_equality_type(
    q: int,
    r: int,
    p: int,
    tau: EqualityType,
    sigma_a,
    sigma_b,
    a_tuple: Sequence[int],
) -> int:
    """Tuples b with sgn(b) = sigma_b and tau(a, b), counted mod p.

    Positions of b named equal to an entry of a by tau are pinned to it;
    the remaining positions must avoid every entry of a, which is resolved
    by inclusion-exclusion over the forbidden coincidences.
    """
    _check_prime("q", q)
    _check_prime("p", p)
    if p == q:
        raise InputError(f"p and q must differ, got both {p}")
    if not isinstance(tau, EqualityType):
        raise InputError(f"expected an EqualityType, got {tau!r}")
    k, ell = tau.k, tau.ell
    a_tuple = tuple(int(v) for v in a_tuple)
    if len(a_tuple) != k:
        raise InputError(f"representative has {len(a_tuple)} entries, type wants {k}")
    sigma_a = _check_sigma(q, r, k, sigma_a)
    sigma_b = _check_sigma(q, r, ell, sigma_b)
    if tuple_signature(q, r, a_tuple) != sigma_a:
        raise InputError("representative tuple does not realize sigma_a")

    for i in range(k):
        for j in range(i + 1, k):
            if tau.same(i, j) != (a_tuple[i] == a_tuple[j]):
                return 0
    pair_pos = {pair: t for t, pair in enumerate(_pairs(ell))}
    for i in range(ell):
        for j in range(i + 1, ell):
            if tau.same(k + i, k + j) != (sigma_b[pair_pos[(i, j)]] == (0, 0)):
                return 0

    forced: dict[int, int] = {}
    for j in range(ell):
        for i in range(k):
            if tau.same(i, k + j):
                forced[j] = a_tuple[i]
                break
    free = tuple(j for j in range(ell) if j not in forced)
    avoid = sorted(set(a_tuple))

    engine = _CountEngine(q, r, p, ell, sigma_b)
    positions = tuple(range(ell))
    memo: dict = {}

    def excluded(yset: tuple[int, ...], eps: tuple[tuple[int, int], ...]) -> int:
        # |{b : sgn = sigma_b, eps pinned, positions in yset avoid all of a}|
        key = (yset, eps)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if not yset:
            _, res, _ = engine.count(positions, {**forced, **dict(eps)}, r, 0)
        else:
            j, rest = yset[0], yset[1:]
            res = excluded(rest, eps)
            for a in avoid:
                res -= excluded(rest, tuple(sorted(eps + ((j, a),))))
            res %= p
        memo[key] = res
        return res

    return excluded(free, ())


class CompactMatrix:
    """Signature-indexed coefficient matrix plus its row and column indices."""

    __slots__ = ("matrix", "row_signatures", "col_signatures")

    def __init__(self, matrix: PrimeFieldMatrix, row_signatures, col_signatures):
        self.matrix = matrix
        self.row_signatures = tuple(row_signatures)
        self.col_signatures = tuple(col_signatures)

    def to_json(self) -> str:
        return json.dumps(
            {
                "matrix": self.matrix.to_json(),
                "row_signatures": [[list(s) for s in sig] for sig in self.row_signatures],
                "col_signatures": [[list(s) for s in sig] for sig in self.col_signatures],
            },
            sort_keys=True,
        )

    def __repr__(self) -> str:
        return (
            f"CompactMatrix({len(self.row_signatures)}x{len(self.col_signatures)} "
            f"over F_{self.matrix.p})"
        )


def compact_matrix(
    alpha: EqFormula, q: int, r: int, p: int, k: int, ell: int, caps: Mapping | None = None
) -> CompactMatrix:
    """The orbit-level matrix of alpha over realizable signature index sets.

    Entry (sigma_a, sigma_b) counts, mod p, the tuples b with sgn(b) =
    sigma_b satisfying alpha(a, b) for a fixed representative a of sigma_a,
    summed over the complete equality types in alpha's decomposition.
    """
    _check_prime("q", q)
    _check_prime("p", p)
    if p == q:
        raise InputError(f"p and q must differ, got both {p}")
    if alpha.k != k or alpha.ell != ell:
        raise InputError(
            f"formula declares arities ({alpha.k}, {alpha.ell}), expected ({k}, {ell})"
        )
    rows = realizable_signatures(q, r, k)
    cols = realizable_signatures(q, r, ell)
    check_cap("matrix_cells", len(rows) * len(cols), load_caps(caps))
    types = decompose(alpha)
    out = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for ai, sig_a in enumerate(rows):
        _, rep = count_realizations(q, r, p, k, sig_a, r, 0)
        if rep is None:
            raise ConsistencyError("realizable signature produced no witness")
        for bi, sig_b in enumerate(cols):
            total = 0
            for tau in types:
                total += count_per_equality_type(q, r, p, tau, sig_a, sig_b, rep)
            out[ai, bi] = total % p
    return CompactMatrix(PrimeFieldMatrix(p, out), rows, cols)


def _tuple_action(perm: Sequence[int], power: int) -> tuple[int, ...]:
    """The permutation a point permutation induces on lex-ordered tuples."""
    n = len(perm)
    out = []
    for idx in range(n**power):
        rem, digits = idx, []
        for _ in range(power):
            rem, d = divmod(rem, n)
            digits.append(d)
        mapped = 0
        for d in reversed(digits):
            mapped = mapped * n + perm[d]
        out.append(mapped)
    return tuple(out)


def validate_compact(
    alpha: EqFormula, q: int, r: int, p: int, k: int, ell: int, caps: Mapping | None = None
) -> dict:
    """Brute-force check of the solvability chain and the compact entries.

    Builds the full tuple-indexed matrix, averages it over the materialized
    Sylow group, deduplicates columns by orbit, and compares solvability of
    the all-ones system across all four formulations; entries of the
    compact matrix are checked against direct orbit counts.
    """
    n = q**r
    full = build_matrix(alpha, n, p, caps)
    gens = sylow_group(q, r).generator_permutations()

    row_group = PermutationGroup(n**k, [_tuple_action(g, k) for g in gens])
    averaged = group_average(full, row_group, caps)
    col_group = PermutationGroup(n**ell, [_tuple_action(g, ell) for g in gens])
    col_reps = [block[0] for block in col_group.orbits().blocks]
    dedup = PrimeFieldMatrix(p, averaged.to_array()[:, col_reps])

    compact = compact_matrix(alpha, q, r, p, k, ell, caps)

    entries_match = True
    cols = compact.col_signatures
    for ai, sig_a in enumerate(compact.row_signatures):
        _, rep = count_realizations(q, r, p, k, sig_a, r, 0)
        want = {sig: 0 for sig in cols}
        for b in itertools.product(range(n), repeat=ell):
            sig_b = tuple_signature(q, r, b)
            if sig_b in want and alpha.evaluate(rep, b):
                want[sig_b] += 1
        for bi, sig_b in enumerate(cols):
            if compact.matrix.entry(ai, bi) != want[sig_b] % p:
                entries_match = False

    verdict = {
        "n": n,
        "matrix_solvable": is_solvable(LinearSystem.with_ones(full)),
        "averaged_solvable": is_solvable(LinearSystem.with_ones(averaged)),
        "deduplicated_solvable": is_solvable(LinearSystem.with_ones(dedup)),
        "compact_solvable": is_solvable(LinearSystem.with_ones(compact.matrix)),
        "entries_match": entries_match,
        "compact_shape": [len(compact.row_signatures), len(compact.col_signatures)],
    }
    verdict["chain_holds"] = (
        verdict["matrix_solvable"]
        == verdict["averaged_solvable"]
        == verdict["deduplicated_solvable"]
        == verdict["compact_solvable"]
    ) and entries_match
    return verdict
