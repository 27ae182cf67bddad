"""k-tuple color refinement with counting.

Colors start at the atomic types of k-tuples and are refined each round: the
new color of a tuple is its old color plus the multiset, over all universe
elements c, of the extension signature of c — the atomic type of the tuple
extended by c together with the old colors of the k one-position
substitutions.  Stable colorings of k-tuples decide equivalence in the
(k+1)-variable counting logic, so every verdict reports both numbers.

Two engines compute the same partitions.  The dense engine vectorizes k in
{1, 2} over purely binary vocabularies with numpy, dropping the extension
atomic type for k = 2 where the substituted pair colors already determine it.
The generic engine follows the definition literally for any k and vocabulary
and is kept deliberately simple; tests replay both and compare partitions.
"""

from __future__ import annotations

import json
from hashlib import blake2b
from itertools import product
from typing import Iterator, Mapping

import numpy as np

from .caps import check_cap, load_caps
from .errors import InputError
from .relstruct import RelationalStructure, atomic_type, disjoint_union


class Coloring:
    """A stable (or in-progress) coloring of all k-tuples.

    Attributes:
        k: tuple length.
        n: universe size.
        table: int64 array of shape (n,)*k holding color ids.
        color_count: number of distinct colors.
        rounds: refinement rounds applied after the initial coloring.
    """

    __slots__ = ("k", "n", "table", "color_count", "rounds")

    def __init__(self, k: int, n: int, table: np.ndarray, color_count: int, rounds: int):
        self.k = k
        self.n = n
        self.table = table
        self.color_count = color_count
        self.rounds = rounds

    def color(self, t) -> int:
        t = tuple(t)
        if len(t) != self.k:
            raise InputError(f"expected a {self.k}-tuple")
        return int(self.table[t])

    def histogram(self) -> list[tuple[int, int]]:
        counts = np.bincount(self.table.reshape(-1), minlength=self.color_count)
        return [(c, int(counts[c])) for c in range(self.color_count) if counts[c]]


def _binary_matrices(s: RelationalStructure) -> list[np.ndarray] | None:
    """Bool adjacency matrices in vocabulary order, or None if not all-binary."""
    n = s.universe_size
    mats = []
    for name in s.vocabulary.names:
        if s.vocabulary.arity(name) != 2:
            return None
        m = np.zeros((n, n), dtype=bool)
        rel = s.relation(name)
        if rel:
            idx = np.array(sorted(rel), dtype=np.int64)
            m[idx[:, 0], idx[:, 1]] = True
        mats.append(m)
    return mats


def _pair_atomic_codes(s: RelationalStructure, mats: list[np.ndarray]) -> np.ndarray:
    """One int per ordered pair, in bijection with its atomic type."""
    n = s.universe_size
    code = np.zeros((n, n), dtype=np.int64)
    mult = 1
    for m in mats:
        d = np.diagonal(m).astype(np.int64)
        bits = m.astype(np.int64) + 2 * m.T + 4 * d[:, None] + 8 * d[None, :]
        code += mult * bits
        mult *= 16
    code += mult * np.eye(n, dtype=np.int64)
    return code


def _renumber(keys: np.ndarray) -> tuple[np.ndarray, int]:
    """Canonical color ids for an array of row keys (sorted-key order)."""
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    return inverse.astype(np.int64), len(uniq)


def _digest_rows(out: np.ndarray, rows: np.ndarray) -> None:
    """16-byte blake2b of each row, written as two uint64 columns of out."""
    for i in range(rows.shape[0]):
        h = blake2b(rows[i].tobytes(), digest_size=16).digest()
        out[i, 0] = int.from_bytes(h[:8], "little")
        out[i, 1] = int.from_bytes(h[8:], "little")


def _dense_rounds(s: RelationalStructure, k: int) -> Iterator[tuple[int, np.ndarray, int]]:
    """Yield (round, color table, color count) per round until stable; k in {1, 2}."""
    n = s.universe_size
    mats = _binary_matrices(s)
    if mats is None:
        raise InputError("dense engine requires an all-binary vocabulary")
    pair_codes = _pair_atomic_codes(s, mats)

    if k == 1:
        diag = np.diagonal(pair_codes).copy()
        chi, count = _renumber(diag[:, None])
        yield 0, chi, count
        rnd = 0
        while True:
            rnd += 1
            payload = pair_codes * np.int64(count) + chi[None, :]
            payload.sort(axis=1)
            rows = np.concatenate([chi[:, None], payload], axis=1)
            keys = np.empty((n, 2), dtype=np.uint64)
            _digest_rows(keys, rows)
            chi_new, count_new = _renumber(keys)
            if count_new == count:
                return
            chi, count = chi_new, count_new
            yield rnd, chi, count

    elif k == 2:
        chi, count = _renumber(pair_codes.reshape(-1, 1))
        chi = chi.reshape(n, n)
        yield 0, chi, count
        rnd = 0
        keys = np.empty((n * n, 2), dtype=np.uint64)
        while True:
            rnd += 1
            chi_t = np.ascontiguousarray(chi.T)
            rows = np.empty((n, n + 1), dtype=np.int64)
            digest_block = np.empty((n, 2), dtype=np.uint64)
            for a in range(n):
                payload = chi_t * np.int64(count) + chi[a][None, :]
                payload.sort(axis=1)
                rows[:, 0] = chi[a]
                rows[:, 1:] = payload
                _digest_rows(digest_block, rows)
                keys[a * n : (a + 1) * n] = digest_block
            chi_new, count_new = _renumber(keys)
            if count_new == count:
                return
            chi, count = chi_new.reshape(n, n), count_new
            yield rnd, chi, count

    else:
        raise InputError("dense engine supports k in {1, 2} only")


def _generic_rounds(s: RelationalStructure, k: int) -> Iterator[tuple[int, np.ndarray, int]]:
    """Literal, slow refinement for any k and vocabulary."""
    n = s.universe_size
    tuples = list(product(range(n), repeat=k))
    sigs = [atomic_type(s, t) for t in tuples]
    order = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
    chi = {t: order[sig] for t, sig in zip(tuples, sigs)}
    count = len(order)

    def as_table() -> np.ndarray:
        table = np.zeros((n,) * k, dtype=np.int64)
        for t, c in chi.items():
            table[t] = c
        return table

    yield 0, as_table(), count
    rnd = 0
    ext_cache: dict[tuple, tuple] = {}
    while True:
        rnd += 1
        new_sigs = {}
        for t in tuples:
            bag = []
            for c in range(n):
                ext = t + (c,)
                atp = ext_cache.get(ext)
                if atp is None:
                    atp = atomic_type(s, ext)
                    ext_cache[ext] = atp
                subs = tuple(chi[t[:j] + (c,) + t[j + 1 :]] for j in range(k))
                bag.append((atp, subs))
            new_sigs[t] = (chi[t], tuple(sorted(bag)))
        order = {sig: i for i, sig in enumerate(sorted(set(new_sigs.values())))}
        count_new = len(order)
        if count_new == count:
            return
        chi = {t: order[new_sigs[t]] for t in tuples}
        count = count_new
        yield rnd, as_table(), count


def _rounds(
    s: RelationalStructure, k: int, method: str, caps: Mapping | None
) -> Iterator[tuple[int, np.ndarray, int]]:
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    caps = load_caps(caps)
    check_cap("wl_tuples", s.universe_size**k, caps)
    if method == "auto":
        method = "dense" if k in (1, 2) and _binary_matrices(s) is not None else "generic"
    if method == "dense":
        return _dense_rounds(s, k)
    if method == "generic":
        return _generic_rounds(s, k)
    raise InputError(f"unknown method {method!r}")


def wl_refine(
    s: RelationalStructure, k: int, caps: Mapping | None = None, method: str = "auto"
) -> Coloring:
    """Refine k-tuple colors to stability.

    Args:
        s: the structure.
        k: tuple length (>= 1); n^k is capped.
        caps: optional cap overrides.
        method: "auto", "dense", or "generic".

    Returns:
        The stable Coloring.
    """
    n = s.universe_size
    if n == 0:
        return Coloring(k, 0, np.zeros((0,) * k, dtype=np.int64), 0, 0)
    last = None
    for rnd, table, count in _rounds(s, k, method, caps):
        last = (rnd, table, count)
    rnd, table, count = last
    return Coloring(k, n, table, count, rnd)


class WlVerdict:
    """Outcome of a joint refinement of two structures.

    ``equivalent`` is True when every round's color histograms over the two
    tuple blocks agreed through stability; otherwise ``round`` records the
    first round they differed.
    """

    __slots__ = ("k", "equivalent", "round", "rounds", "color_count", "histogram_a", "histogram_b")

    def __init__(self, k, equivalent, round_, rounds, color_count, histogram_a, histogram_b):
        self.k = k
        self.equivalent = equivalent
        self.round = round_
        self.rounds = rounds
        self.color_count = color_count
        self.histogram_a = histogram_a
        self.histogram_b = histogram_b

    def describe(self) -> str:
        if self.equivalent:
            return "stable-equivalent"
        return f"distinguished-at-round {self.round}"

    def to_json(self) -> str:
        doc = {
            "k": self.k,
            "logic_variables": self.k + 1,
            "verdict": "stable-equivalent" if self.equivalent else "distinguished",
            "round": self.round,
            "rounds": self.rounds,
            "colors": self.color_count,
            "histogramA": [[c, m] for c, m in self.histogram_a],
            "histogramB": [[c, m] for c, m in self.histogram_b],
        }
        return json.dumps(doc, sort_keys=True)


def _block_histogram(table: np.ndarray, k: int, lo: int, hi: int, count: int) -> np.ndarray:
    block = table[tuple(slice(lo, hi) for _ in range(k))]
    return np.bincount(block.reshape(-1), minlength=count)


def wl_distinguish(
    a: RelationalStructure,
    b: RelationalStructure,
    k: int,
    caps: Mapping | None = None,
    method: str = "auto",
) -> WlVerdict:
    """Jointly refine two structures and compare per-round color histograms.

    The refinement runs on the disjoint union, so both structures share one
    color dictionary; they are distinguished as soon as the color counts over
    the all-in-A tuples and the all-in-B tuples differ, which includes a size
    mismatch at round zero.
    """
    if a.vocabulary != b.vocabulary:
        raise InputError("structures must share a vocabulary")
    na, nb = a.universe_size, b.universe_size
    if na != nb:
        empty_a = [(0, na**k)] if na else []
        empty_b = [(0, nb**k)] if nb else []
        return WlVerdict(k, False, 0, 0, 1 if na or nb else 0, empty_a, empty_b)
    if na == 0:
        return WlVerdict(k, True, None, 0, 0, [], [])
    union = disjoint_union(a, b)
    last = None
    for rnd, table, count in _rounds(union, k, method, caps):
        hist_a = _block_histogram(table, k, 0, na, count)
        hist_b = _block_histogram(table, k, na, na + nb, count)
        last = (rnd, count, hist_a, hist_b)
        if not np.array_equal(hist_a, hist_b):
            return WlVerdict(
                k,
                False,
                rnd,
                rnd,
                count,
                [(c, int(m)) for c, m in enumerate(hist_a) if m],
                [(c, int(m)) for c, m in enumerate(hist_b) if m],
            )
    rnd, count, hist_a, hist_b = last
    return WlVerdict(
        k,
        True,
        None,
        rnd,
        count,
        [(c, int(m)) for c, m in enumerate(hist_a) if m],
        [(c, int(m)) for c, m in enumerate(hist_b) if m],
    )
