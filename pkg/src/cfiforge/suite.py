"""The verification battery behind the `suite` and `sylow-verify` commands.

Each criterion is a standalone callable returning (passed, details); the
runner adds wall-clock timings and renders one line per criterion.  The
brute-force oracles used here are deliberately independent of the code
paths they check: signatures are recomputed from digit paths, counts from
full enumeration, ranks from Gaussian elimination.
"""

from __future__ import annotations

import itertools
import json
import random
import time
from typing import Callable, Mapping

import numpy as np

from .caps import check_cap, load_caps
from .cfi import (
    CfiInstance,
    automorphisms,
    brute_iso_oracle,
    build,
    canonical_form,
    twist_bijection,
    universe_of,
)
from .eqformula import random_formula
from .errors import InputError
from .gfp import LinearSystem, PrimeFieldMatrix, is_solvable, rank
from .isoles import build_system
from .relstruct import complete_graph
from .symred import (
    OrbitPartition,
    PermutationGroup,
    column_orbits,
    fold_columns,
    random_stabilized_system,
    rank_via_solvability,
    symmetric_solution,
)
from .sylow import (
    SylowGroup,
    count_realizations,
    realizable_signatures,
    signature,
    tuple_signature,
    validate_compact,
)
from .wl import wl_distinguish, wl_refine


def iso_class_partition(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Exhaustive pairwise agreement of the twist-search oracle with sum(d) mod q."""
    pairs = 0
    for q in (2, 3):
        base = complete_graph(4)
        insts = [
            CfiInstance(base, q, d) for d in itertools.product(range(q), repeat=4)
        ]
        residues = {sum(i.d) % q for i in insts}
        if residues != set(range(q)):
            return False, {"q": q, "residues": sorted(residues)}
        for a, b in itertools.combinations(insts, 2):
            want = (sum(a.d) - sum(b.d)) % q == 0
            if brute_iso_oracle(a, b, caps) != want:
                return False, {"q": q, "a": a.d, "b": b.d, "expected": want}
            pairs += 1
    return True, {"pairs_checked": pairs, "class_counts": {"q=2": 2, "q=3": 3}}


def les_soundness(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Solvability of the equation system tracks the residue exactly."""
    systems = 0
    for q in (2, 3):
        for n in (4, 5):
            base = complete_graph(n)
            for d in itertools.product(range(q), repeat=n):
                structure = build(CfiInstance(base, q, d), caps)
                for z in range(q):
                    got = is_solvable(build_system(structure, z).system)
                    want = sum(d) % q == z
                    if got != want:
                        return False, {"q": q, "n": n, "d": d, "z": z, "got": got}
                    systems += 1
    return True, {"systems_checked": systems}


def canonical_form_agreement(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Canonical forms coincide exactly when the brute oracle says isomorphic."""
    base = complete_graph(4)
    insts = [CfiInstance(base, 2, d) for d in itertools.product(range(2), repeat=4)]
    forms = [canonical_form(i, caps) for i in insts]
    pairs = 0
    for (a, fa), (b, fb) in itertools.combinations(zip(insts, forms), 2):
        if (fa == fb) != brute_iso_oracle(a, b, caps):
            return False, {"a": a.d, "b": b.d}
        pairs += 1
    return True, {"pairs_checked": pairs, "distinct_forms": len({f.to_json() for f in forms})}


def wl_equivalence(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Refinement cannot split instances whose base is too connected for it."""
    details: dict = {}
    base4 = complete_graph(4)
    structures = [
        build(CfiInstance(base4, 2, d), caps)
        for d in itertools.product(range(2), repeat=4)
    ]
    pairs = 0
    for a, b in itertools.combinations(structures, 2):
        verdict = wl_distinguish(a, b, 1, caps)
        if not verdict.equivalent:
            return False, {"family": "k4 q2 k=1", "round": verdict.round}
        pairs += 1
    details["k4_q2_pairs"] = pairs

    base5 = complete_graph(5)
    even = build(CfiInstance(base5, 2, (0, 0, 0, 0, 0)), caps)
    odd = build(CfiInstance(base5, 2, (1, 0, 0, 0, 0)), caps)
    verdict = wl_distinguish(even, odd, 2, caps)
    if not verdict.equivalent:
        return False, {"family": "k5 q2 k=2", "round": verdict.round}
    details["k5_q2_rounds"] = verdict.rounds

    reps = [build(CfiInstance(base5, 3, (z, 0, 0, 0, 0)), caps) for z in range(3)]
    rounds = []
    for a, b in itertools.combinations(reps, 2):
        verdict = wl_distinguish(a, b, 2, caps)
        if not verdict.equivalent:
            return False, {"family": "k5 q3 k=2", "round": verdict.round}
        rounds.append(verdict.rounds)
    details["k5_q3_rounds"] = rounds
    return True, details


def orbit_correspondence(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Stable diagonal pair colors = automorphism orbits on elements."""
    inst = CfiInstance(complete_graph(5), 2, (1, 0, 0, 0, 0))
    structure = build(inst, caps)
    coloring = wl_refine(structure, 2, caps)
    uni = universe_of(inst, caps)
    n = len(uni)

    perms = []
    for pi in automorphisms(inst, caps):
        bij = twist_bijection(inst, pi)
        perms.append([uni.index[bij[uni.elements[i]]] for i in range(n)])
    if len(perms) != 64:
        return False, {"automorphisms": len(perms)}

    rep = list(range(n))
    for perm in perms:
        for a in range(n):
            ra, rb = rep[a], rep[perm[a]]
            if ra != rb:
                lo, hi = min(ra, rb), max(ra, rb)
                rep = [lo if x == hi else x for x in rep]
    orbit_blocks: dict[int, set[int]] = {}
    color_blocks: dict[int, set[int]] = {}
    for a in range(n):
        orbit_blocks.setdefault(rep[a], set()).add(a)
        color_blocks.setdefault(coloring.color((a, a)), set()).add(a)
    ok = set(map(frozenset, orbit_blocks.values())) == set(
        map(frozenset, color_blocks.values())
    )
    return ok and len(color_blocks) == 25, {
        "diagonal_classes": len(color_blocks),
        "orbits": len(orbit_blocks),
        "automorphisms": len(perms),
    }


def folding_soundness(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Folding preserves solvability for q-group symmetry with q != p."""
    rng = random.Random(seed)
    combos = [(3, 2), (2, 3), (5, 2), (2, 5), (5, 3)]
    solvable = 0
    for t in range(200):
        p, q = combos[t % len(combos)]
        sys, gamma = random_stabilized_system(rng, p, q)
        rows, cols = sys.matrix.rows, sys.matrix.cols
        plain = is_solvable(sys)
        part = column_orbits(gamma, rows, cols)
        if is_solvable(fold_columns(sys, part)) != plain:
            return False, {"trial": t, "p": p, "q": q, "stage": "folded solvability"}
        b = symmetric_solution(sys, gamma, caps)
        if (b is not None) != plain:
            return False, {"trial": t, "p": p, "q": q, "stage": "solution presence"}
        if b is not None:
            solvable += 1
            lhs = (sys.matrix.to_array() @ b) % p
            if not np.array_equal(lhs, np.asarray(sys.rhs) % p):
                return False, {"trial": t, "stage": "M b = ones"}
            for block in part.blocks:
                if len({int(b[j]) for j in block}) != 1:
                    return False, {"trial": t, "stage": "orbit constancy"}

    # the characteristic-q counterexample: solvable, but the folded system is
    # not; the precondition must refuse it rather than fold
    m = PrimeFieldMatrix(3, np.array([[1, 1, 1]], dtype=np.int64))
    sys = LinearSystem(m, np.array([1], dtype=np.int64))
    gamma = PermutationGroup(4, [(0, 2, 3, 1)])
    part = column_orbits(gamma, 1, 3)
    if not is_solvable(sys) or is_solvable(fold_columns(sys, part)):
        return False, {"stage": "counterexample shape"}
    try:
        symmetric_solution(sys, gamma, caps)
        return False, {"stage": "counterexample accepted"}
    except InputError:
        pass
    return True, {"trials": 200, "solvable_trials": solvable}


def solvability_rank(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Span-membership rank equals Gaussian rank on random matrices."""
    rng = random.Random(seed)
    for t in range(200):
        p = (2, 3, 5)[t % 3]
        rows = rng.randrange(1, 13)
        cols = rng.randrange(1, 13)
        m = PrimeFieldMatrix(
            p,
            np.array(
                [[rng.randrange(p) for _ in range(cols)] for _ in range(rows)],
                dtype=np.int64,
            ),
        )
        order = list(range(cols))
        rng.shuffle(order)
        blocks, at = [], 0
        while at < cols:
            size = rng.randrange(1, cols - at + 1)
            blocks.append(order[at : at + size])
            at += size
        got = rank_via_solvability(m, OrbitPartition(blocks, cols))
        if got != rank(m):
            return False, {"trial": t, "p": p, "got": got, "want": rank(m)}
    return True, {"trials": 200}


def _pair_orbit_reps(n: int, perms: list) -> dict[tuple[int, int], int]:
    rep = {pt: i for i, pt in enumerate(itertools.product(range(n), repeat=2))}
    for perm in perms:
        for a, b in itertools.product(range(n), repeat=2):
            ra, rb = rep[(a, b)], rep[(perm[a], perm[b])]
            if ra != rb:
                lo, hi = min(ra, rb), max(ra, rb)
                for pt, r in rep.items():
                    if r == hi:
                        rep[pt] = lo
    return rep


def sylow_structure(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Group orders, exhaustive pair invariance/completeness, sampled triples."""
    rng = random.Random(seed)
    orders = {}
    for q, r in [(2, 2), (2, 3), (3, 2)]:
        group = SylowGroup(q, r)
        perms = group.permutations(caps)  # validates size, identity, closure
        orders[f"q={q},r={r}"] = len(perms)
        n = group.degree()

        for perm in perms:
            for a in range(n):
                for b in range(n):
                    if signature(q, r, a, b) != signature(q, r, perm[a], perm[b]):
                        return False, {"q": q, "r": r, "stage": "pair invariance"}

        rep = _pair_orbit_reps(n, perms)
        sig_of = {
            (a, b): signature(q, r, a, b)
            for a, b in itertools.product(range(n), repeat=2)
        }
        points = list(rep)
        for s in points:
            for t in points:
                if (sig_of[s] == sig_of[t]) != (rep[s] == rep[t]):
                    return False, {"q": q, "r": r, "stage": "pair completeness"}

        for _ in range(120):
            t1 = tuple(rng.randrange(n) for _ in range(3))
            perm = perms[rng.randrange(len(perms))]
            moved = tuple(perm[a] for a in t1)
            if tuple_signature(q, r, t1) != tuple_signature(q, r, moved):
                return False, {"q": q, "r": r, "stage": "triple invariance"}
            t2 = tuple(rng.randrange(n) for _ in range(3))
            same_sig = tuple_signature(q, r, t1) == tuple_signature(q, r, t2)
            in_orbit = any(tuple(p[a] for a in t1) == t2 for p in perms)
            if same_sig != in_orbit:
                return False, {"q": q, "r": r, "stage": "triple completeness"}
    want = {"q=2,r=2": 8, "q=2,r=3": 128, "q=3,r=2": 81}
    return orders == want, {"orders": orders}


def _brute_histogram(q: int, r: int, ell: int) -> dict:
    """sigma -> (count, lex-least tuple), recomputed from digit paths."""
    n = q**r

    def from_digits(a: int, b: int):
        if a == b:
            return (0, 0)
        for m in reversed(range(r)):
            da, db = (a // q**m) % q, (b // q**m) % q
            if da != db:
                return (m + 1, (db - da) % q)

    table = {(a, b): from_digits(a, b) for a in range(n) for b in range(n)}
    hist: dict = {}
    for tup in itertools.product(range(n), repeat=ell):
        sig = tuple(
            table[(tup[i], tup[j])] for i in range(ell) for j in range(i + 1, ell)
        )
        cnt, best = hist.get(sig, (0, tup))
        hist[sig] = (cnt + 1, best)
    return hist


def signature_counting(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Recursive counts, witnesses, and realizable sets against enumeration."""
    checked = 0
    for q, r, p in [(2, 2, 3), (2, 3, 3), (3, 2, 2)]:
        for ell in (1, 2, 3):
            hist = _brute_histogram(q, r, ell)
            listed = realizable_signatures(q, r, ell)
            if sorted(hist) != sorted(listed):
                return False, {"q": q, "r": r, "ell": ell, "stage": "realizable set"}
            for sig, (cnt, best) in hist.items():
                res, wit = count_realizations(q, r, p, ell, sig, r, 0)
                if res != cnt % p or wit != best:
                    return False, {"q": q, "r": r, "ell": ell, "sigma": sig}
                checked += 1
    return True, {"signatures_checked": checked}


def compact_equivalence(seed: int = 0, caps: Mapping | None = None) -> tuple[bool, dict]:
    """Full / averaged / deduplicated / compact systems agree on solvability."""
    rng = random.Random(seed)
    solvable = 0
    for t in range(50):
        q, r, p = (2, 3, 3) if t % 2 == 0 else (3, 2, 2)
        k = rng.choice([1, 2])
        ell = rng.choice([1, 2])
        alpha = random_formula(rng, k, ell)
        verdict = validate_compact(alpha, q, r, p, k, ell, caps)
        if not verdict["chain_holds"]:
            return False, {
                "trial": t,
                "alpha": alpha.to_text(),
                "q": q,
                "r": r,
                "p": p,
                "verdict": verdict,
            }
        solvable += verdict["matrix_solvable"]
    return True, {"trials": 50, "solvable": solvable}


class CriterionOutcome:
    """One acceptance criterion's verdict, timing, and diagnostics."""

    __slots__ = ("number", "name", "passed", "seconds", "bound", "details")

    def __init__(self, number, name, passed, seconds, bound, details):
        self.number = number
        self.name = name
        self.passed = passed
        self.seconds = seconds
        self.bound = bound
        self.details = details

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (
            f"{mark} criterion {self.number:2d} {self.name:<22s}"
            f" {self.seconds:7.2f}s (bound {self.bound:.0f}s)"
        )

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "bound_seconds": self.bound,
            "details": self.details,
        }


Criterion = Callable[[int, Mapping | None], tuple[bool, dict]]

CRITERIA: tuple[tuple[int, str, float, Criterion], ...] = (
    (1, "iso-class-partition", 5.0, iso_class_partition),
    (2, "les-soundness", 60.0, les_soundness),
    (3, "canonical-form", 10.0, canonical_form_agreement),
    (4, "wl-equivalence", 120.0, wl_equivalence),
    (5, "orbit-colors", 60.0, orbit_correspondence),
    (6, "folding-soundness", 30.0, folding_soundness),
    (7, "solvability-rank", 10.0, solvability_rank),
    (8, "sylow-structure", 60.0, sylow_structure),
    (9, "signature-counting", 60.0, signature_counting),
    (10, "compact-equivalence", 120.0, compact_equivalence),
)


def run_criterion(number: int, seed: int = 0, caps: Mapping | None = None) -> CriterionOutcome:
    for num, name, bound, fn in CRITERIA:
        if num == number:
            start = time.perf_counter()
            passed, details = fn(seed, caps)
            elapsed = time.perf_counter() - start
            return CriterionOutcome(num, name, passed, elapsed, bound, details)
    raise InputError(f"no criterion numbered {number}")


def run_suite(
    seed: int = 0, caps: Mapping | None = None, numbers: list[int] | None = None
) -> list[CriterionOutcome]:
    wanted = [num for num, *_ in CRITERIA] if numbers is None else numbers
    return [run_criterion(num, seed, caps) for num in wanted]


def signature_suite(
    q: int, r: int, p: int, lmax: int, seed: int = 0, caps: Mapping | None = None
) -> dict:
    """Invariance, completeness, and counting checks for one group, as a report.

    Exhaustive on pairs; lengths 3..lmax are sampled (200 draws each) for
    invariance and completeness, while counting is compared against full
    enumeration up to lmax with the tuple cap enforced.
    """
    if not isinstance(lmax, int) or lmax < 1:
        raise InputError(f"lmax must be a positive integer, got {lmax!r}")
    count_realizations(q, r, p, 0, (), 0, 0)  # validates q, r, p, and p != q
    caps = load_caps(caps)
    rng = random.Random(seed)
    group = SylowGroup(q, r)
    perms = group.permutations(caps)
    n = group.degree()
    report: dict = {
        "q": q,
        "r": r,
        "p": p,
        "lmax": lmax,
        "group_order": group.order(),
        "order_confirmed": len(perms) == group.order(),
    }

    invariant = all(
        signature(q, r, a, b) == signature(q, r, perm[a], perm[b])
        for perm in perms
        for a in range(n)
        for b in range(n)
    )
    rep = _pair_orbit_reps(n, perms)
    complete = all(
        (signature(q, r, *s) == signature(q, r, *t)) == (rep[s] == rep[t])
        for s in rep
        for t in rep
    )
    for ell in range(3, lmax + 1):
        for _ in range(200):
            t1 = tuple(rng.randrange(n) for _ in range(ell))
            perm = perms[rng.randrange(len(perms))]
            moved = tuple(perm[a] for a in t1)
            invariant &= tuple_signature(q, r, t1) == tuple_signature(q, r, moved)
            t2 = tuple(rng.randrange(n) for _ in range(ell))
            same_sig = tuple_signature(q, r, t1) == tuple_signature(q, r, t2)
            in_orbit = any(tuple(pm[a] for a in t1) == t2 for pm in perms)
            complete &= same_sig == in_orbit
    report["invariance"] = invariant
    report["completeness"] = complete

    counting = True
    signatures_checked = 0
    for ell in range(1, lmax + 1):
        check_cap("wl_tuples", n**ell, caps)
        hist = _brute_histogram(q, r, ell)
        listed = realizable_signatures(q, r, ell)
        counting &= sorted(hist) == sorted(listed)
        for sig, (cnt, best) in hist.items():
            res, wit = count_realizations(q, r, p, ell, sig, r, 0)
            counting &= res == cnt % p and wit == best
            signatures_checked += 1
    report["counting"] = counting
    report["signatures_checked"] = signatures_checked
    report["passed"] = bool(
        report["order_confirmed"] and invariant and complete and counting
    )
    return report


def render_report(outcomes: list[CriterionOutcome]) -> str:
    lines = [o.line() for o in outcomes]
    total = sum(o.seconds for o in outcomes)
    failed = [o.number for o in outcomes if not o.passed]
    if failed:
        lines.append(f"FAILED criteria: {failed} ({total:.2f}s total)")
    else:
        lines.append(f"all {len(outcomes)} criteria passed ({total:.2f}s total)")
    return "\n".join(lines)


def suite_json(outcomes: list[CriterionOutcome]) -> str:
    return json.dumps([o.to_dict() for o in outcomes], sort_keys=True)
