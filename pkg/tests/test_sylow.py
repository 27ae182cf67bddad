"""Wreath-product group structure and signature counting against brute oracles."""

import itertools
import random

import pytest

from cfiforge.caps import DEFAULTS
from cfiforge.errors import CapExceeded, ConsistencyError, InputError
from cfiforge.eqformula import EqualityType, parse
from cfiforge.symred import PermutationGroup
from cfiforge.sylow import (
    SylowGroup,
    compact_matrix,
    count_per_equality_type,
    count_realizations,
    realizable_signatures,
    signature,
    sylow_group,
    tuple_signature,
    validate_compact,
)


def brute_signature(q, r, a, b):
    # independent oracle: walk the digit paths root-down, report the first split
    pa = [(a // q**m) % q for m in reversed(range(r))]
    pb = [(b // q**m) % q for m in reversed(range(r))]
    for depth in range(r):
        if pa[depth] != pb[depth]:
            return (r - depth, (pb[depth] - pa[depth]) % q)
    return (0, 0)


def brute_histogram(q, r, ell):
    """sigma -> (count, lex-least tuple) over all of [q^r]^ell."""
    n = q**r
    table = {
        (a, b): brute_signature(q, r, a, b) for a in range(n) for b in range(n)
    }
    hist = {}
    for tup in itertools.product(range(n), repeat=ell):
        sig = tuple(
            table[(tup[i], tup[j])]
            for i in range(ell)
            for j in range(i + 1, ell)
        )
        cnt, best = hist.get(sig, (0, tup))
        hist[sig] = (cnt + 1, best)
    return hist


class TestGroupStructure:
    def test_orders(self):
        assert SylowGroup(2, 2).order() == 8
        assert SylowGroup(3, 2).order() == 81
        assert SylowGroup(2, 3).order() == 128

    def test_degree(self):
        assert sylow_group(3, 2).degree() == 9

    def test_depth_one_is_cyclic(self):
        g = SylowGroup(5, 1)
        perms = g.permutations()
        assert sorted(perms) == sorted(
            tuple((x + c) % 5 for x in range(5)) for c in range(5)
        )

    def test_block_shift_permutation(self):
        g = SylowGroup(2, 2)
        assert g.to_permutation(((0, 0), 1)) == (2, 3, 0, 1)
        assert g.to_permutation(((1, 0), 0)) == (1, 0, 2, 3)

    def test_materialized_groups_validate(self):
        for q, r in [(2, 2), (3, 2), (2, 3)]:
            g = SylowGroup(q, r)
            perms = g.permutations()
            assert len(perms) == g.order()

    def test_permutations_detects_tampering(self):
        g = SylowGroup(2, 2)
        broken = SylowGroup(2, 2)
        broken.to_permutation  # same object, patch the element stream instead
        elems = g.elements()
        elems[0] = elems[1]  # duplicate drops the distinct count below the order

        class Fake(SylowGroup):
            def elements(self, caps=None):
                return elems

        with pytest.raises(ConsistencyError, match="distinct"):
            Fake(2, 2).permutations()

    def test_generators_generate_whole_group(self):
        for q, r in [(2, 2), (3, 2), (2, 3)]:
            g = SylowGroup(q, r)
            gens = g.generator_permutations()
            closure = PermutationGroup(g.degree(), gens)
            assert closure.order() == g.order()
            assert set(closure.elements()) == set(g.permutations())

    def test_generator_count_is_depth(self):
        assert len(SylowGroup(2, 3).generator_permutations()) == 3

    def test_large_group_hits_enumeration_cap(self):
        g = SylowGroup(3, 3)  # order 3**13
        assert g.order() > DEFAULTS["group_enum"]
        with pytest.raises(CapExceeded):
            g.elements()

    def test_composite_q_rejected(self):
        with pytest.raises(InputError):
            SylowGroup(4, 2)
        with pytest.raises(InputError):
            SylowGroup(2, 0)

    def test_malformed_elements_rejected(self):
        g = SylowGroup(2, 2)
        with pytest.raises(InputError):
            g.to_permutation(3)
        with pytest.raises(InputError):
            g.to_permutation(((0, 0, 0), 1))
        with pytest.raises(InputError):
            g.to_permutation(((0, 0), 2))


class TestSignature:
    def test_frozen_examples(self):
        assert signature(2, 2, 1, 1) == (0, 0)
        assert signature(2, 2, 1, 3) == (2, 1)
        assert signature(2, 2, 0, 1) == (1, 1)
        assert signature(3, 2, 0, 5) == (2, 1)

    def test_out_of_range(self):
        with pytest.raises(InputError):
            signature(2, 2, 0, 4)
        with pytest.raises(InputError):
            signature(2, 2, -1, 0)

    def test_antisymmetry(self):
        for q, r in [(2, 2), (3, 2), (2, 3)]:
            n = q**r
            for a in range(n):
                for b in range(n):
                    h, d = signature(q, r, a, b)
                    assert signature(q, r, b, a) == (h, (-d) % q)

    def test_matches_digit_path_oracle(self):
        for q, r in [(2, 2), (3, 2), (2, 3)]:
            n = q**r
            for a in range(n):
                for b in range(n):
                    assert signature(q, r, a, b) == brute_signature(q, r, a, b)

    def test_invariant_under_group_pairs(self):
        for q, r in [(2, 2), (3, 2), (2, 3)]:
            g = SylowGroup(q, r)
            n = g.degree()
            for perm in g.permutations():
                for a in range(n):
                    for b in range(n):
                        assert signature(q, r, a, b) == signature(
                            q, r, perm[a], perm[b]
                        )

    def test_invariant_under_group_triples_sampled(self):
        rng = random.Random(11)
        for q, r in [(3, 2), (2, 3)]:
            g = SylowGroup(q, r)
            n = g.degree()
            perms = g.permutations()
            for _ in range(200):
                perm = rng.choice(perms)
                tup = tuple(rng.randrange(n) for _ in range(3))
                moved = tuple(perm[a] for a in tup)
                assert tuple_signature(q, r, tup) == tuple_signature(q, r, moved)

    def test_complete_on_pairs(self):
        # equal signature iff same orbit of the group acting on [n]^2
        for q, r in [(2, 2), (3, 2)]:
            g = SylowGroup(q, r)
            n = g.degree()
            perms = g.permutations()
            orbit_of = {}
            for a in range(n):
                for b in range(n):
                    if (a, b) in orbit_of:
                        continue
                    orbit = frozenset((p[a], p[b]) for p in perms)
                    for pt in orbit:
                        orbit_of[pt] = orbit
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        for d in range(n):
                            same_sig = signature(q, r, a, b) == signature(q, r, c, d)
                            assert same_sig == ((c, d) in orbit_of[(a, b)])

    def test_complete_on_triples_sampled(self):
        rng = random.Random(7)
        q, r = 2, 3
        g = SylowGroup(q, r)
        n = g.degree()
        perms = g.permutations()
        for _ in range(60):
            t1 = tuple(rng.randrange(n) for _ in range(3))
            t2 = tuple(rng.randrange(n) for _ in range(3))
            same_sig = tuple_signature(q, r, t1) == tuple_signature(q, r, t2)
            in_orbit = any(tuple(p[a] for a in t1) == t2 for p in perms)
            assert same_sig == in_orbit

    def test_tuple_signature_shapes(self):
        assert tuple_signature(2, 2, (3,)) == ()
        assert tuple_signature(2, 2, (2, 2, 2)) == ((0, 0), (0, 0), (0, 0))
        assert tuple_signature(2, 2, (0, 1, 3)) == ((1, 1), (2, 1), (2, 1))


class TestCountRealizations:
    def test_single_position(self):
        assert count_realizations(3, 2, 2, 1, (), 2, 0) == (1, (0,))

    def test_frozen_pair_count(self):
        # at q=2 both orientations carry offset 1, so all 8 cross-half pairs
        # of [4] realize ((2, 1),); 8 mod 3 = 2
        res, wit = count_realizations(2, 2, 3, 2, ((2, 1),), 2, 0)
        assert res == 2
        assert wit == (0, 2)

    def test_signature_above_subtree_is_empty(self):
        res, wit = count_realizations(2, 2, 3, 2, ((2, 1),), 1, 0)
        assert res == 0
        assert wit is None

    def test_fixed_prefix(self):
        # first entry pinned to 1; partners across the half split are 2 and 3
        res, wit = count_realizations(2, 2, 3, 2, ((2, 1),), 2, 0, fixed=(1,))
        assert res == 2
        assert wit == (1, 2)

    def test_inconsistent_fixed_pair(self):
        # both entries pinned but their actual signature is (2, 1), not (1, 1)
        res, wit = count_realizations(2, 2, 3, 2, ((1, 1),), 2, 0, fixed=(0, 2))
        assert res == 0
        assert wit is None

    def test_malformed_sigma(self):
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 2, (), 2, 0)  # wrong length
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 2, ((0, 1),), 2, 0)  # height 0 offset 1
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 2, ((3, 1),), 2, 0)  # height above depth
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 2, "junk", 2, 0)

    def test_parameter_validation(self):
        with pytest.raises(InputError):
            count_realizations(2, 2, 2, 1, (), 2, 0)  # p == q
        with pytest.raises(InputError):
            count_realizations(2, 2, 4, 1, (), 2, 0)  # composite p
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 1, (), 3, 0)  # height above depth
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 1, (), 1, 2)  # block index out of range
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 1, (), 1, 0, fixed=(2,))  # outside block
        with pytest.raises(InputError):
            count_realizations(2, 2, 3, 1, (), 2, 0, fixed=(0, 1))  # too many fixed

    @pytest.mark.parametrize("q,r,p", [(2, 2, 3), (3, 2, 2), (2, 3, 3)])
    def test_matches_brute_histogram(self, q, r, p):
        for ell in (1, 2, 3):
            hist = brute_histogram(q, r, ell)
            listed = realizable_signatures(q, r, ell)
            assert sorted(hist) == sorted(listed)
            for sig, (cnt, best) in hist.items():
                res, wit = count_realizations(q, r, p, ell, sig, r, 0)
                assert res == cnt % p
                assert wit == best
            # everything feasible-looking but unseen must count to zero
            entries = [(0, 0)] + [
                (h, d) for h in range(1, r + 1) for d in range(q)
            ]
            for cand in itertools.product(
                entries, repeat=ell * (ell - 1) // 2
            ):
                if cand in hist:
                    continue
                res, wit = count_realizations(q, r, p, ell, cand, r, 0)
                assert (res, wit) == (0, None)

    def test_matches_brute_in_subtrees(self):
        rng = random.Random(4)
        for q, r, p in [(3, 2, 2), (2, 3, 3)]:
            for _ in range(40):
                ell = rng.choice([2, 3])
                i = rng.randrange(0, r + 1)
                x = rng.randrange(q ** (r - i))
                lo, size = x * q**i, q**i
                s = rng.randrange(0, ell + 1)
                fixed = tuple(lo + rng.randrange(size) for _ in range(s))
                tup = fixed + tuple(
                    lo + rng.randrange(size) for _ in range(ell - s)
                )
                sigma = tuple_signature(q, r, tup)
                brute = 0
                best = None
                for rest in itertools.product(
                    range(lo, lo + size), repeat=ell - s
                ):
                    cand = fixed + rest
                    if tuple_signature(q, r, cand) == sigma:
                        brute += 1
                        if best is None:
                            best = cand
                res, wit = count_realizations(q, r, p, ell, sigma, i, x, fixed)
                assert res == brute % p
                assert wit == best

    def test_realizable_counts(self):
        assert len(realizable_signatures(2, 2, 1)) == 1
        assert len(realizable_signatures(2, 2, 2)) == 3
        assert len(realizable_signatures(2, 2, 3)) == 10
        assert len(realizable_signatures(3, 2, 3)) == 29
        assert len(realizable_signatures(2, 3, 3)) == 19


class TestCountPerEqualityType:
    def test_forced_equal(self):
        tau = EqualityType(1, 1, [(0, 1)])
        assert count_per_equality_type(2, 2, 3, tau, (), (), (1,)) == 1

    def test_all_distinct_single(self):
        tau = EqualityType(1, 1, [(0,), (1,)])
        # three values differ from a fixed point of [4]; 3 mod 3 = 0
        assert count_per_equality_type(2, 2, 3, tau, (), (), (1,)) == 0
        assert count_per_equality_type(2, 2, 5, tau, (), (), (1,)) == 3

    def test_type_contradicts_representative(self):
        tau = EqualityType(2, 1, [(0, 1), (2,)])
        assert count_per_equality_type(2, 2, 3, tau, ((2, 1),), (), (0, 2)) == 0

    def test_type_contradicts_sigma_b(self):
        # tau wants y1 = y2 but sigma_b separates them
        tau = EqualityType(1, 2, [(0,), (1, 2)])
        assert (
            count_per_equality_type(2, 2, 3, tau, (), ((1, 1),), (0,)) == 0
        )

    def test_representative_must_realize_sigma_a(self):
        tau = EqualityType(2, 1, [(0,), (1,), (2,)])
        with pytest.raises(InputError):
            count_per_equality_type(2, 2, 3, tau, ((1, 1),), (), (0, 2))

    def test_matches_brute_enumeration(self):
        rng = random.Random(9)
        for q, r, p in [(2, 3, 3), (3, 2, 2)]:
            n = q**r
            for _ in range(40):
                k = rng.choice([1, 2])
                ell = rng.choice([1, 2, 3])
                blocks = []
                for slot in range(k + ell):
                    if blocks and rng.random() < 0.4:
                        rng.choice(blocks).append(slot)
                    else:
                        blocks.append([slot])
                tau = EqualityType(k, ell, blocks)
                a = tuple(rng.randrange(n) for _ in range(k))
                sigma_a = tuple_signature(q, r, a)
                sigma_b = rng.choice(realizable_signatures(q, r, ell))
                brute = 0
                for b in itertools.product(range(n), repeat=ell):
                    if tuple_signature(q, r, b) != sigma_b:
                        continue
                    vals = a + b
                    if all(
                        (vals[i] == vals[j]) == tau.same(i, j)
                        for i in range(k + ell)
                        for j in range(i + 1, k + ell)
                    ):
                        brute += 1
                got = count_per_equality_type(q, r, p, tau, sigma_a, sigma_b, a)
                assert got == brute % p


class TestCompactMatrix:
    def test_match_formula(self):
        cm = compact_matrix(parse("x1=y1"), 2, 2, 3, 1, 1)
        assert cm.matrix.to_array().tolist() == [[1]]
        assert cm.row_signatures == ((),)
        assert cm.col_signatures == ((),)

    def test_tautology(self):
        cm = compact_matrix(parse("x1=x1", k=1, ell=1), 3, 2, 2, 1, 1)
        # all 9 values satisfy it; 9 mod 2 = 1
        assert cm.matrix.to_array().tolist() == [[1]]

    def test_contradiction(self):
        cm = compact_matrix(parse("x1=y1 & x1!=y1"), 2, 2, 3, 1, 1)
        assert cm.matrix.to_array().tolist() == [[0]]

    def test_shape_follows_realizable_sets(self):
        cm = compact_matrix(parse("x1=y1 & x2!=y1"), 2, 2, 3, 2, 1)
        assert len(cm.row_signatures) == 3
        assert len(cm.col_signatures) == 1

    def test_arity_mismatch(self):
        with pytest.raises(InputError):
            compact_matrix(parse("x1=y1"), 2, 2, 3, 2, 1)

    def test_p_equal_q_rejected(self):
        with pytest.raises(InputError):
            compact_matrix(parse("x1=y1"), 2, 2, 2, 1, 1)

    def test_cell_cap(self):
        with pytest.raises(CapExceeded):
            compact_matrix(
                parse("x1=y1"), 2, 2, 3, 1, 1, caps={"matrix_cells": 0}
            )

    def test_json_round_trip_is_deterministic(self):
        import json as _json

        cm = compact_matrix(parse("x1=y1 & x2!=y1"), 2, 2, 3, 2, 1)
        blob = _json.loads(cm.to_json())
        assert set(blob) == {"matrix", "row_signatures", "col_signatures"}
        assert blob["row_signatures"] == [[[0, 0]], [[1, 1]], [[2, 1]]]
        assert blob["col_signatures"] == [[]]
        assert cm.to_json() == compact_matrix(
            parse("x1=y1 & x2!=y1"), 2, 2, 3, 2, 1
        ).to_json()


class TestValidateCompact:
    @pytest.mark.parametrize(
        "text,q,r,p,k,ell",
        [
            ("x1=y1", 2, 2, 3, 1, 1),
            ("x1=y1 & x2!=y1", 2, 2, 3, 2, 1),
            ("x1!=y1 | x1=y2", 2, 2, 5, 1, 2),
            ("x1=y1 & x1=y2", 3, 2, 2, 1, 2),
        ],
    )
    def test_chain_holds(self, text, q, r, p, k, ell):
        verdict = validate_compact(parse(text), q, r, p, k, ell)
        assert verdict["chain_holds"]
        assert verdict["entries_match"]

    def test_unsolvable_case_stays_unsolvable_down_the_chain(self):
        verdict = validate_compact(parse("x1=y1 & x2!=y1"), 2, 2, 3, 2, 1)
        assert not verdict["matrix_solvable"]
        assert not verdict["compact_solvable"]

    def test_random_formulas(self):
        from cfiforge.eqformula import random_formula

        rng = random.Random(21)
        for _ in range(8):
            k = rng.choice([1, 2])
            ell = rng.choice([1, 2])
            alpha = random_formula(rng, k, ell)
            verdict = validate_compact(alpha, 2, 2, 3, k, ell)
            assert verdict["chain_holds"]
