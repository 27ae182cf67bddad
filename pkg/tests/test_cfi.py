"""Gadget construction tests: counting, well-formedness, twist action, oracle laws."""

import itertools
import random

import pytest

from cfiforge.cfi import (
    CYCLE,
    INVERSE,
    LINK,
    PREORDER,
    CfiInstance,
    TwistVector,
    apply_twist,
    automorphisms,
    brute_iso_oracle,
    build,
    canonical_form,
    enumerate_twists,
    iso_class,
    path_twist,
    sigma_twist,
    twist_bijection,
    twist_orbit,
    universe_of,
    zero_twist,
)
from cfiforge.errors import CapExceeded, InputError
from cfiforge.relstruct import complete_graph, path_graph


def k4(q, d):
    return CfiInstance(complete_graph(4), q, d)


def k5(q, d):
    return CfiInstance(complete_graph(5), q, d)


class TestUniverse:
    def test_sizes(self):
        assert len(universe_of(k4(2, (0, 0, 0, 0)))) == 40
        assert len(universe_of(k5(2, (0,) * 5))) == 80
        assert len(universe_of(k5(3, (0,) * 5))) == 195

    def test_enumeration_order(self):
        uni = universe_of(CfiInstance(path_graph(2), 2, (0, 1)))
        # directed edges (0,1), (1,0) first, then the two gadgets
        assert uni.elements == (
            ("edge", (0, 1), 0),
            ("edge", (0, 1), 1),
            ("edge", (1, 0), 0),
            ("edge", (1, 0), 1),
            ("eq", 0, (0,)),
            ("eq", 1, (1,)),
        )
        assert uni.ranks == (0, 0, 1, 1, 2, 3)

    def test_gadget_cap(self):
        with pytest.raises(CapExceeded):
            build(k5(3, (0,) * 5), caps={"gadget_size": 9})

    def test_preorder_cap(self):
        with pytest.raises(CapExceeded):
            build(k4(2, (0, 0, 0, 0)), caps={"preorder_universe": 39})


@pytest.fixture(scope="module")
def parts():
    inst = k4(3, (1, 2, 0, 0))
    return inst, universe_of(inst), build(inst)


class TestBuildWellFormed:

    def test_each_edge_class_carries_one_directed_q_cycle(self, parts):
        inst, uni, s = parts
        q = inst.q
        cyc = s.relation(CYCLE)
        for e in inst.base.directed_edges():
            nodes = [uni.index[("edge", e, i)] for i in range(q)]
            arcs = [(a, b) for a, b in cyc if a in nodes]
            assert len(arcs) == q
            assert all(b in nodes for _, b in arcs)
            succ = dict(arcs)
            assert len(succ) == q
            walk, at = set(), nodes[0]
            for _ in range(q):
                walk.add(at)
                at = succ[at]
            assert at == nodes[0] and walk == set(nodes)

    def test_inverse_pairs_form_symmetric_bijection(self, parts):
        inst, uni, s = parts
        q = inst.q
        inv = s.relation(INVERSE)
        assert all((b, a) in inv for a, b in inv)
        for u, v in inst.base.directed_edges():
            block = [
                (x, y)
                for x in range(q)
                for y in range(q)
                if (uni.index[("edge", (u, v), x)], uni.index[("edge", (v, u), y)]) in inv
            ]
            assert sorted(block) == sorted((x, (-x) % q) for x in range(q))

    def test_links_hit_one_node_per_incident_class(self, parts):
        inst, uni, s = parts
        link = s.relation(LINK)
        by_src = {}
        for a, b in link:
            by_src.setdefault(a, []).append(b)
        for v in range(inst.base.n):
            incident = inst.base.incident(v)
            for el in uni.elements:
                if el[0] != "eq" or el[1] != v:
                    continue
                rho = el[2]
                targets = sorted(by_src[uni.index[el]])
                expected = sorted(uni.index[("edge", e, rho[j])] for j, e in enumerate(incident))
                assert targets == expected

    def test_preorder_is_a_total_preorder_with_expected_classes(self, parts):
        _, uni, s = parts
        pre = s.relation(PREORDER)
        n = s.universe_size
        for a in range(n):
            assert (a, a) in pre
        for a, b in itertools.combinations(range(n), 2):
            assert ((a, b) in pre) or ((b, a) in pre)
            both = (a, b) in pre and (b, a) in pre
            assert both == (uni.ranks[a] == uni.ranks[b])
        assert all(
            not ((a, b) in pre and uni.ranks[a] > uni.ranks[b]) for a in range(n) for b in range(n)
        )


class TestIsoClass:
    def test_examples(self):
        assert iso_class(k4(3, (1, 2, 0, 0))) == 0
        assert iso_class(k4(2, (1, 0, 0, 0))) == 1

    def test_isomorphic_instances_share_class(self):
        assert brute_iso_oracle(k4(3, (1, 2, 0, 0)), k4(3, (0, 0, 0, 0)))


class TestTwists:
    def test_zero_twist_fixes_instance(self):
        inst = k4(3, (1, 2, 0, 0))
        assert apply_twist(inst, zero_twist(inst.base, 3)) == inst

    def test_sigma_example(self):
        inst = k4(3, (0, 0, 0, 0))
        out = apply_twist(inst, sigma_twist(inst.base, 3, (0, 1), 1))
        assert out.d == (1, 2, 0, 0)

    def test_twist_invariant_pair_rejected(self):
        with pytest.raises(InputError):
            TwistVector(3, {(0, 1): 1, (1, 0): 1})
        with pytest.raises(InputError):
            TwistVector(3, {(0, 1): 1})

    def test_iso_class_invariant_under_twists(self):
        inst = k4(2, (1, 0, 1, 1))
        for pi in itertools.islice(enumerate_twists(inst.base, 2), 64):
            assert iso_class(apply_twist(inst, pi)) == iso_class(inst)

    def test_action_is_additive(self):
        rng = random.Random(7)
        base = complete_graph(4)
        twists = list(enumerate_twists(base, 3))
        inst = k4(3, (2, 1, 0, 2))
        for _ in range(20):
            p1, p2 = rng.choice(twists), rng.choice(twists)
            assert apply_twist(apply_twist(inst, p1), p2) == apply_twist(inst, p1 + p2)

    def test_bijections_compose(self):
        base = complete_graph(4)
        p1 = sigma_twist(base, 2, (0, 2), 1)
        p2 = sigma_twist(base, 2, (1, 3), 1)
        inst = k4(2, (0, 1, 0, 1))
        mid = apply_twist(inst, p1)
        m1 = twist_bijection(inst, p1)
        m2 = twist_bijection(mid, p2)
        m12 = twist_bijection(inst, p1 + p2)
        assert all(m2[m1[x]] == m12[x] for x in m1)

    def test_bijection_is_structure_isomorphism(self):
        # relabeling build(inst) through the bijection gives build of the twisted instance
        inst = k4(2, (1, 1, 0, 0))
        pi = sigma_twist(inst.base, 2, (1, 2), 1) + sigma_twist(inst.base, 2, (0, 3), 1)
        out = apply_twist(inst, pi)
        bij = twist_bijection(inst, pi)
        uni_a, uni_b = universe_of(inst), universe_of(out)
        perm = {uni_a.index[el]: uni_b.index[img] for el, img in bij.items()}
        s_a, s_b = build(inst), build(out)
        assert len(perm) == s_a.universe_size
        for name in s_a.vocabulary.names:
            mapped = frozenset((perm[a], perm[b]) for a, b in s_a.relation(name))
            assert mapped == s_b.relation(name)


class TestPathTwist:
    def test_single_edge(self):
        base = complete_graph(4)
        out = apply_twist(CfiInstance(base, 3, (0, 0, 0, 0)), path_twist(base, 3, [0, 1], 1))
        assert out.d == (1, 2, 0, 0)

    def test_cycle_is_automorphism(self):
        base = complete_graph(4)
        inst = CfiInstance(base, 3, (1, 0, 2, 0))
        for z in range(3):
            assert apply_twist(inst, path_twist(base, 3, [0, 1, 2, 0], z)) == inst

    def test_zero_shift(self):
        base = complete_graph(4)
        assert path_twist(base, 2, [0, 1, 2], 0) == zero_twist(base, 2)

    def test_moves_only_endpoints(self):
        base = complete_graph(5)
        inst = CfiInstance(base, 3, (0, 0, 0, 0, 0))
        out = apply_twist(inst, path_twist(base, 3, [1, 0, 2, 4], 2))
        assert out.d == (0, 2, 0, 0, 1)

    def test_rejects_bad_paths(self):
        base = path_graph(4)
        with pytest.raises(InputError):
            path_twist(base, 2, [0, 1, 0, 1], 1)
        with pytest.raises(InputError):
            path_twist(base, 2, [0, 2], 1)
        with pytest.raises(InputError):
            path_twist(base, 2, [0], 1)


class TestAutomorphisms:
    def test_counts_on_complete_graphs(self):
        assert len(automorphisms(k4(2, (0, 0, 0, 0)))) == 8
        assert len(automorphisms(k5(2, (0,) * 5))) == 64
        assert len(automorphisms(k4(3, (1, 0, 0, 2)))) == 27

    def test_tree_has_only_zero(self):
        inst = CfiInstance(path_graph(5), 3, (0, 1, 2, 0, 0))
        assert automorphisms(inst) == [zero_twist(inst.base, 3)]

    def test_every_automorphism_fixes_instance(self):
        inst = k4(2, (1, 0, 1, 0))
        for pi in automorphisms(inst):
            assert apply_twist(inst, pi) == inst

    def test_matches_direct_filter(self):
        inst = k4(2, (1, 1, 1, 0))
        fixers = {pi for pi in enumerate_twists(inst.base, 2) if apply_twist(inst, pi) == inst}
        assert fixers == set(automorphisms(inst))


class TestBruteOracle:
    def test_reflexive(self):
        inst = k4(2, (1, 0, 1, 0))
        assert brute_iso_oracle(inst, inst)

    def test_examples(self):
        assert brute_iso_oracle(k4(2, (1, 1, 0, 0)), k4(2, (0, 0, 0, 0)))
        assert not brute_iso_oracle(k4(2, (1, 0, 0, 0)), k4(2, (0, 0, 0, 0)))

    def test_matches_sum_law_exhaustively_q2(self):
        insts = [k4(2, d) for d in itertools.product(range(2), repeat=4)]
        for a, b in itertools.combinations(insts, 2):
            assert brute_iso_oracle(a, b) == (iso_class(a) == iso_class(b))

    def test_matches_sum_law_sampled_q3(self):
        rng = random.Random(11)
        ds = [tuple(rng.randrange(3) for _ in range(4)) for _ in range(8)]
        for da, db in itertools.combinations(ds, 2):
            a, b = k4(3, da), k4(3, db)
            assert brute_iso_oracle(a, b) == (iso_class(a) == iso_class(b))

    def test_orbit_is_the_sum_class(self):
        inst = k4(3, (1, 0, 1, 0))
        orbit = twist_orbit(inst)
        expected = {
            d for d in itertools.product(range(3), repeat=4) if sum(d) % 3 == iso_class(inst)
        }
        assert orbit == frozenset(expected)

    def test_rejects_mismatched_inputs(self):
        with pytest.raises(InputError):
            brute_iso_oracle(k4(2, (0, 0, 0, 0)), k5(2, (0,) * 5))
        with pytest.raises(InputError):
            brute_iso_oracle(k4(2, (0, 0, 0, 0)), k4(3, (0, 0, 0, 0)))


class TestCanonicalForm:
    def test_zero_vector_is_fixed_point(self):
        inst = k4(2, (0, 0, 0, 0))
        assert canonical_form(inst) == build(inst)

    def test_equal_class_equal_form(self):
        assert canonical_form(k4(2, (1, 1, 0, 0))) == canonical_form(k4(2, (0, 0, 0, 0)))

    def test_distinct_class_distinct_form(self):
        assert canonical_form(k4(2, (1, 0, 0, 0))) != canonical_form(k4(2, (0, 0, 0, 0)))

    def test_matches_oracle_for_all_k4_q2(self):
        insts = [k4(2, d) for d in itertools.product(range(2), repeat=4)]
        for a, b in itertools.combinations(insts, 2):
            assert (canonical_form(a) == canonical_form(b)) == brute_iso_oracle(a, b)


class TestSerialization:
    def test_instance_round_trip(self):
        inst = k4(3, (1, 2, 0, 1))
        assert CfiInstance.from_json(inst.to_json()) == inst

    def test_twist_round_trip(self):
        base = complete_graph(4)
        pi = sigma_twist(base, 3, (0, 1), 2) + sigma_twist(base, 3, (2, 3), 1)
        assert TwistVector.from_json(pi.to_json()) == pi

    def test_validation(self):
        with pytest.raises(InputError):
            CfiInstance(complete_graph(4), 4, (0, 0, 0, 0))
        with pytest.raises(InputError):
            CfiInstance(complete_graph(4), 2, (0, 0, 0))
        with pytest.raises(InputError):
            CfiInstance(complete_graph(4), 2, (0, 0, 0, 2))
        with pytest.raises(InputError):
            apply_twist(k4(2, (0, 0, 0, 0)), zero_twist(complete_graph(4), 3))
        with pytest.raises(InputError):
            apply_twist(k4(2, (0, 0, 0, 0)), zero_twist(complete_graph(5), 2))
