import random

import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from glyms.fragments import (
    FragmentBudgetExceeded,
    FragmentationSettings,
    LevelSettings,
    enumerate_fragments,
    fragment_as_precursor,
)
from glyms.glycans import DerivatizationState, NATIVE, neutral_mass, parse_structure

from conftest import linear_chain, random_tree

ALL = FragmentationSettings()
SINGLE = FragmentationSettings(default=LevelSettings(max_cleavages=1))


def frag_map(fragments):
    return {f.signature: f for f in fragments}


def test_disaccharide_single_cleavage_masses():
    g = parse_structure("Hex(1-4)Hex", "D")
    frags = enumerate_fragments(g, NATIVE, SINGLE, 2)
    by_type = {}
    for f in frags:
        assert len(f.cleavages) == 1
        by_type[f.cleavages[0].fragment_type] = f.neutral_mass
    # oracle masses from the element table: residue base = 162.0528
    assert by_type["B"] == pytest.approx(162.052823, abs=1e-4)
    assert by_type["C"] == pytest.approx(180.063388, abs=1e-4)
    assert by_type["Y"] == pytest.approx(180.063388, abs=1e-4)
    assert by_type["Z"] == pytest.approx(162.052823, abs=1e-4)


def test_single_cleavage_count_law():
    # linear chain of n residues, all four types, one cleavage:
    # n-1 edges times 4 fragment types
    for n in range(2, 9):
        g = linear_chain(n)
        frags = enumerate_fragments(g, NATIVE, SINGLE, 2)
        assert len(frags) == 4 * (n - 1)


def test_complementarity_native():
    g = parse_structure("HexNAc(1-2)[Hex(1-4)Hex(1-4)]Hex", "X")
    total = neutral_mass(g)
    frags = enumerate_fragments(g, NATIVE, SINGLE, 2)
    by_cut = {}
    for f in frags:
        c = f.cleavages[0]
        by_cut.setdefault(c.edge, {})[c.fragment_type] = f.neutral_mass
    for masses in by_cut.values():
        assert masses["B"] + masses["Y"] == pytest.approx(total, abs=1e-9)
        assert masses["C"] + masses["Z"] == pytest.approx(total, abs=1e-9)


def test_complementarity_permethylated():
    g = parse_structure("Hex(1-3)[Hex(1-6)]Hex(1-4)HexNAc", "P")
    deriv = DerivatizationState("permethylated", 0)
    total = neutral_mass(g, deriv)
    only_full = FragmentationSettings(
        default=LevelSettings(max_cleavages=1, max_undermethylation=0)
    )
    by_cut = {}
    for f in enumerate_fragments(g, deriv, only_full, 2):
        c = f.cleavages[0]
        by_cut.setdefault(c.edge, {})[c.fragment_type] = f.neutral_mass
    for masses in by_cut.values():
        assert masses["B"] + masses["Y"] == pytest.approx(total, abs=1e-9)
        assert masses["C"] + masses["Z"] == pytest.approx(total, abs=1e-9)


def test_signatures_unique_and_sorted():
    g = parse_structure("Hex(1-3)[Hex(1-6)]Hex(1-4)HexNAc(1-4)HexNAc", "G")
    frags = enumerate_fragments(g, NATIVE, ALL, 2)
    sigs = [f.signature for f in frags]
    assert sigs == sorted(sigs)
    assert len(sigs) == len(set(sigs))
    assert all(s.startswith("G|") for s in sigs)


def test_type_restriction_subsets():
    g = linear_chain(4)
    by = enumerate_fragments(
        g, NATIVE, FragmentationSettings(default=LevelSettings(types=frozenset("BY"), max_cleavages=1)), 2
    )
    assert {f.cleavages[0].fragment_type for f in by} == {"B", "Y"}
    none = enumerate_fragments(
        g, NATIVE, FragmentationSettings(default=LevelSettings(types=frozenset())), 2
    )
    assert none == []


def test_more_cleavages_is_superset():
    g = parse_structure("Hex(1-3)[Hex(1-6)]Hex(1-4)HexNAc(1-4)HexNAc", "G")
    one = frag_map(enumerate_fragments(g, NATIVE, SINGLE, 2))
    two = frag_map(enumerate_fragments(g, NATIVE, ALL, 2))
    assert set(one) <= set(two)
    assert len(two) > len(one)


def test_undermethylation_variants_emitted():
    g = parse_structure("Hex(1-4)Hex", "U")
    deriv = DerivatizationState("permethylated", 0)
    frags = enumerate_fragments(
        g,
        deriv,
        FragmentationSettings(default=LevelSettings(max_cleavages=1, max_undermethylation=2)),
        2,
    )
    b = sorted(
        (f.missing_methyls, f.neutral_mass)
        for f in frags
        if f.cleavages[0].fragment_type == "B"
    )
    assert [m for m, _ in b] == [0, 1, 2]
    assert b[0][1] - b[1][1] == pytest.approx(14.01565, abs=1e-5)
    assert b[1][1] - b[2][1] == pytest.approx(14.01565, abs=1e-5)


def test_budget_enforced():
    g = linear_chain(30)
    deep = FragmentationSettings(default=LevelSettings(max_cleavages=4))
    with pytest.raises(FragmentBudgetExceeded) as exc:
        enumerate_fragments(g, NATIVE, deep, 2, budget=100)
    assert exc.value.candidate_id == "chain"


def test_level_specific_settings():
    settings = FragmentationSettings(
        levels=((2, LevelSettings(max_cleavages=1)), (3, LevelSettings(types=frozenset("B")))),
        default=LevelSettings(),
    )
    assert settings.for_level(2).max_cleavages == 1
    assert settings.for_level(3).types == frozenset("B")
    assert settings.for_level(4) == LevelSettings()
    with pytest.raises(ValueError):
        settings.for_level(1)


def test_fragment_as_precursor_refragments():
    g = parse_structure("Hex(1-4)Hex(1-4)Hex", "T")
    frags = enumerate_fragments(g, NATIVE, SINGLE, 2)
    # take the B ion spanning two residues (cut below the root: edge 1)
    b2 = next(
        f
        for f in frags
        if f.cleavages[0].fragment_type == "B" and f.cleavages[0].edge == 1
    )
    precursor = fragment_as_precursor(b2)
    assert precursor.ident == b2.signature
    assert not precursor.reducing_water
    sub = enumerate_fragments(precursor, NATIVE, SINGLE, 3)
    assert sub, "a two-residue fragment must itself fragment"
    assert all(f.signature.startswith(b2.signature + "|") for f in sub)
    # the child-side B ion of the sub-fragmentation keeps the residue base mass
    sub_b = next(f for f in sub if f.cleavages[0].fragment_type == "B")
    assert sub_b.neutral_mass == pytest.approx(162.052823, abs=1e-4)


@hyp_settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=5000), st.integers(min_value=2, max_value=7))
def test_complementarity_random_trees(seed, n):
    g = random_tree(random.Random(seed), n)
    total = neutral_mass(g)
    by_cut = {}
    for f in enumerate_fragments(g, NATIVE, SINGLE, 2):
        c = f.cleavages[0]
        by_cut.setdefault(c.edge, {})[c.fragment_type] = f.neutral_mass
    assert len(by_cut) == n - 1
    for masses in by_cut.values():
        assert masses["B"] + masses["Y"] == pytest.approx(total, abs=1e-9)
        assert masses["C"] + masses["Z"] == pytest.approx(total, abs=1e-9)


@hyp_settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=5000), st.integers(min_value=2, max_value=6))
def test_enumeration_deterministic(seed, n):
    g = random_tree(random.Random(seed), n)
    a = enumerate_fragments(g, NATIVE, ALL, 2)
    b = enumerate_fragments(g, NATIVE, ALL, 2)
    assert a == b
