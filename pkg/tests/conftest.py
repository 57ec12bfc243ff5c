import random

import pytest

from glyms.engine import RunSettings
from glyms.fragments import FragmentationSettings, LevelSettings
from glyms.glycans import (
    GlycanRecord,
    GlycanStructure,
    ResidueNode,
    parse_structure,
)

RESIDUE_CODES = ("Hex", "HexNAc", "dHex", "Pent", "NeuAc", "NeuGc")


def random_tree(rng: random.Random, n_residues: int, glycan_id: str = "R") -> GlycanStructure:
    """Uniform-ish random rooted tree with n residues and random linkages."""
    nodes = [[rng.choice(RESIDUE_CODES), []] for _ in range(n_residues)]
    for i in range(1, n_residues):
        parent = rng.randrange(i)
        link = rng.choice([None, 2, 3, 4, 6])
        nodes[parent][1].append((link, i))

    def build(i: int) -> ResidueNode:
        kind, children = nodes[i]
        return ResidueNode(kind, tuple((link, build(j)) for link, j in children))

    return GlycanStructure(glycan_id, build(0))


def linear_chain(n: int, kind: str = "Hex", glycan_id: str = "chain") -> GlycanStructure:
    node = ResidueNode(kind)
    for _ in range(n - 1):
        node = ResidueNode(kind, ((4, node),))
    return GlycanStructure(glycan_id, node)


@pytest.fixture
def small_db():
    return [
        GlycanRecord(parse_structure("Hex(1-4)Hex(1-4)Hex", "G1"), "test"),
        GlycanRecord(parse_structure("HexNAc(1-2)Hex(1-4)Hex", "G2"), "test"),
        GlycanRecord(parse_structure("dHex(1-3)[HexNAc(1-2)]Hex", "G3"), "test"),
        GlycanRecord(parse_structure("NeuAc(1-3)Hex(1-4)HexNAc", "G4"), "test"),
    ]


@pytest.fixture
def native_settings():
    return RunSettings(
        derivatization="native",
        max_charge=1,
        fragmentation=FragmentationSettings(default=LevelSettings(max_cleavages=1)),
    )
