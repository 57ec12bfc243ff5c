"""In-silico glycosidic fragmentation (B/C/Y/Z ions).

Fragments are connected components of the glycan tree after cutting one or
more glycosidic edges.  For a cut edge the component on the reducing (parent)
side is a Y or Z ion, the component on the non-reducing (child) side a B or C
ion.  Mass rules, with R the component's residue base-mass sum:

* component containing an intact reducing end: +H2O
* per Y cut: +0, per Z cut: -H2O (relative to Y)
* per B cut: +0, per C cut: +H2O

so B+Y = M and C+Z = M exactly for every single cleavage.  Permethylated
candidates add one CH2 per methylation site counted in the *parent* context:
positions freed by a cleavage stay unmethylated, which keeps complementarity
exact.

Fragment signatures are ``<parentId>|<type><edge>[+...]|u<missing>`` where
``<edge>`` is the canonical preorder index of the cut edge's child node.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .glycans import (
    DerivatizationState,
    GlycanStructure,
    ResidueNode,
    ResidueRegistry,
    DEFAULT_ELEMENTS,
    DEFAULT_RESIDUES,
    node_methyl_sites,
)

FRAGMENT_TYPES = ("B", "C", "Y", "Z")
REDUCING_SIDE_TYPES = ("Y", "Z")
NONREDUCING_SIDE_TYPES = ("B", "C")

FRAGMENT_BUDGET = 10_000


class FragmentBudgetExceeded(RuntimeError):
    """A structure produced more fragments than the enumeration budget."""

    def __init__(self, candidate_id: str, budget: int):
        super().__init__(
            f"candidate {candidate_id!r} exceeded the fragment budget of {budget}"
        )
        self.candidate_id = candidate_id


@dataclass(frozen=True)
class LevelSettings:
    """Fragmentation settings for one MS level."""

    types: frozenset[str] = frozenset(FRAGMENT_TYPES)
    max_cleavages: int = 2
    max_undermethylation: int = 1

    def __post_init__(self):
        unknown = self.types - set(FRAGMENT_TYPES)
        if unknown:
            raise ValueError(f"unknown fragment types {sorted(unknown)}")
        if self.max_cleavages < 1:
            raise ValueError("max_cleavages must be >= 1")


@dataclass(frozen=True)
class FragmentationSettings:
    """Per-MS-level fragmentation settings (levels 2..max)."""

    levels: tuple[tuple[int, LevelSettings], ...] = ()
    default: LevelSettings | None = field(default_factory=LevelSettings)

    def for_level(self, level: int) -> LevelSettings:
        if level < 2:
            raise ValueError(f"no fragmentation below MS2 (level {level})")
        for lv, settings in self.levels:
            if lv == level:
                return settings
        if self.default is None:
            raise ValueError(f"no fragmentation settings defined for MS level {level}")
        return self.default


@dataclass(frozen=True)
class Candidate:
    """A fragmentable precursor: a whole glycan or a fragment re-used as one."""

    ident: str
    structure: GlycanStructure
    reducing_water: bool = True  # intact reducing end (carries the +H2O)
    anomeric_site: bool = True  # root gains the extra methylation site
    missing_methyls: int = 0

    @classmethod
    def from_glycan(cls, g: GlycanStructure, missing_methyls: int = 0) -> "Candidate":
        return cls(g.id, g, True, True, missing_methyls)


@dataclass(frozen=True)
class Cleavage:
    edge: int  # preorder index of the child node of the cut edge
    side_kept: str  # "reducing" | "nonreducing"
    fragment_type: str


@dataclass(frozen=True)
class FragmentIon:
    parent_id: str
    cleavages: tuple[Cleavage, ...]
    substructure: GlycanStructure
    neutral_mass: float
    signature: str
    reducing_water: bool
    anomeric_site: bool
    missing_methyls: int


def _index_tree(root: ResidueNode):
    """Preorder node list plus (parent_index, child_index) edge list."""
    nodes: list[ResidueNode] = []
    edges: list[tuple[int, int]] = []

    def visit(node: ResidueNode, parent: int | None):
        idx = len(nodes)
        nodes.append(node)
        if parent is not None:
            edges.append((parent, idx))
        for _, child in node.children:
            visit(child, idx)

    visit(root, None)
    return nodes, edges


def _components(n_nodes: int, edges, cut: frozenset[int]):
    """Connected components after removing edges whose child index is in cut."""
    adj: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    for parent, child in edges:
        if child in cut:
            continue
        adj[parent].append(child)
        adj[child].append(parent)
    seen = [False] * n_nodes
    comps = []
    for start in range(n_nodes):
        if seen[start]:
            continue
        stack, comp = [start], set()
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.add(i)
            for j in adj[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(comp)
    return comps


def enumerate_fragments(
    candidate: Candidate | GlycanStructure,
    derivatization: DerivatizationState,
    settings: FragmentationSettings,
    level: int,
    masses=DEFAULT_ELEMENTS,
    registry: ResidueRegistry = DEFAULT_RESIDUES,
    budget: int = FRAGMENT_BUDGET,
) -> list[FragmentIon]:
    """All theoretical fragments of the candidate at one MS level.

    Output is deduplicated by signature and deterministically ordered.  Raises
    :class:`FragmentBudgetExceeded` past ``budget`` fragments.
    """
    if isinstance(candidate, GlycanStructure):
        candidate = Candidate.from_glycan(candidate)
    level_settings = settings.for_level(level)
    if not level_settings.types:
        return []

    water = masses.formula_mass("H2O")
    ch2 = masses.formula_mass("CH2")
    nodes, edges = _index_tree(candidate.structure.root)
    base_masses = [registry[n.kind].base_mass(masses) for n in nodes]
    permethylated = derivatization.mode == "permethylated"
    site_counts = None
    if permethylated:
        site_counts = [node_methyl_sites(n, registry) for n in nodes]
        if candidate.anomeric_site:
            site_counts[0] += 1
    max_under = level_settings.max_undermethylation if permethylated else 0

    reducing_options = tuple(t for t in ("Y", "Z") if t in level_settings.types)
    nonreducing_options = tuple(t for t in ("B", "C") if t in level_settings.types)

    by_signature: dict[str, FragmentIon] = {}
    max_cuts = min(level_settings.max_cleavages, len(edges))
    cut_edges = [child for _, child in edges]

    for n_cuts in range(1, max_cuts + 1):
        for cut in itertools.combinations(cut_edges, n_cuts):
            cut_set = frozenset(cut)
            for comp in _components(len(nodes), edges, cut_set):
                frags = _component_fragments(
                    candidate,
                    comp,
                    cut_set,
                    edges,
                    nodes,
                    base_masses,
                    site_counts if permethylated else None,
                    reducing_options,
                    nonreducing_options,
                    water,
                    ch2,
                    max_under,
                )
                for frag in frags:
                    by_signature.setdefault(frag.signature, frag)
                    if len(by_signature) > budget:
                        raise FragmentBudgetExceeded(candidate.ident, budget)
    return sorted(by_signature.values(), key=lambda f: f.signature)


def _component_fragments(
    candidate: Candidate,
    comp: set[int],
    cut_set: frozenset[int],
    edges,
    nodes,
    base_masses,
    site_counts,
    reducing_options,
    nonreducing_options,
    water: float,
    ch2: float,
    max_under: int,
):
    # cuts incident to this component, with the side the component keeps
    incident = []
    for parent, child in edges:
        if child not in cut_set:
            continue
        if parent in comp:
            incident.append((child, "reducing"))
        elif child in comp:
            incident.append((child, "nonreducing"))
    if not incident:
        return []  # component untouched by any cut: not a fragment
    type_menus = []
    for edge, side in incident:
        menu = reducing_options if side == "reducing" else nonreducing_options
        if not menu:
            return []
        type_menus.append(menu)

    base = sum(base_masses[i] for i in comp)
    has_root = 0 in comp
    root_water = water if (has_root and candidate.reducing_water) else 0.0

    substructure = _component_structure(candidate, comp, nodes)
    methyls = 0
    if site_counts is not None:
        methyls = sum(site_counts[i] for i in comp)
    max_missing = min(max_under, methyls) if site_counts is not None else 0

    out = []
    for types in itertools.product(*type_menus):
        delta = 0.0
        cleavages = []
        for (edge, side), t in zip(incident, types):
            if t == "Z":
                delta -= water
            elif t == "C":
                delta += water
            cleavages.append(Cleavage(edge, side, t))
        cleavages = tuple(sorted(cleavages, key=lambda c: c.edge))
        cut_part = "+".join(f"{c.fragment_type}{c.edge}" for c in cleavages)
        full_methyl_mass = base + root_water + delta + methyls * ch2
        for missing in range(max_missing + 1):
            mass = full_methyl_mass - missing * ch2
            if mass <= 0:
                continue
            signature = f"{candidate.ident}|{cut_part}|u{missing}"
            out.append(
                FragmentIon(
                    parent_id=candidate.ident,
                    cleavages=cleavages,
                    substructure=substructure,
                    neutral_mass=mass,
                    signature=signature,
                    reducing_water=has_root and candidate.reducing_water,
                    anomeric_site=has_root and candidate.anomeric_site,
                    missing_methyls=missing,
                )
            )
    return out


def _component_structure(candidate: Candidate, comp: set[int], nodes) -> GlycanStructure:
    """Component as a tree rooted at its top node (lowest preorder index)."""
    built: dict[int, ResidueNode] = {}

    def build(node: ResidueNode, idx: int) -> int:
        next_idx = idx + 1
        children = []
        for link, child in node.children:
            child_idx = next_idx
            next_idx = build(child, next_idx)
            if idx in comp and child_idx in comp:
                children.append((link, built[child_idx]))
        built[idx] = ResidueNode(node.kind, tuple(children))
        return next_idx

    build(candidate.structure.root, 0)
    top = min(comp)
    return GlycanStructure(f"{candidate.ident}#n{top}", built[top])


def fragment_as_precursor(fragment: FragmentIon) -> Candidate:
    """Re-usable precursor candidate for the next MS level."""
    return Candidate(
        ident=fragment.signature,
        structure=fragment.substructure,
        reducing_water=fragment.reducing_water,
        anomeric_site=fragment.anomeric_site,
        missing_methyls=fragment.missing_methyls,
    )
