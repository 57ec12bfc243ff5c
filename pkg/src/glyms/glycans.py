"""Glycan trees, the linear text encoding, and neutral-mass arithmetic.

Encoding grammar (one glycan per string, reducing end rightmost)::

    tree   := item* code
    item   := tree "(" anomer "-" pos ")"            # main-chain child
            | "[" tree "(" anomer "-" pos ")" "]"    # additional branch
    pos    := "1".."9" | "?"

``HexNAc(1-2)[dHex(1-3)]Hex`` is a Hex root carrying a HexNAc at position 2
and a dHex branch at position 3.  Linkage positions are carried but never
affect mass; the anomer token is accepted and normalized to ``1``.

Canonical serialization orders siblings by (linkage position, residue code,
subtree text), with unknown positions last, so round-trips and hashing are
deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, Mapping

from .elements import (
    ConfigError,
    ElementMassTable,
    DEFAULT_ELEMENTS,
    METHYLENE,
    WATER,
    parse_formula,
    parse_key_value,
)


class GlycanSyntaxError(ValueError):
    """Raised on malformed glycan encodings; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownResidueError(ValueError):
    pass


@dataclass(frozen=True)
class ResidueKind:
    code: str
    base_composition: tuple[tuple[str, int], ...]  # residue minus water
    methylation_sites_free: int

    def __post_init__(self):
        if any(n < 0 for _, n in self.base_composition):
            raise ConfigError(f"negative element count in residue {self.code!r}")
        if self.methylation_sites_free < 0:
            raise ConfigError(f"negative site count in residue {self.code!r}")

    def base_mass(self, masses: ElementMassTable) -> float:
        return sum(masses[sym] * n for sym, n in self.base_composition)


class ResidueRegistry:
    """Immutable mapping from residue code to :class:`ResidueKind`."""

    def __init__(self, kinds: Iterable[ResidueKind]):
        self._kinds = {k.code: k for k in kinds}

    def __getitem__(self, code: str) -> ResidueKind:
        try:
            return self._kinds[code]
        except KeyError:
            raise UnknownResidueError(f"unknown residue code {code!r}") from None

    def __contains__(self, code: str) -> bool:
        return code in self._kinds

    def codes(self) -> list[str]:
        return sorted(self._kinds)


_SITES_RE = re.compile(r"^(?P<formula>\S+)\s+sites=(?P<sites>\d+)$")


def load_residue_registry(lines: Iterable[str] | None = None) -> ResidueRegistry:
    if lines is None:
        text = resources.files("glyms.data").joinpath("residues.cfg").read_text()
        lines = text.splitlines()
    raw = parse_key_value(lines, "residues")
    kinds = []
    for code, value in raw.items():
        m = _SITES_RE.match(value)
        if not m:
            raise ConfigError(f"residue {code!r}: expected '<formula> sites=<n>', got {value!r}")
        comp = tuple(sorted(parse_formula(m.group("formula")).items()))
        kinds.append(ResidueKind(code, comp, int(m.group("sites"))))
    return ResidueRegistry(kinds)


DEFAULT_RESIDUES = load_residue_registry()

UNKNOWN_LINKAGE = None  # linkage position for '?'


@dataclass(frozen=True)
class ResidueNode:
    kind: str
    children: tuple[tuple[int | None, "ResidueNode"], ...] = ()

    def walk(self) -> Iterator["ResidueNode"]:
        yield self
        for _, child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class GlycanStructure:
    id: str
    root: ResidueNode

    def nodes(self) -> list[ResidueNode]:
        return list(self.root.walk())

    def __len__(self) -> int:
        return sum(1 for _ in self.root.walk())


@dataclass(frozen=True)
class Composition:
    counts: tuple[tuple[str, int], ...]  # residue code -> count, sorted

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "Composition":
        if any(n < 0 for n in counts.values()):
            raise ValueError("negative residue count")
        return cls(tuple(sorted((c, n) for c, n in counts.items() if n > 0)))

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)

    def total(self) -> int:
        return sum(n for _, n in self.counts)


@dataclass(frozen=True)
class DerivatizationState:
    mode: str = "native"  # "native" | "permethylated"
    missing_methyls: int = 0

    def __post_init__(self):
        if self.mode not in ("native", "permethylated"):
            raise ValueError(f"unknown derivatization mode {self.mode!r}")
        if self.missing_methyls < 0:
            raise ValueError("missing_methyls must be >= 0")
        if self.mode == "native" and self.missing_methyls:
            raise ValueError("native derivatization cannot miss methyls")


NATIVE = DerivatizationState("native", 0)


# ---------------------------------------------------------------------------
# Parsing / serialization


_CODE_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*")
_LINKAGE_RE = re.compile(r"\(([^-()\[\]]+)-([1-9?])\)")


def parse_structure(text: str, glycan_id: str = "", registry: ResidueRegistry = DEFAULT_RESIDUES) -> GlycanStructure:
    """Parse the linear encoding into a tree; inverse of :func:`serialize_structure`."""
    node, pos = _parse_tree(text, 0, registry, in_branch=False)
    if pos != len(text):
        raise GlycanSyntaxError(f"trailing input {text[pos:]!r}", pos)
    return GlycanStructure(glycan_id or text, node)


def _parse_tree(text: str, pos: int, registry: ResidueRegistry, in_branch: bool):
    """Returns (node, next_pos); in branch context stops before the ']'."""
    carried: list[tuple[int | None, ResidueNode]] = []
    while True:
        if pos < len(text) and text[pos] == "[":
            branch, link, pos = _parse_branch(text, pos + 1, registry)
            carried.append((link, branch))
            continue
        m = _CODE_RE.match(text, pos)
        if not m:
            raise GlycanSyntaxError("expected residue code", pos)
        code = m.group(0)
        if code not in registry:
            raise UnknownResidueError(f"unknown residue code {code!r} at offset {pos}")
        pos = m.end()
        node = ResidueNode(code, tuple(carried))
        carried = []
        lm = _LINKAGE_RE.match(text, pos)
        if lm:
            if in_branch and lm.end() < len(text) and text[lm.end()] == "]":
                # attachment linkage of the whole branch
                return node, _linkage_pos(lm, pos), lm.end()
            link = _linkage_pos(lm, pos)
            pos = lm.end()
            carried = [(link, node)]
            continue
        if pos < len(text) and text[pos] == "(":
            raise GlycanSyntaxError("malformed linkage", pos)
        if in_branch:
            raise GlycanSyntaxError("branch missing attachment linkage", pos)
        return node, pos


def _parse_branch(text: str, pos: int, registry: ResidueRegistry):
    result = _parse_tree(text, pos, registry, in_branch=True)
    node, link, pos = result
    if pos >= len(text) or text[pos] != "]":
        raise GlycanSyntaxError("expected ']'", pos)
    return node, link, pos + 1


def _linkage_pos(match: re.Match, offset: int) -> int | None:
    p = match.group(2)
    return UNKNOWN_LINKAGE if p == "?" else int(p)


def _sibling_key(item: tuple[int | None, ResidueNode]):
    link, child = item
    return (10 if link is None else link, child.kind, _serialize_node(child))


def _serialize_node(node: ResidueNode) -> str:
    ordered = sorted(node.children, key=_sibling_key)
    parts = []
    for i, (link, child) in enumerate(ordered):
        pos = "?" if link is None else str(link)
        piece = f"{_serialize_node(child)}(1-{pos})"
        parts.append(piece if i == 0 else f"[{piece}]")
    return "".join(parts) + node.kind


def serialize_structure(structure: GlycanStructure) -> str:
    """Canonical text encoding; parse(serialize(g)) reproduces g up to sibling order."""
    return _serialize_node(structure.root)


def canonical(structure: GlycanStructure) -> GlycanStructure:
    """Structure with siblings in canonical order (stable hash/compare form)."""
    return parse_structure(serialize_structure(structure), structure.id)


# ---------------------------------------------------------------------------
# Composition and mass


def composition_of(structure: GlycanStructure) -> Composition:
    counts: dict[str, int] = {}
    for node in structure.root.walk():
        counts[node.kind] = counts.get(node.kind, 0) + 1
    return Composition.from_counts(counts)


def methylation_sites(
    structure: GlycanStructure,
    registry: ResidueRegistry = DEFAULT_RESIDUES,
    *,
    root_anomeric_site: bool = True,
) -> int:
    """Total methylatable positions of a tree.

    Per node: sites_free minus one per child, floored at 0; the reducing-end
    root gains one extra (anomeric) site unless it is a non-reducing fragment.
    """
    total = 0
    for node in structure.root.walk():
        free = registry[node.kind].methylation_sites_free
        total += max(0, free - len(node.children))
    if root_anomeric_site:
        total += 1
    return total


def node_methyl_sites(
    node: ResidueNode, registry: ResidueRegistry = DEFAULT_RESIDUES
) -> int:
    """Context site count of one node (no anomeric bonus)."""
    return max(0, registry[node.kind].methylation_sites_free - len(node.children))


def neutral_mass(
    target: GlycanStructure | Composition,
    derivatization: DerivatizationState = NATIVE,
    masses: ElementMassTable = DEFAULT_ELEMENTS,
    registry: ResidueRegistry = DEFAULT_RESIDUES,
) -> float:
    """Monoisotopic neutral mass of a structure or composition.

    Sum of residue base masses plus one water; permethylated adds one CH2 per
    occupied methylation site.  For bare compositions the site count assumes a
    tree shape (every glycosidic bond consumes one site, no floors).
    """
    water = masses.formula_mass("H2O")
    ch2 = masses.formula_mass("CH2")
    if isinstance(target, Composition):
        if not target.counts:
            raise ValueError("empty composition")
        base = sum(registry[c].base_mass(masses) * n for c, n in target.counts)
        sites = (
            sum(registry[c].methylation_sites_free * n for c, n in target.counts)
            - (target.total() - 1)
            + 1
        )
    else:
        base = sum(registry[n.kind].base_mass(masses) for n in structure_nodes(target))
        sites = methylation_sites(target, registry)
    mass = base + water
    if derivatization.mode == "permethylated":
        if derivatization.missing_methyls > sites:
            raise ValueError(
                f"missing_methyls={derivatization.missing_methyls} exceeds "
                f"{sites} available sites"
            )
        mass += (sites - derivatization.missing_methyls) * ch2
    return mass


def structure_nodes(structure: GlycanStructure) -> list[ResidueNode]:
    return structure.nodes()


def undermethylation_variants(
    structure: GlycanStructure,
    max_missing: int,
    registry: ResidueRegistry = DEFAULT_RESIDUES,
) -> list[tuple[DerivatizationState, float]]:
    """Permethylated variants missing 0..max_missing methyls with mass deltas.

    Deltas are relative to the fully methylated structure; truncated at the
    structure's total site count.
    """
    if max_missing < 0:
        raise ValueError("max_missing must be >= 0")
    sites = methylation_sites(structure, registry)
    out = []
    for k in range(min(max_missing, sites) + 1):
        out.append((DerivatizationState("permethylated", k), -k * METHYLENE))
    return out


# ---------------------------------------------------------------------------
# Glycan database files


@dataclass(frozen=True)
class GlycanRecord:
    structure: GlycanStructure
    glycan_class: str


class DatabaseError(ValueError):
    pass


def read_database(
    lines: Iterable[str],
    registry: ResidueRegistry = DEFAULT_RESIDUES,
    on_error=None,
) -> list[GlycanRecord]:
    """Read `id<TAB>encoding<TAB>class` lines; '#' comments allowed.

    Malformed records are reported through ``on_error(lineno, message)`` and
    skipped; without a handler the first error raises.
    """
    records = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        try:
            if len(parts) != 3:
                raise DatabaseError(f"expected 3 tab-separated fields, got {len(parts)}")
            gid, encoding, gclass = (p.strip() for p in parts)
            structure = parse_structure(encoding, gid, registry)
        except (DatabaseError, GlycanSyntaxError, UnknownResidueError) as exc:
            if on_error is None:
                raise DatabaseError(f"record {lineno}: {exc}") from exc
            on_error(lineno, str(exc))
            continue
        records.append(GlycanRecord(structure, gclass))
    return records


def write_database(records: Iterable[GlycanRecord]) -> str:
    lines = []
    for rec in records:
        lines.append(
            f"{rec.structure.id}\t{serialize_structure(rec.structure)}\t{rec.glycan_class}"
        )
    return "\n".join(lines) + "\n" if lines else ""
