"""The annotation engine.

Candidates are taken from the glycan database one at a time, matched against
precursor m/z under every permitted ion configuration and undermethylation
variant, fragmented in silico, and compared peak-by-peak.  Records stream to
the archive the moment they are scored; MSn levels beyond 2 are handled by
re-using matched fragment annotations of the parent scan as precursor
candidates.  Everything passing tolerance is emitted -- filtering is a
separate, trainable stage (:mod:`glyms.sage`).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .archive import AnnotationRecord, ArchiveWriter, PeakAnnotation
from .elements import ConfigError
from .fragments import (
    Candidate,
    FragmentBudgetExceeded,
    FragmentIon,
    FragmentationSettings,
    LevelSettings,
    enumerate_fragments,
    fragment_as_precursor,
)
from .glycans import (
    DerivatizationState,
    GlycanRecord,
    GlycanStructure,
    NATIVE,
    DEFAULT_ELEMENTS,
    DEFAULT_RESIDUES,
    methylation_sites,
    neutral_mass,
)
from .ions import (
    ChargeCarrier,
    IonConfiguration,
    MzTolerance,
    NeutralExchange,
    NeutralLoss,
    enumerate_ion_configurations,
    matches,
    mz,
)
from .spectra import Scan, ScanTree

# shipped defaults; override in the run-settings file
DEFAULT_CARRIERS = (
    ChargeCarrier("Na+", 22.98922, 1),
    ChargeCarrier("H+", 1.00728, 1),
)
DEFAULT_EXCHANGES = (NeutralExchange("H>Na", 1.00728, 22.98922, 3),)
DEFAULT_LOSSES = (
    NeutralLoss("H2O", 18.010565, 1),
    NeutralLoss("CH3OH", 32.026215, 1),
)


@dataclass(frozen=True)
class RunSettings:
    ms1_tolerance: MzTolerance = MzTolerance(0.5, "Da")
    msn_tolerance: MzTolerance = MzTolerance(0.5, "Da")
    max_charge: int = 2
    max_exchanges: int = 3
    carriers: tuple[ChargeCarrier, ...] = DEFAULT_CARRIERS
    exchanges: tuple[NeutralExchange, ...] = DEFAULT_EXCHANGES
    losses: tuple[NeutralLoss, ...] = DEFAULT_LOSSES
    derivatization: str = "permethylated"  # "native" | "permethylated"
    max_undermethylation: int = 1
    max_ms_level: int = 3
    fragmentation: FragmentationSettings = field(default_factory=FragmentationSettings)
    top_k: int = 5
    annotate_ms1: bool = True

    def __post_init__(self):
        if self.max_charge < 1:
            raise ConfigError("max_charge must be >= 1")
        if self.derivatization not in ("native", "permethylated"):
            raise ConfigError(f"unknown derivatization {self.derivatization!r}")

    def loss_specs(self) -> tuple[NeutralLoss, ...]:
        # methanol loss only makes sense for methylated glycans
        if self.derivatization == "native":
            return tuple(l for l in self.losses if l.name != "CH3OH")
        return self.losses


_CARRIER_RE = re.compile(r"^(?P<name>\S+)\s+charge=(?P<charge>-?\d+)\s+mass=(?P<mass>\S+)$")
_EXCHANGE_RE = re.compile(r"^(?P<name>\S+)\s+out=(?P<out>\S+)\s+in=(?P<in>\S+)$")
_LOSS_RE = re.compile(r"^(?P<name>\S+)\s+mass=(?P<mass>\S+)\s+max=(?P<max>\d+)$")
_FRAGMENTS_RE = re.compile(
    r"^level=(?P<level>\d+|\*)\s+types=(?P<types>[BCYZ,]*)"
    r"(\s+max_cleavages=(?P<cleav>\d+))?(\s+max_undermethylation=(?P<under>\d+))?$"
)


def parse_run_settings(lines: Iterable[str]) -> RunSettings:
    """Parse the key = value run-settings file (see README for the key list)."""
    scalars: dict[str, str] = {}
    carriers: list[ChargeCarrier] = []
    exchanges: list[NeutralExchange] = []
    losses: list[NeutralLoss] = []
    levels: list[tuple[int, LevelSettings]] = []
    default_level: LevelSettings | None = LevelSettings()
    no_exchanges = no_losses = False

    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if head == "carrier":
                m = _require(_CARRIER_RE, rest, lineno, "carrier <name> charge=<int> mass=<Da>")
                carriers.append(
                    ChargeCarrier(m.group("name"), float(m.group("mass")), int(m.group("charge")))
                )
            elif head == "exchange":
                if rest == "none":
                    no_exchanges = True
                    continue
                m = _require(_EXCHANGE_RE, rest, lineno, "exchange <name> out=<Da> in=<Da>")
                exchanges.append(
                    NeutralExchange(m.group("name"), float(m.group("out")), float(m.group("in")))
                )
            elif head == "loss":
                if rest == "none":
                    no_losses = True
                    continue
                m = _require(_LOSS_RE, rest, lineno, "loss <name> mass=<Da> max=<int>")
                losses.append(
                    NeutralLoss(m.group("name"), float(m.group("mass")), int(m.group("max")))
                )
            elif head == "fragments":
                m = _require(
                    _FRAGMENTS_RE, rest, lineno,
                    "fragments level=<n|*> types=<B,C,Y,Z> [max_cleavages=<n>] [max_undermethylation=<n>]",
                )
                types = frozenset(t for t in m.group("types").split(",") if t)
                ls = LevelSettings(
                    types,
                    int(m.group("cleav") or 2),
                    int(m.group("under") or 1),
                )
                if m.group("level") == "*":
                    default_level = ls
                else:
                    levels.append((int(m.group("level")), ls))
            elif "=" in line:
                key, value = (s.strip() for s in line.split("=", 1))
                scalars[key] = value
            else:
                raise ConfigError(f"unrecognized line {line!r}")
        except ValueError as exc:
            raise ConfigError(f"settings line {lineno}: {exc}") from None

    kwargs: dict = {}
    if carriers:
        kwargs["carriers"] = tuple(carriers)
    if exchanges or no_exchanges:
        kwargs["exchanges"] = tuple(exchanges)
    if losses or no_losses:
        kwargs["losses"] = tuple(losses)
    kwargs["fragmentation"] = FragmentationSettings(tuple(levels), default_level)
    for key, value in scalars.items():
        if key in ("ms1_tolerance", "msn_tolerance"):
            kwargs[key] = _parse_tolerance(value)
        elif key in ("max_charge", "max_exchanges", "max_undermethylation", "max_ms_level", "top_k"):
            kwargs[key] = int(value)
        elif key == "derivatization":
            kwargs[key] = value
        elif key == "annotate_ms1":
            kwargs[key] = value.lower() in ("1", "true", "yes")
        else:
            raise ConfigError(f"unknown settings key {key!r}")
    # exchanges inherit the global cap
    if "max_exchanges" in kwargs or exchanges:
        cap = kwargs.get("max_exchanges", 3)
        kwargs["exchanges"] = tuple(
            replace(e, max_count=cap) for e in kwargs.get("exchanges", DEFAULT_EXCHANGES)
        )
    return RunSettings(**kwargs)


def _require(pattern: re.Pattern, text: str, lineno: int, usage: str) -> re.Match:
    m = pattern.match(text)
    if not m:
        raise ConfigError(f"settings line {lineno}: expected '{usage}', got {text!r}")
    return m


def _parse_tolerance(text: str) -> MzTolerance:
    parts = text.split()
    if len(parts) != 2:
        raise ConfigError(f"tolerance needs '<value> <Da|ppm>', got {text!r}")
    return MzTolerance(float(parts[0]), parts[1])


def format_run_settings(settings: RunSettings) -> str:
    lines = [
        f"ms1_tolerance = {settings.ms1_tolerance}",
        f"msn_tolerance = {settings.msn_tolerance}",
        f"max_charge = {settings.max_charge}",
        f"max_exchanges = {settings.max_exchanges}",
        f"derivatization = {settings.derivatization}",
        f"max_undermethylation = {settings.max_undermethylation}",
        f"max_ms_level = {settings.max_ms_level}",
        f"top_k = {settings.top_k}",
        f"annotate_ms1 = {str(settings.annotate_ms1).lower()}",
    ]
    for c in settings.carriers:
        lines.append(f"carrier {c.name} charge={c.charge} mass={c.mass_delta!r}")
    for e in settings.exchanges:
        lines.append(f"exchange {e.name} out={e.out_mass!r} in={e.in_mass!r}")
    if not settings.exchanges:
        lines.append("exchange none")
    for l in settings.losses:
        lines.append(f"loss {l.name} mass={l.mass!r} max={l.max_count}")
    if not settings.losses:
        lines.append("loss none")
    if settings.fragmentation.default is not None:
        lines.append(_format_level("*", settings.fragmentation.default))
    for level, ls in settings.fragmentation.levels:
        lines.append(_format_level(str(level), ls))
    return "\n".join(lines) + "\n"


def _format_level(level: str, ls: LevelSettings) -> str:
    types = ",".join(sorted(ls.types))
    return (
        f"fragments level={level} types={types} "
        f"max_cleavages={ls.max_cleavages} max_undermethylation={ls.max_undermethylation}"
    )


# ---------------------------------------------------------------------------
# Matching and annotation


@dataclass(frozen=True)
class PrecursorMatch:
    config: IonConfiguration
    derivatization: DerivatizationState
    neutral_mass: float
    theoretical_mz: float


class AnnotationEngine:
    def __init__(
        self,
        settings: RunSettings,
        masses=DEFAULT_ELEMENTS,
        registry=DEFAULT_RESIDUES,
        diagnostics: Callable[[str], None] | None = None,
    ):
        self.settings = settings
        self.masses = masses
        self.registry = registry
        self.diagnostics = diagnostics or (lambda msg: None)
        self._config_cache: dict[tuple, list[IonConfiguration]] = {}
        self._fragment_cache: dict[tuple, list[FragmentIon]] = {}

    # -- ion configuration enumeration (cached) --

    def precursor_configs(self, max_charge: int | None = None) -> list[IonConfiguration]:
        key = ("prec", max_charge)
        if key not in self._config_cache:
            self._config_cache[key] = enumerate_ion_configurations(
                self.settings.carriers,
                max_charge or self.settings.max_charge,
                self.settings.exchanges,
                self.settings.loss_specs(),
                self.settings.max_exchanges,
            )
        return self._config_cache[key]

    def fragment_configs(self, precursor_charge: int) -> list[IonConfiguration]:
        # fragment ions cannot exceed the precursor's charge
        return self.precursor_configs(max(1, abs(precursor_charge)))

    # -- precursor matching --

    def derivatization_states(self, structure: GlycanStructure) -> list[DerivatizationState]:
        if self.settings.derivatization == "native":
            return [NATIVE]
        sites = methylation_sites(structure, self.registry)
        top = min(self.settings.max_undermethylation, sites)
        return [DerivatizationState("permethylated", k) for k in range(top + 1)]

    def match_precursor(self, scan: Scan, glycan: GlycanStructure) -> list[PrecursorMatch]:
        """Ion configurations putting the glycan on this scan's precursor m/z.

        With a known precursor charge only that |z| is considered; otherwise
        every charge state from 1 to max_charge is evaluated.
        """
        if scan.precursor_mz is None:
            return []
        out = []
        for deriv in self.derivatization_states(glycan):
            m = neutral_mass(glycan, deriv, self.masses, self.registry)
            for config in self.precursor_configs():
                z = abs(config.charge)
                if scan.precursor_charge is not None and z != abs(scan.precursor_charge):
                    continue
                theo = mz(m, config)
                if matches(scan.precursor_mz, theo, self.settings.ms1_tolerance):
                    out.append(PrecursorMatch(config, deriv, m, theo))
        return out

    # -- fragmentation (cached per candidate/level) --

    def fragments_for(
        self, candidate: Candidate, derivatization: DerivatizationState, level: int
    ) -> list[FragmentIon]:
        key = (candidate.ident, derivatization, level)
        if key not in self._fragment_cache:
            self._fragment_cache[key] = enumerate_fragments(
                candidate,
                derivatization,
                self.settings.fragmentation,
                level,
                self.masses,
                self.registry,
            )
            if len(self._fragment_cache) > 256:
                self._fragment_cache.pop(next(iter(self._fragment_cache)))
        return self._fragment_cache[key]

    # -- scan annotation --

    def annotate_scan(
        self,
        scan: Scan,
        candidate: Candidate,
        match: PrecursorMatch,
        fragments: Sequence[FragmentIon],
    ) -> tuple[AnnotationRecord, list[tuple[FragmentIon, float, IonConfiguration]]]:
        """Score one (scan, candidate, ion configuration) pairing.

        Returns the record plus the matched (fragment, theoretical m/z) pairs
        for recursive descent.  Scores follow the peak-count and intensity
        fractions: a peak annotated by several fragments counts once.
        """
        annotations: list[PeakAnnotation] = []
        matched: list[tuple[FragmentIon, float, IonConfiguration]] = []
        tol = self.settings.msn_tolerance
        configs = self.fragment_configs(match.config.charge)
        for fragment in fragments:
            for config in configs:
                theo = mz(fragment.neutral_mass, config)
                hit = False
                for index, peak in enumerate(scan.peaks):
                    if matches(peak.mz, theo, tol):
                        annotations.append(
                            PeakAnnotation(
                                index, fragment.signature, config.signature,
                                theo, peak.mz - theo,
                            )
                        )
                        hit = True
                if hit:
                    matched.append((fragment, theo, config))
        annotations.sort(key=lambda a: (a.peak_index, a.fragment_signature, a.ion_config_signature))
        flags = ()
        if not scan.peaks:
            score_c = score_i = 0.0
            flags = ("empty-scan",)
        else:
            annotated = {a.peak_index for a in annotations}
            score_c = len(annotated) / len(scan.peaks)
            total = scan.total_intensity
            hit_intensity = sum(scan.peaks[i].intensity for i in annotated)
            score_i = hit_intensity / total if total > 0 else 0.0
        record = AnnotationRecord(
            scan_id=scan.scan_id,
            candidate_id=candidate.ident,
            ion_config_signature=match.config.signature,
            ms_level=scan.ms_level,
            score_c=score_c,
            score_i=score_i,
            peak_annotations=tuple(annotations),
            flags=flags,
        )
        return record, matched

    # -- whole-run annotation --

    def annotate_run(
        self, tree: ScanTree, database: Sequence[GlycanRecord], writer: ArchiveWriter
    ) -> None:
        """Annotate every scan, streaming records to the writer.

        Scans are visited depth-first in id order; records are written the
        moment they are scored.  Only the fragment lists needed for the
        current root-to-leaf chain are kept in memory.
        """
        glycans = sorted(database, key=lambda r: r.structure.id)
        for root_id in tree.roots:
            root = tree.scans[root_id]
            if self.settings.annotate_ms1 and root.peaks:
                self._annotate_ms1(root, glycans, writer)
            for child in tree.children_of(root_id):
                self._annotate_ms2_subtree(tree, child, glycans, writer)

    def _annotate_ms1(self, scan: Scan, glycans, writer: ArchiveWriter) -> None:
        """MS1 peaks as precursor targets: records with unset scores."""
        for rec in glycans:
            for deriv in self.derivatization_states(rec.structure):
                m = neutral_mass(rec.structure, deriv, self.masses, self.registry)
                for config in self.precursor_configs():
                    theo = mz(m, config)
                    for index, peak in enumerate(scan.peaks):
                        if matches(peak.mz, theo, self.settings.ms1_tolerance):
                            record = AnnotationRecord(
                                scan_id=scan.scan_id,
                                candidate_id=rec.structure.id,
                                ion_config_signature=config.signature,
                                ms_level=1,
                                score_c=None,
                                score_i=None,
                                peak_annotations=(
                                    PeakAnnotation(
                                        index,
                                        f"{rec.structure.id}|M|u{deriv.missing_methyls}",
                                        config.signature,
                                        theo,
                                        peak.mz - theo,
                                    ),
                                ),
                            )
                            writer.write(record)

    def _annotate_ms2_subtree(self, tree: ScanTree, scan: Scan, glycans, writer) -> None:
        if scan.ms_level > self.settings.max_ms_level:
            return
        chain: list[tuple[Candidate, DerivatizationState, list[tuple[FragmentIon, float]]]] = []
        for rec in glycans:
            for match in self.match_precursor(scan, rec.structure):
                candidate = Candidate.from_glycan(
                    rec.structure, match.derivatization.missing_methyls
                )
                try:
                    fragments = self.fragments_for(candidate, match.derivatization, scan.ms_level)
                except FragmentBudgetExceeded as exc:
                    self.diagnostics(str(exc))
                    continue
                record, matched = self.annotate_scan(scan, candidate, match, fragments)
                writer.write(record)
                if matched:
                    chain.append((candidate, match.derivatization, matched))
        for child in tree.children_of(scan.scan_id):
            self._annotate_deeper(tree, child, chain, writer)

    def _annotate_deeper(self, tree: ScanTree, scan: Scan, parent_chain, writer) -> None:
        """MSn (n >= 3): candidates are the parent scan's matched fragments."""
        if scan.ms_level > self.settings.max_ms_level:
            return
        chain = []
        seen: set[str] = set()
        for _parent_candidate, deriv, matched in parent_chain:
            for fragment, theo, config in matched:
                if fragment.signature in seen:
                    continue
                if scan.precursor_mz is None or not matches(
                    scan.precursor_mz, theo, self.settings.msn_tolerance
                ):
                    continue
                seen.add(fragment.signature)
                candidate = fragment_as_precursor(fragment)
                try:
                    fragments = self.fragments_for(candidate, deriv, scan.ms_level)
                except FragmentBudgetExceeded as exc:
                    self.diagnostics(str(exc))
                    continue
                match = PrecursorMatch(config, deriv, fragment.neutral_mass, theo)
                record, matched_frags = self.annotate_scan(scan, candidate, match, fragments)
                writer.write(record)
                if matched_frags:
                    chain.append((candidate, deriv, matched_frags))
        for child in tree.children_of(scan.scan_id):
            self._annotate_deeper(tree, child, chain, writer)

def rank_annotations(records: Sequence[AnnotationRecord]) -> list[AnnotationRecord]:
    """Order one scan's records: score_i desc, score_c desc, candidate id asc."""
    scan_ids = {r.scan_id for r in records}
    if len(scan_ids) > 1:
        raise ValueError(f"records span multiple scans: {sorted(scan_ids)}")
    return sorted(
        records,
        key=lambda r: (-(r.score_i or 0.0), -(r.score_c or 0.0), r.candidate_id),
    )
