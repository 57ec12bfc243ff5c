"""Ion calculus: charge carriers, neutral exchanges/losses, m/z, tolerances.

Carrier masses are *ion* masses (atom minus electron), shipped as settings
defaults rather than code literals elsewhere in the package.  All functions
here are pure over immutable inputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence


class IonError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ChargeCarrier:
    name: str
    mass_delta: float  # signed, Da (per attachment)
    charge: int  # signed, typically +-1

    def __post_init__(self):
        if self.charge == 0:
            raise IonError(f"carrier {self.name!r} has zero charge")


@dataclass(frozen=True, order=True)
class NeutralExchange:
    """Replacement of out_species by in_species, net charge unchanged."""

    name: str
    out_mass: float
    in_mass: float
    max_count: int = 1

    @property
    def mass_delta(self) -> float:
        return self.in_mass - self.out_mass


@dataclass(frozen=True, order=True)
class NeutralLoss:
    name: str
    mass: float
    max_count: int = 1

    def __post_init__(self):
        if self.mass <= 0:
            raise IonError(f"loss {self.name!r} must have positive mass")


@dataclass(frozen=True)
class MzTolerance:
    value: float
    unit: str  # "Da" | "ppm"

    def __post_init__(self):
        if self.value <= 0:
            raise IonError("tolerance must be positive")
        if self.unit not in ("Da", "ppm"):
            raise IonError(f"unknown tolerance unit {self.unit!r}")

    def window(self, theoretical: float) -> float:
        """Half-width in Da; ppm windows anchor on the theoretical value."""
        if self.unit == "Da":
            return self.value
        return abs(theoretical) * self.value * 1e-6

    def __str__(self) -> str:
        return f"{self.value:g} {self.unit}"


@dataclass(frozen=True)
class IonConfiguration:
    """Multiset of carriers plus neutral exchanges and losses."""

    carriers: tuple[tuple[ChargeCarrier, int], ...]
    exchanges: tuple[tuple[NeutralExchange, int], ...] = ()
    losses: tuple[tuple[NeutralLoss, int], ...] = ()

    def __post_init__(self):
        if not self.carriers:
            raise IonError("ion configuration needs at least one charge carrier")
        signs = {1 if c.charge > 0 else -1 for c, n in self.carriers}
        if len(signs) != 1:
            raise IonError("mixed-polarity carrier sets are not physical")

    @property
    def charge(self) -> int:
        return sum(c.charge * n for c, n in self.carriers)

    @property
    def mass_shift(self) -> float:
        shift = sum(c.mass_delta * n for c, n in self.carriers)
        shift += sum(e.mass_delta * n for e, n in self.exchanges)
        shift -= sum(l.mass * n for l, n in self.losses)
        return shift

    @property
    def signature(self) -> str:
        """Whitespace-free canonical key, e.g. ``2Na+.1xH>Na.-1H2O``."""
        parts = [f"{n}{c.name}" for c, n in sorted(self.carriers)]
        parts += [f"{n}x{e.name}" for e, n in sorted(self.exchanges) if n]
        parts += [f"-{n}{l.name}" for l, n in sorted(self.losses) if n]
        return ".".join(parts)


def mz(neutral_mass: float, config: IonConfiguration) -> float:
    """Observed m/z of a neutral mass under one ion configuration."""
    z = config.charge
    if z == 0:
        raise IonError("zero total charge")
    return (neutral_mass + config.mass_shift) / abs(z)


def matches(observed: float, theoretical: float, tol: MzTolerance) -> bool:
    return abs(observed - theoretical) <= tol.window(theoretical)


def enumerate_ion_configurations(
    carriers: Sequence[ChargeCarrier],
    max_charge: int,
    exchanges: Sequence[NeutralExchange] = (),
    losses: Sequence[NeutralLoss] = (),
    max_exchanges: int | None = None,
) -> list[IonConfiguration]:
    """All configurations with |z| in 1..max_charge, deterministic order.

    Carrier multisets are drawn per polarity group; exchange counts run
    0..max_count (optionally capped by ``max_exchanges`` in total) and loss
    counts 0..max_count each.  Output is deduplicated and sorted by
    (|z|, signature).
    """
    if max_charge < 1:
        raise IonError("max_charge must be >= 1")
    if not carriers:
        raise IonError("empty carrier set")
    groups: dict[int, list[ChargeCarrier]] = {}
    for c in carriers:
        groups.setdefault(1 if c.charge > 0 else -1, []).append(c)

    carrier_multisets = []
    for group in groups.values():
        group = sorted(group)
        for size in range(1, max_charge + 1):
            for combo in itertools.combinations_with_replacement(group, size):
                counted = tuple(
                    sorted((c, combo.count(c)) for c in set(combo))
                )
                if abs(sum(c.charge * n for c, n in counted)) <= max_charge:
                    carrier_multisets.append(counted)
    carrier_multisets = sorted(set(carrier_multisets))

    exchange_choices = _count_choices(exchanges, max_exchanges)
    loss_choices = _count_choices(losses, None)

    seen = set()
    out = []
    for cm in carrier_multisets:
        for ex in exchange_choices:
            for lo in loss_choices:
                cfg = IonConfiguration(cm, ex, lo)
                key = cfg.signature
                if key not in seen:
                    seen.add(key)
                    out.append(cfg)
    out.sort(key=lambda c: (abs(c.charge), c.signature))
    return out


def _count_choices(specs, total_cap):
    specs = sorted(specs)
    ranges = [range(s.max_count + 1) for s in specs]
    choices = []
    for counts in itertools.product(*ranges):
        if total_cap is not None and sum(counts) > total_cap:
            continue
        choices.append(tuple((s, n) for s, n in zip(specs, counts) if n))
    return sorted(set(choices)) or [()]
