"""Monoisotopic element masses and elemental formulas.

All residue and fragment masses in the package are derived from the element
table; no residue-level mass literal appears outside test oracles.  The
shipped defaults live in ``data/elements.cfg`` and can be replaced by a
user-supplied ``key = value`` file.
"""

from __future__ import annotations

import re
from importlib import resources
from types import MappingProxyType
from typing import Iterable, Mapping


class ConfigError(ValueError):
    """Malformed element table, residue registry, or settings file."""


_FORMULA_RE = re.compile(r"([A-Z][a-z]?)(\d*)")


class ElementMassTable:
    """Immutable map from element symbol to monoisotopic mass in Da."""

    def __init__(self, entries: Mapping[str, float]):
        for symbol, mass in entries.items():
            if mass <= 0:
                raise ConfigError(f"non-positive mass for element {symbol!r}: {mass}")
        self._entries = MappingProxyType(dict(entries))

    def __getitem__(self, symbol: str) -> float:
        try:
            return self._entries[symbol]
        except KeyError:
            raise ConfigError(f"unknown element symbol {symbol!r}") from None

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._entries

    def items(self):
        return self._entries.items()

    def formula_mass(self, formula: Mapping[str, int] | str) -> float:
        """Monoisotopic mass of an elemental formula (dict or 'C6H12O6')."""
        if isinstance(formula, str):
            formula = parse_formula(formula)
        return sum(self[sym] * n for sym, n in formula.items())


def parse_formula(text: str) -> dict[str, int]:
    """Parse 'C6H12O6' style formulas into {symbol: count}."""
    counts: dict[str, int] = {}
    pos = 0
    for match in _FORMULA_RE.finditer(text):
        if match.start() != pos:
            raise ConfigError(f"bad formula {text!r} at offset {pos}")
        if not match.group(0):
            break
        symbol = match.group(1)
        n = int(match.group(2) or "1")
        if n < 0:
            raise ConfigError(f"negative count in formula {text!r}")
        counts[symbol] = counts.get(symbol, 0) + n
        pos = match.end()
    if pos != len(text) or not counts:
        raise ConfigError(f"bad formula {text!r}")
    return counts


def parse_key_value(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    """Parse a ``key = value`` file; '#' starts a comment, blank lines skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_element_table(lines: Iterable[str] | None = None) -> ElementMassTable:
    """Load an element table from ``key = value`` lines, or the shipped default."""
    if lines is None:
        text = resources.files("glyms.data").joinpath("elements.cfg").read_text()
        lines = text.splitlines()
    raw = parse_key_value(lines, "elements")
    try:
        entries = {sym: float(val) for sym, val in raw.items()}
    except ValueError as exc:
        raise ConfigError(f"bad element mass: {exc}") from None
    return ElementMassTable(entries)


DEFAULT_ELEMENTS = load_element_table()

WATER = DEFAULT_ELEMENTS.formula_mass("H2O")
METHYLENE = DEFAULT_ELEMENTS.formula_mass("CH2")
