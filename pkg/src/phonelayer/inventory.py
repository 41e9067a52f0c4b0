"""Phone and phoneme inventories, allophone mappings and signature matrices.

Phones and phonemes are both plain ``str`` symbols in canonical form (see
:func:`normalize_symbol`). Whether a symbol is a phone or a phoneme depends on
the inventory holding it, not on the string itself.
"""

from __future__ import annotations

import math
import unicodedata
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SHARED_LANGUAGE = "<shared>"

_ZERO_WIDTH = dict.fromkeys(map(ord, "‌‍"))


class InventoryError(ValueError):
    pass


def normalize_symbol(symbol: str) -> str:
    """Return the canonical form of an IPA segment.

    NFD decomposition followed by removal of zero-width (non-)joiners.
    Raises :class:`InventoryError` for empty symbols or embedded whitespace.
    """
    norm = unicodedata.normalize("NFD", symbol).translate(_ZERO_WIDTH)
    if not norm:
        raise InventoryError(f"empty phone symbol {symbol!r}")
    if any(ch.isspace() for ch in norm):
        raise InventoryError(f"phone symbol contains whitespace: {symbol!r}")
    return norm


def _unique(symbols: Iterable[str]) -> tuple[str, ...]:
    return tuple(OrderedDict.fromkeys(normalize_symbol(s) for s in symbols))


@dataclass(frozen=True)
class PhonemeInventory:
    language_id: str
    phonemes: tuple[str, ...]

    def __post_init__(self):
        norm = tuple(normalize_symbol(p) for p in self.phonemes)
        if len(set(norm)) != len(norm):
            raise InventoryError(f"duplicate phonemes in inventory of {self.language_id}")
        object.__setattr__(self, "phonemes", norm)

    def __len__(self):
        return len(self.phonemes)

    def index(self, phoneme: str) -> int:
        return self.phonemes.index(normalize_symbol(phoneme))


@dataclass(frozen=True)
class AllophoneMapping:
    """Phoneme -> allophone set for one language, in first-appearance order."""

    language_id: str
    mapping: dict[str, tuple[str, ...]] = field(hash=False)

    def __post_init__(self):
        norm: dict[str, tuple[str, ...]] = {}
        for phoneme, phones in self.mapping.items():
            key = normalize_symbol(phoneme)
            merged = _unique([*norm.get(key, ()), *phones])
            if not merged:
                raise InventoryError(f"{self.language_id}: phoneme /{key}/ has no allophones")
            norm[key] = merged
        object.__setattr__(self, "mapping", norm)

    @property
    def inventory(self) -> PhonemeInventory:
        return PhonemeInventory(self.language_id, tuple(self.mapping))

    def phones(self) -> tuple[str, ...]:
        return _unique(p for phones in self.mapping.values() for p in phones)


@dataclass(frozen=True)
class UniversalPhoneInventory:
    phones: tuple[str, ...]

    def __post_init__(self):
        norm = tuple(normalize_symbol(p) for p in self.phones)
        if len(set(norm)) != len(norm):
            raise InventoryError("duplicate phones in universal inventory")
        object.__setattr__(self, "phones", norm)

    def __len__(self):
        return len(self.phones)

    def __contains__(self, phone):
        return normalize_symbol(phone) in self.phones

    def index(self, phone: str) -> int:
        return self.phones.index(normalize_symbol(phone))


@dataclass(frozen=True)
class SignatureMatrix:
    language_id: str
    entries: np.ndarray = field(compare=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int8)
        if entries.ndim != 2:
            raise InventoryError("signature matrix must be 2-D")
        if not np.isin(entries, (0, 1)).all():
            raise InventoryError("signature matrix entries must be 0 or 1")
        if entries.shape[0] and not entries.any(axis=1).all():
            raise InventoryError(f"{self.language_id}: signature row without any allophone")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __eq__(self, other):
        if not isinstance(other, SignatureMatrix):
            return NotImplemented
        return self.language_id == other.language_id and np.array_equal(self.entries, other.entries)

    def to_text(self) -> str:
        rows, cols = self.shape
        lines = [f"{self.language_id} {rows} {cols}"]
        lines += ["".join(str(int(v)) for v in row) for row in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SignatureMatrix":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise InventoryError("empty signature matrix text")
        try:
            language_id, rows, cols = lines[0].split()
            rows, cols = int(rows), int(cols)
        except ValueError:
            raise InventoryError(f"bad signature header: {lines[0]!r}") from None
        body = lines[1:]
        if len(body) != rows:
            raise InventoryError(f"signature {language_id}: expected {rows} rows, got {len(body)}")
        entries = np.zeros((rows, cols), dtype=np.int8)
        for j, row in enumerate(body):
            row = row.strip()
            if len(row) != cols or set(row) - {"0", "1"}:
                raise InventoryError(f"signature {language_id}: bad row {j + 2}: {row!r}")
            entries[j] = [int(c) for c in row]
        return cls(language_id, entries)


@dataclass(frozen=True)
class PhoibleRecord:
    language_code: str
    area: str
    inventory: frozenset[str]

    def __post_init__(self):
        if not self.inventory:
            raise InventoryError(f"{self.language_code}: empty phone inventory")
        object.__setattr__(self, "inventory", frozenset(normalize_symbol(p) for p in self.inventory))


def build_shared_inventory(inventories: Sequence[PhonemeInventory]) -> PhonemeInventory:
    """Union of phoneme inventories, ordered by first appearance."""
    if not inventories:
        raise InventoryError("no inventories given")
    return PhonemeInventory(SHARED_LANGUAGE, _unique(p for inv in inventories for p in inv.phonemes))


def build_universal_inventory(mappings: Sequence[AllophoneMapping]) -> UniversalPhoneInventory:
    if not mappings:
        raise InventoryError("no allophone mappings given")
    return UniversalPhoneInventory(_unique(p for m in mappings for p in m.phones()))


def build_signature_matrix(mapping: AllophoneMapping, p_uni: UniversalPhoneInventory) -> SignatureMatrix:
    column = {p: k for k, p in enumerate(p_uni.phones)}
    entries = np.zeros((len(mapping.mapping), len(p_uni)), dtype=np.int8)
    for j, (phoneme, phones) in enumerate(mapping.mapping.items()):
        for phone in phones:
            if phone not in column:
                raise InventoryError(
                    f"{mapping.language_id}: allophone [{phone}] of /{phoneme}/ "
                    "is not in the universal inventory"
                )
            entries[j, column[phone]] = 1
    return SignatureMatrix(mapping.language_id, entries)


def phone_coverage(p_uni: UniversalPhoneInventory | Iterable[str], p_i: Iterable[str]) -> Fraction:
    """Fraction of a language's phones that the universal inventory contains."""
    phones = p_uni.phones if isinstance(p_uni, UniversalPhoneInventory) else p_uni
    universal = {normalize_symbol(p) for p in phones}
    target = {normalize_symbol(p) for p in p_i}
    if not target:
        raise InventoryError("coverage of an empty inventory is undefined")
    return Fraction(len(universal & target), len(target))


@dataclass(frozen=True)
class CoverageRow:
    count: int
    mean: float
    stddev: float


def _mean_std(values: Sequence[Fraction]) -> tuple[float, float]:
    # exact rational arithmetic, rounded once at the end
    n = len(values)
    mean = sum(values, Fraction(0)) / n
    var = sum(((v - mean) ** 2 for v in values), Fraction(0)) / n
    return float(mean), math.sqrt(var)


def coverage_by_area(db: Sequence[PhoibleRecord], p_uni: UniversalPhoneInventory) -> dict[str, CoverageRow]:
    """Per-area (count, mean, population stddev) of phone coverage, plus ``"All"``.

    Areas keep first-appearance order; ``"All"`` comes last.
    """
    if not db:
        raise InventoryError("empty PHOIBLE database")
    groups: dict[str, list[Fraction]] = {}
    every = []
    for record in db:
        cov = phone_coverage(p_uni, record.inventory)
        groups.setdefault(record.area, []).append(cov)
        every.append(cov)
    report = {area: CoverageRow(len(v), *_mean_std(v)) for area, v in groups.items()}
    report["All"] = CoverageRow(len(every), *_mean_std(every))
    return report


def format_coverage_report(report: dict[str, CoverageRow]) -> str:
    lines = ["area\tlanguages\tmean\tstddev"]
    for area, row in report.items():
        lines.append(f"{area}\t{row.count}\t{row.mean:.6f}\t{row.stddev:.6f}")
    return "\n".join(lines) + "\n"


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def load_allophone_mappings(path: str | Path) -> list[AllophoneMapping]:
    """Read a ``language<TAB>phoneme<TAB>phone`` table into per-language mappings."""
    table: dict[str, dict[str, list[str]]] = {}
    for lineno, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) != 3 or not all(c.strip() for c in cols):
            raise InventoryError(f"{path}:{lineno}: expected language, phoneme, phone columns")
        lang, phoneme, phone = (c.strip() for c in cols)
        try:
            phoneme, phone = normalize_symbol(phoneme), normalize_symbol(phone)
        except InventoryError as exc:
            raise InventoryError(f"{path}:{lineno}: {exc}") from None
        phones = table.setdefault(lang, {}).setdefault(phoneme, [])
        if phone not in phones:
            phones.append(phone)
    return [AllophoneMapping(lang, {q: tuple(ps) for q, ps in m.items()}) for lang, m in table.items()]


def write_allophone_mappings(mappings: Sequence[AllophoneMapping], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in mappings:
            for phoneme, phones in m.mapping.items():
                for phone in phones:
                    fh.write(f"{m.language_id}\t{phoneme}\t{phone}\n")


def load_phoible(path: str | Path) -> list[PhoibleRecord]:
    """Read ``code<TAB>area<TAB>phones`` rows; one record per language code.

    A code appearing on several rows has its phones merged (the area of its
    first row is kept).
    """
    merged: dict[str, tuple[str, set[str]]] = {}
    for lineno, line in _data_lines(path):
        cols = line.split("\t")
        if len(cols) != 3 or not cols[0].strip() or not cols[1].strip():
            raise InventoryError(f"{path}:{lineno}: expected language_code, area, phones columns")
        code, area, phones = cols[0].strip(), cols[1].strip(), cols[2].split()
        if not phones:
            raise InventoryError(f"{path}:{lineno}: no phones for {code}")
        try:
            phones = {normalize_symbol(p) for p in phones}
        except InventoryError as exc:
            raise InventoryError(f"{path}:{lineno}: {exc}") from None
        if code in merged:
            merged[code][1].update(phones)
        else:
            merged[code] = (area, phones)
    return [PhoibleRecord(code, area, frozenset(phones)) for code, (area, phones) in merged.items()]


def load_phone_list(path: str | Path) -> list[str]:
    """Whitespace-separated phone symbols, ``#`` comment lines ignored."""
    return list(_unique(tok for _, line in _data_lines(path) for tok in line.split()))
