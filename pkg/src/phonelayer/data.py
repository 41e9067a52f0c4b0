"""Synthetic multilingual corpora and the feature / manifest file formats.

Feature file: first line ``T D``, then T lines of D numbers.
Manifest: ``language_id<TAB>feature_file<TAB>space-separated transcription``;
relative feature paths resolve against the manifest's directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .inventory import AllophoneMapping, PhonemeInventory, normalize_symbol, write_allophone_mappings
from .numeric import Utterance


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusItem:
    language_id: str
    utterance: Utterance
    transcript: tuple[str, ...]
    phones: tuple[str, ...] | None = None
    feature_file: str | None = None


@dataclass
class SyntheticSpec:
    prototypes: dict[str, np.ndarray]
    mappings: list[AllophoneMapping]
    utterance_length: tuple[int, int] = (3, 6)
    frames_per_phone: tuple[int, int] = (1, 3)
    noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.prototypes = {normalize_symbol(p): np.asarray(v, dtype=np.float64) for p, v in self.prototypes.items()}
        dims = {v.shape for v in self.prototypes.values()}
        if len(dims) != 1:
            raise DataError(f"prototype vectors have inconsistent shapes {sorted(dims)}")
        if self.noise < 0:
            raise DataError("noise must be non-negative")
        lo, hi = self.frames_per_phone
        if lo < 1 or hi < lo:
            raise DataError(f"bad frames_per_phone range {self.frames_per_phone}")
        lo, hi = self.utterance_length
        if lo < 1 or hi < lo:
            raise DataError(f"bad utterance_length range {self.utterance_length}")
        for m in self.mappings:
            missing = [p for p in m.phones() if p not in self.prototypes]
            if missing:
                raise DataError(f"{m.language_id}: no prototype for phones {missing}")

    @property
    def feature_dim(self) -> int:
        return next(iter(self.prototypes.values())).shape[0]


def aspiration_contrast_spec(
    feature_dim: int = 12, noise: float = 0.3, seed: int = 0, **kwargs
) -> SyntheticSpec:
    """Two languages disagreeing on stop aspiration.

    ``merge`` writes both [p] and [pʰ] as /p/ (likewise t, k); ``contrast``
    keeps /p/ and /pʰ/ apart and has a larger vowel set.
    """
    stops = ["p", "t", "k"]
    merge = {s: (s, s + "ʰ") for s in stops}
    merge.update({"a": ("a",), "i": ("i",)})
    contrast = {}
    for s in stops:
        contrast[s] = (s,)
        contrast[s + "ʰ"] = (s + "ʰ",)
    contrast.update({v: (v,) for v in ("a", "i", "u", "e", "o")})
    mappings = [AllophoneMapping("merge", merge), AllophoneMapping("contrast", contrast)]
    rng = np.random.default_rng(seed + 7919)
    phones = dict.fromkeys(p for m in mappings for p in m.phones())
    prototypes = {p: rng.normal(size=feature_dim) for p in phones}
    return SyntheticSpec(prototypes, mappings, noise=noise, seed=seed, **kwargs)


def generate_corpus(spec: SyntheticSpec, n_per_language: int | Mapping[str, int]) -> list[CorpusItem]:
    """Random phoneme strings realized through random allophones plus Gaussian noise.

    Adjacent phonemes (and adjacent phones) always differ, so every item is
    CTC-feasible with one frame per phone.
    """
    counts = {m.language_id: n_per_language for m in spec.mappings} if isinstance(n_per_language, int) \
        else dict(n_per_language)
    if any(n <= 0 for n in counts.values()) or not counts:
        raise DataError(f"utterance counts must be positive, got {counts}")
    rng = np.random.default_rng(spec.seed)
    corpus = []
    for mapping in spec.mappings:
        phonemes = list(mapping.mapping)
        for _ in range(counts.get(mapping.language_id, 0)):
            length = int(rng.integers(spec.utterance_length[0], spec.utterance_length[1] + 1))
            transcript, phones = [], []
            while len(transcript) < length:
                q = phonemes[int(rng.integers(len(phonemes)))]
                allos = mapping.mapping[q]
                p = allos[int(rng.integers(len(allos)))]
                if transcript and (q == transcript[-1] or p == phones[-1]):
                    continue
                transcript.append(q)
                phones.append(p)
            frames = []
            for p in phones:
                n = int(rng.integers(spec.frames_per_phone[0], spec.frames_per_phone[1] + 1))
                frames.append(spec.prototypes[p] + spec.noise * rng.normal(size=(n, spec.feature_dim)))
            corpus.append(
                CorpusItem(mapping.language_id, Utterance(np.vstack(frames)), tuple(transcript), tuple(phones))
            )
    return corpus


def label_sequence(inventory: PhonemeInventory | Sequence[str], transcript: Sequence[str]) -> list[int]:
    symbols = inventory.phonemes if isinstance(inventory, PhonemeInventory) else tuple(inventory)
    index = {s: k for k, s in enumerate(symbols)}
    try:
        return [index[normalize_symbol(s)] for s in transcript]
    except KeyError as exc:
        raise DataError(f"symbol {exc.args[0]!r} is not in the inventory") from None


def write_features(path: str | Path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{features.shape[0]} {features.shape[1]}\n")
        for row in features:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_features(path: str | Path) -> Utterance:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}:1: empty feature file")
    try:
        T, D = (int(v) for v in lines[0].split())
    except ValueError:
        raise DataError(f"{path}:1: header must be 'T D', got {lines[0]!r}") from None
    body = [(n, line) for n, line in enumerate(lines[1:], 2) if line.strip()]
    if len(body) != T:
        raise DataError(f"{path}:1: header declares {T} frames but file has {len(body)}")
    feats = np.empty((T, D))
    for t, (lineno, line) in enumerate(body):
        try:
            row = [float(v) for v in line.split()]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
        if len(row) != D:
            raise DataError(f"{path}:{lineno}: expected {D} values, got {len(row)}")
        feats[t] = row
    try:
        return Utterance(feats)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def read_manifest(path: str | Path) -> list[CorpusItem]:
    base = Path(path).parent
    corpus = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 3 or not cols[0].strip() or not cols[1].strip():
                raise DataError(f"{path}:{lineno}: expected language_id, feature_file, transcription")
            lang, feature_file, text = cols[0].strip(), cols[1].strip(), cols[2].split()
            try:
                transcript = tuple(normalize_symbol(s) for s in text)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            utt = read_features(base / feature_file)
            corpus.append(CorpusItem(lang, utt, transcript, None, feature_file))
    return corpus


def write_manifest(path: str | Path, corpus: Sequence[CorpusItem], use_phones: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in corpus:
            if item.feature_file is None:
                raise DataError("corpus item has no feature file; write features first")
            symbols = item.phones if use_phones else item.transcript
            fh.write(f"{item.language_id}\t{item.feature_file}\t{' '.join(symbols)}\n")


def write_corpus(out_dir: str | Path, corpus: Sequence[CorpusItem], spec: SyntheticSpec | None = None) -> list[CorpusItem]:
    """Write features, ``manifest.tsv``, ``phones.tsv`` and (with a spec) ``allophones.tsv``."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    written = []
    for n, item in enumerate(corpus):
        rel = os.path.join("features", f"{n:06d}.txt")
        write_features(out / rel, item.utterance.features)
        written.append(CorpusItem(item.language_id, item.utterance, item.transcript, item.phones, rel))
    write_manifest(out / "manifest.tsv", written)
    if all(item.phones is not None for item in written):
        write_manifest(out / "phones.tsv", written, use_phones=True)
    if spec is not None:
        write_allophone_mappings(spec.mappings, out / "allophones.tsv")
    return written
