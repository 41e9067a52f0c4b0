"""Multilingual recognizers: shared-phoneme, private-phoneme and allophone-layer models.

All three share the same encoder trunk configuration. The allophone model's
encoder emits ``|P_uni| + 1`` logits per frame (blank last); each language
maps the phone part through its allophone matrix and passes the blank logit
through unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import allophone as al
from .ctc import CTCInfeasibleError, ctc_loss, greedy_decode, restricted_greedy_decode
from .data import CorpusItem, label_sequence
from .evaluation import corpus_error_rate
from .inventory import (
    AllophoneMapping,
    SHARED_LANGUAGE,
    PhonemeInventory,
    SignatureMatrix,
    UniversalPhoneInventory,
    build_shared_inventory,
    build_signature_matrix,
    build_universal_inventory,
    normalize_symbol,
)
from .numeric import EncoderParams, Layer, Utterance, encoder_backward, encoder_forward, init_encoder, init_layer, sgd_step

ALLOPHONE, PRIVATE, SHARED = "allophone", "private", "shared"
ARCH_ALIASES = {"allosaurus": ALLOPHONE}
ARCHITECTURES = (SHARED, PRIVATE, ALLOPHONE)
FORMAT_VERSION = 1
PHONE_LOGIT_OFFSET = 1.0


class ModelError(ValueError):
    pass


class UnsupportedOperation(ModelError):
    pass


def canonical_arch(arch: str) -> str:
    arch = ARCH_ALIASES.get(arch, arch)
    if arch not in ARCHITECTURES:
        raise ModelError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    return arch


@dataclass
class MultilingualModel:
    arch: str
    encoder: EncoderParams
    phones: UniversalPhoneInventory
    inventories: dict[str, PhonemeInventory]
    alpha: float = 10.0
    seed: int = 0
    allophones: dict[str, al.AllophoneMatrix] = field(default_factory=dict)
    heads: dict[str, EncoderParams] = field(default_factory=dict)
    shared_inventory: PhonemeInventory | None = None

    def __post_init__(self):
        self.arch = canonical_arch(self.arch)
        if self.alpha < 0:
            raise ModelError("alpha must be non-negative")
        if self.arch == ALLOPHONE:
            if self.encoder.output_dim != len(self.phones) + 1:
                raise ModelError("allophone encoder must emit |P_uni| + 1 logits")
            for lang, inv in self.inventories.items():
                if self.allophones[lang].shape != (len(inv), len(self.phones)):
                    raise ModelError(f"{lang}: allophone matrix shape disagrees with inventories")
        elif self.arch == PRIVATE:
            for lang, inv in self.inventories.items():
                head = self.heads[lang]
                if head.input_dim != self.encoder.output_dim or head.output_dim != len(inv) + 1:
                    raise ModelError(f"{lang}: private head shape disagrees with inventory")
        else:
            if self.shared_inventory is None:
                self.shared_inventory = build_shared_inventory(list(self.inventories.values()))
            if self.encoder.output_dim != len(self.shared_inventory) + 1:
                raise ModelError("shared encoder must emit |Q_sha| + 1 logits")

    @property
    def languages(self) -> list[str]:
        return list(self.inventories)

    def parameters(self) -> list[np.ndarray]:
        """Live parameter arrays in a fixed order (encoder first, then per-language heads)."""
        params = self.encoder.arrays()
        for lang in self.inventories:
            if self.arch == ALLOPHONE:
                params.append(self.allophones[lang].weights)
            elif self.arch == PRIVATE:
                params.extend(self.heads[lang].arrays())
        return params

    def set_parameters(self, values: Sequence[np.ndarray]) -> None:
        live = self.parameters()
        if len(live) != len(values):
            raise ModelError(f"expected {len(live)} parameter arrays, got {len(values)}")
        for p, v in zip(live, values):
            p[...] = v

    def _check_language(self, language_id: str) -> None:
        if language_id not in self.inventories:
            raise ModelError(f"unknown language {language_id!r}; registered: {self.languages}")


def build_model(
    arch: str,
    mappings: Sequence[AllophoneMapping],
    input_dim: int,
    hidden: Sequence[int] = (32,),
    alpha: float = 10.0,
    seed: int = 0,
    recurrent_layer: int | None = None,
    phone_logit_offset: float = PHONE_LOGIT_OFFSET,
) -> MultilingualModel:
    """Fresh model with seeded encoder; identical trunk weights for every architecture.

    For the allophone model ``phone_logit_offset`` is added to the output bias
    of every phone (not blank) slot. Max-pooling only passes gradient to a
    phone column while ``w * h`` beats the zero-weight columns, so phone logits
    that start negative never learn; starting them positive avoids that.
    """
    arch = canonical_arch(arch)
    if not mappings:
        raise ModelError("no languages given")
    phones = build_universal_inventory(mappings)
    inventories = {m.language_id: m.inventory for m in mappings}
    if len(inventories) != len(mappings):
        raise ModelError("duplicate language ids")
    if arch == ALLOPHONE:
        encoder = init_encoder(input_dim, hidden, len(phones) + 1, seed, recurrent_layer)
        encoder.layers[-1].bias[: len(phones)] += phone_logit_offset
        allophones = {m.language_id: al.init_from_signature(build_signature_matrix(m, phones)) for m in mappings}
        return MultilingualModel(arch, encoder, phones, inventories, alpha, seed, allophones=allophones)
    if arch == PRIVATE:
        encoder = init_encoder(input_dim, hidden, None, seed, recurrent_layer)
        rng = np.random.default_rng([seed, 1])
        heads = {
            lang: EncoderParams([init_layer(rng, encoder.output_dim, len(inv) + 1, "linear")], seed)
            for lang, inv in inventories.items()
        }
        return MultilingualModel(arch, encoder, phones, inventories, alpha, seed, heads=heads)
    shared = build_shared_inventory(list(inventories.values()))
    encoder = init_encoder(input_dim, hidden, len(shared) + 1, seed, recurrent_layer)
    return MultilingualModel(arch, encoder, phones, inventories, alpha, seed, shared_inventory=shared)


def _features(utt) -> np.ndarray:
    return utt.features if isinstance(utt, Utterance) else np.asarray(utt, dtype=np.float64)


def _forward(model: MultilingualModel, language_id: str, utt):
    """Language-level logits plus a closure mapping d(logits) to parameter gradients."""
    model._check_language(language_id)
    feats = _features(utt)
    out, cache = encoder_forward(model.encoder, feats)

    if model.arch == ALLOPHONE:
        matrix = model.allophones[language_id]
        P = len(model.phones)
        h = out[:, :P]
        g, argmax = al.allophone_forward(matrix, h)
        logits = np.concatenate([g, out[:, P:]], axis=1)

        def backward(dlogits):
            Q = g.shape[1]
            grad_w, grad_h = al.allophone_backward(dlogits[:, :Q], argmax, matrix, h)
            enc_grads, _ = encoder_backward(model.encoder, cache, np.concatenate([grad_h, dlogits[:, Q:]], axis=1))
            return enc_grads.arrays(), {language_id: [grad_w]}

        return logits, backward

    if model.arch == PRIVATE:
        head = model.heads[language_id]
        logits, head_cache = encoder_forward(head, out)

        def backward(dlogits):
            head_grads, dz = encoder_backward(head, head_cache, dlogits)
            enc_grads, _ = encoder_backward(model.encoder, cache, dz)
            return enc_grads.arrays(), {language_id: head_grads.arrays()}

        return logits, backward

    def backward(dlogits):
        enc_grads, _ = encoder_backward(model.encoder, cache, dlogits)
        return enc_grads.arrays(), {}

    return out, backward


def phoneme_logits(model: MultilingualModel, language_id: str, utt) -> np.ndarray:
    """Per-frame class scores with blank last: ``|Q_i| + 1`` classes (``|Q_sha| + 1`` for shared)."""
    return _forward(model, language_id, utt)[0]


def phone_logits(model: MultilingualModel, utt) -> np.ndarray:
    """Universal phone logits ``h`` with blank last (allophone model only)."""
    if model.arch != ALLOPHONE:
        raise UnsupportedOperation(f"{model.arch} model has no universal phone layer")
    return encoder_forward(model.encoder, _features(utt))[0]


def _labels(model: MultilingualModel, language_id: str, transcript: Sequence[str]) -> list[int]:
    if model.arch == SHARED:
        return label_sequence(model.shared_inventory, transcript)
    return label_sequence(model.inventories[language_id], transcript)


def batch_gradients(model: MultilingualModel, batch: Sequence[CorpusItem]):
    """Per-item CTC losses, the penalty total, and gradients aligned with ``parameters()``."""
    if not batch:
        raise ModelError("empty batch")
    enc_acc = [np.zeros_like(p) for p in model.encoder.arrays()]
    head_acc: dict[str, list[np.ndarray]] = {}
    ctc_losses = []
    for n, item in enumerate(batch):
        logits, backward = _forward(model, item.language_id, item.utterance)
        try:
            loss, dlogits = ctc_loss(logits, _labels(model, item.language_id, item.transcript))
        except CTCInfeasibleError as exc:
            raise CTCInfeasibleError(f"batch item {n} ({item.language_id}): {exc}") from None
        ctc_losses.append(loss)
        enc_grads, head_grads = backward(dlogits)
        for acc, g in zip(enc_acc, enc_grads):
            acc += g
        for lang, grads in head_grads.items():
            if lang not in head_acc:
                head_acc[lang] = [np.zeros_like(g) for g in grads]
            for acc, g in zip(head_acc[lang], grads):
                acc += g

    penalty = 0.0
    if model.arch == ALLOPHONE:
        # one penalty per language present in the batch
        for lang in dict.fromkeys(item.language_id for item in batch):
            matrix = model.allophones[lang]
            value, grad = al.l2_penalty(matrix, matrix.signature, model.alpha)
            penalty += value
            head_acc[lang][0] += grad

    grads = list(enc_acc)
    for lang in model.inventories:
        if model.arch == ALLOPHONE:
            grads.extend(head_acc.get(lang, [np.zeros_like(model.allophones[lang].weights)]))
        elif model.arch == PRIVATE:
            grads.extend(head_acc.get(lang) or [np.zeros_like(a) for a in model.heads[lang].arrays()])
    return ctc_losses, penalty, grads


def total_loss(model: MultilingualModel, batch: Sequence[CorpusItem]) -> tuple[float, list[np.ndarray]]:
    """Summed CTC loss plus ``alpha * ||W - S||_F^2`` per language in the batch."""
    ctc_losses, penalty, grads = batch_gradients(model, batch)
    return math.fsum(ctc_losses) + penalty, grads


@dataclass
class TrainConfig:
    epochs: int = 10
    lr: float = 0.01
    batch_size: int = 8
    seed: int = 0


def train(model: MultilingualModel, corpus: Sequence[CorpusItem], config: TrainConfig, log=None):
    """Plain SGD over shuffled mini-batches; mutates and returns ``model``.

    Returns ``(model, losses)`` where ``losses[e]`` is the mean per-utterance
    CTC loss observed during epoch ``e``.
    """
    if not corpus:
        raise ModelError("empty corpus")
    for item in corpus:
        model._check_language(item.language_id)
    rng = np.random.default_rng(config.seed)
    trajectory = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(corpus))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [corpus[i] for i in order[start : start + config.batch_size]]
            ctc_losses, _, grads = batch_gradients(model, batch)
            epoch_losses.extend(ctc_losses)
            if config.lr:
                model.set_parameters(sgd_step(model.parameters(), grads, config.lr))
        trajectory.append(math.fsum(epoch_losses) / len(epoch_losses))
        if log is not None:
            log(epoch, trajectory[-1])
    return model, trajectory


def recognize_phonemes(model: MultilingualModel, language_id: str, utt) -> list[str]:
    """Greedy phoneme decoding for a registered language.

    The shared model decodes over its shared inventory restricted to the
    language's own phonemes, so the output always lies in ``Q_i``.
    """
    logits = phoneme_logits(model, language_id, utt)
    if model.arch == SHARED:
        symbols = model.shared_inventory.phonemes
        own = set(model.inventories[language_id].phonemes)
        allowed = [k for k, s in enumerate(symbols) if s in own]
        return [symbols[k] for k in restricted_greedy_decode(logits, allowed)]
    symbols = model.inventories[language_id].phonemes
    return [symbols[k] for k in greedy_decode(logits)]


def recognize_phones(model: MultilingualModel, utt) -> list[str]:
    """Universal phone recognition: greedy decoding straight over ``h``."""
    return [model.phones.phones[k] for k in greedy_decode(phone_logits(model, utt))]


def recognize_phones_for_language(model: MultilingualModel, utt, inventory: Iterable[str]) -> list[str]:
    """Phone recognition restricted to ``inventory`` intersected with the universal inventory."""
    wanted = {normalize_symbol(p) for p in inventory}
    allowed = [k for k, p in enumerate(model.phones.phones) if p in wanted]
    if not allowed:
        raise ModelError("inventory shares no phone with the universal inventory")
    return [model.phones.phones[k] for k in restricted_greedy_decode(phone_logits(model, utt), allowed)]


def baseline_phone_hypothesis(model: MultilingualModel, utt, language_id: str | None = None) -> list[str]:
    """Phone-level output of a phoneme baseline, reading phonemes as same-named phones.

    Shared: unrestricted decoding over ``Q_sha``. Private: the given
    language's head. Allophone models use :func:`recognize_phones`.
    """
    if model.arch == SHARED:
        symbols = model.shared_inventory.phonemes
        lang = language_id if language_id is not None else model.languages[0]
        return [symbols[k] for k in greedy_decode(phoneme_logits(model, lang, utt))]
    if model.arch == PRIVATE:
        if language_id is None:
            raise ModelError("private baseline needs a language head")
        return recognize_phonemes(model, language_id, utt)
    return recognize_phones(model, utt)


def best_private_head(model: MultilingualModel, utterances, references) -> tuple[str, dict[str, float]]:
    """Try every private head on an unseen-language set; keep the lowest error rate."""
    if model.arch != PRIVATE:
        raise UnsupportedOperation("head sweep applies to the private-phoneme model")
    rates = {}
    for lang in model.languages:
        hyps = [recognize_phonemes(model, lang, u) for u in utterances]
        rates[lang] = corpus_error_rate(list(zip(hyps, references)))
    best = min(rates, key=lambda lang: (rates[lang], model.languages.index(lang)))
    return best, rates


# serialization


def _array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in np.ravel(a)]}


def _unarray(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


def _encoder_dict(enc: EncoderParams) -> list:
    return [
        {
            "activation": layer.activation,
            "weight": _array(layer.weight),
            "bias": _array(layer.bias),
            "recurrent": None if layer.recurrent is None else _array(layer.recurrent),
        }
        for layer in enc.layers
    ]


def _encoder_from(layers: list, seed) -> EncoderParams:
    return EncoderParams(
        [
            Layer(
                _unarray(d["weight"]),
                _unarray(d["bias"]),
                d["activation"],
                None if d["recurrent"] is None else _unarray(d["recurrent"]),
            )
            for d in layers
        ],
        seed,
    )


def model_to_dict(model: MultilingualModel) -> dict:
    languages = []
    for lang, inv in model.inventories.items():
        entry = {"id": lang, "phonemes": list(inv.phonemes)}
        if model.arch == ALLOPHONE:
            matrix = model.allophones[lang]
            entry["signature"] = matrix.signature.entries.tolist()
            entry["allophone"] = _array(matrix.weights)
        elif model.arch == PRIVATE:
            entry["head"] = _encoder_dict(model.heads[lang])
        languages.append(entry)
    return {
        "format": "phonelayer-model",
        "version": FORMAT_VERSION,
        "arch": model.arch,
        "seed": model.seed,
        "alpha": model.alpha,
        "phones": list(model.phones.phones),
        "shared_phonemes": None if model.shared_inventory is None else list(model.shared_inventory.phonemes),
        "languages": languages,
        "encoder": _encoder_dict(model.encoder),
    }


def model_from_dict(d: dict) -> MultilingualModel:
    if d.get("format") != "phonelayer-model" or d.get("version") != FORMAT_VERSION:
        raise ModelError("not a phonelayer model file (or unsupported version)")
    seed = d["seed"]
    inventories = {e["id"]: PhonemeInventory(e["id"], tuple(e["phonemes"])) for e in d["languages"]}
    allophones, heads = {}, {}
    for e in d["languages"]:
        if "allophone" in e:
            sig = SignatureMatrix(e["id"], np.array(e["signature"], dtype=np.int8))
            allophones[e["id"]] = al.AllophoneMatrix(e["id"], _unarray(e["allophone"]), sig)
        if "head" in e:
            heads[e["id"]] = _encoder_from(e["head"], seed)
    shared = d.get("shared_phonemes")
    return MultilingualModel(
        d["arch"],
        _encoder_from(d["encoder"], seed),
        UniversalPhoneInventory(tuple(d["phones"])),
        inventories,
        d["alpha"],
        seed,
        allophones=allophones,
        heads=heads,
        shared_inventory=None if shared is None else PhonemeInventory(SHARED_LANGUAGE, tuple(shared)),
    )


def save_model(model: MultilingualModel, path: str | Path) -> None:
    text = json.dumps(model_to_dict(model), ensure_ascii=False, indent=1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def load_model(path: str | Path) -> MultilingualModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
