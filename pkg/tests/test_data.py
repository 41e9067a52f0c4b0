import numpy as np
import pytest

from phonelayer.ctc import min_frames
from phonelayer.data import (
    CorpusItem,
    DataError,
    SyntheticSpec,
    aspiration_contrast_spec,
    generate_corpus,
    label_sequence,
    read_features,
    read_manifest,
    write_corpus,
    write_features,
    write_manifest,
)
from phonelayer.inventory import AllophoneMapping, normalize_symbol
from phonelayer.numeric import Utterance

PH = normalize_symbol("pʰ")


def test_noise_free_single_frame_equals_prototypes():
    spec = aspiration_contrast_spec(noise=0.0, frames_per_phone=(1, 1))
    for item in generate_corpus(spec, 5):
        expected = np.stack([spec.prototypes[p] for p in item.phones])
        assert np.array_equal(item.utterance.features, expected)


def test_merge_language_never_marks_aspiration():
    spec = aspiration_contrast_spec()
    corpus = generate_corpus(spec, 300)
    merge = [i for i in corpus if i.language_id == "merge"]
    contrast = [i for i in corpus if i.language_id == "contrast"]
    # merge: both [p] and [pʰ] annotated /p/
    seen = {(q, p) for i in merge for q, p in zip(i.transcript, i.phones) if q == "p"}
    assert seen == {("p", "p"), ("p", PH)}
    assert all(PH not in i.transcript for i in merge)
    # contrast: the annotation always follows the phone
    assert all(i.transcript == i.phones for i in contrast)
    assert any(PH in i.transcript for i in contrast)


def test_generation_is_deterministic():
    a = generate_corpus(aspiration_contrast_spec(seed=4), 20)
    b = generate_corpus(aspiration_contrast_spec(seed=4), 20)
    assert [i.transcript for i in a] == [i.transcript for i in b]
    assert all(np.array_equal(x.utterance.features, y.utterance.features) for x, y in zip(a, b))


def test_phones_follow_mapping_and_are_feasible():
    spec = aspiration_contrast_spec()
    mappings = {m.language_id: m.mapping for m in spec.mappings}
    for item in generate_corpus(spec, 200):
        assert len(item.phones) == len(item.transcript)
        assert all(p in mappings[item.language_id][q] for q, p in zip(item.transcript, item.phones))
        assert item.utterance.frames >= min_frames(item.transcript)
        assert all(a != b for a, b in zip(item.phones, item.phones[1:]))


def test_per_language_counts_and_bad_counts():
    spec = aspiration_contrast_spec()
    corpus = generate_corpus(spec, {"merge": 3, "contrast": 1})
    assert [i.language_id for i in corpus] == ["merge"] * 3 + ["contrast"]
    with pytest.raises(DataError):
        generate_corpus(spec, 0)


def test_spec_validation():
    m = AllophoneMapping("x", {"p": ("p", "b")})
    with pytest.raises(DataError):
        SyntheticSpec({"p": np.zeros(2)}, [m])
    with pytest.raises(DataError):
        SyntheticSpec({"p": np.zeros(2), "b": np.zeros(2)}, [m], noise=-1)


def test_label_sequence():
    assert label_sequence(["a", "b", "c"], ["c", "a"]) == [2, 0]
    with pytest.raises(DataError):
        label_sequence(["a"], ["z"])


def test_features_round_trip(tmp_path, rng):
    x = rng.normal(size=(3, 4))
    write_features(tmp_path / "f.txt", x)
    assert np.array_equal(read_features(tmp_path / "f.txt").features, x)


def test_features_header_mismatch_names_line(tmp_path):
    f = tmp_path / "f.txt"
    f.write_text("2 2\n1 2\n", encoding="utf-8")
    with pytest.raises(DataError, match=":1:"):
        read_features(f)
    f.write_text("2 2\n1 2\n3\n", encoding="utf-8")
    with pytest.raises(DataError, match=":3:"):
        read_features(f)
    f.write_text("2 x\n", encoding="utf-8")
    with pytest.raises(DataError, match=":1:"):
        read_features(f)


def test_manifest_round_trip(tmp_path):
    write_features(tmp_path / "u.txt", np.ones((2, 3)))
    item = CorpusItem("eng", Utterance(np.ones((2, 3))), ("p", "a"), None, "u.txt")
    write_manifest(tmp_path / "m.tsv", [item])
    (back,) = read_manifest(tmp_path / "m.tsv")
    assert (back.language_id, back.transcript, back.feature_file) == ("eng", ("p", "a"), "u.txt")
    assert np.array_equal(back.utterance.features, item.utterance.features)


def test_manifest_keeps_file_order(tmp_path):
    lines = []
    for n, lang in enumerate(["tur", "amh", "tur", "vie"]):
        write_features(tmp_path / f"{n}.txt", np.zeros((1, 2)))
        lines.append(f"{lang}\t{n}.txt\ta\n")
    (tmp_path / "m.tsv").write_text("".join(lines), encoding="utf-8")
    corpus = read_manifest(tmp_path / "m.tsv")
    assert list(dict.fromkeys(i.language_id for i in corpus)) == ["tur", "amh", "vie"]


def test_manifest_malformed_line(tmp_path):
    (tmp_path / "m.tsv").write_text("eng\tonly-two-columns\n", encoding="utf-8")
    with pytest.raises(DataError, match=":1:"):
        read_manifest(tmp_path / "m.tsv")


def test_write_corpus(tmp_path):
    spec = aspiration_contrast_spec()
    corpus = generate_corpus(spec, 2)
    write_corpus(tmp_path, corpus, spec)
    back = read_manifest(tmp_path / "manifest.tsv")
    phones = read_manifest(tmp_path / "phones.tsv")
    assert [i.transcript for i in back] == [i.transcript for i in corpus]
    assert [i.transcript for i in phones] == [i.phones for i in corpus]
    assert (tmp_path / "allophones.tsv").exists()
    assert all(np.array_equal(a.utterance.features, b.utterance.features) for a, b in zip(back, corpus))
