import math
import unicodedata
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phonelayer.inventory import (
    SHARED_LANGUAGE,
    AllophoneMapping,
    InventoryError,
    PhoibleRecord,
    PhonemeInventory,
    SignatureMatrix,
    UniversalPhoneInventory,
    build_shared_inventory,
    build_signature_matrix,
    build_universal_inventory,
    coverage_by_area,
    load_allophone_mappings,
    load_phoible,
    load_phone_list,
    normalize_symbol,
    phone_coverage,
    write_allophone_mappings,
)

ASP = "pʰ"


def inv(*phonemes, lang="x"):
    return PhonemeInventory(lang, tuple(phonemes))


def test_normalize_decomposes_and_drops_joiners():
    assert normalize_symbol("\u00e3") == "a\u0303"
    assert normalize_symbol("t\u200ds") == "ts"
    assert normalize_symbol("t\u200cs") == "ts"
    assert normalize_symbol("\u00e9") == normalize_symbol("e\u0301")


@pytest.mark.parametrize("bad", ["", " ", "p t", "\u200d", "a\tb"])
def test_normalize_rejects(bad):
    with pytest.raises(InventoryError):
        normalize_symbol(bad)


@given(st.text(alphabet="aeiouptk\u02b0\u02d0\u02b2\u0303\u0301\u00e3\u00e9\u200d", min_size=1, max_size=5))
def test_normalize_idempotent(s):
    try:
        once = normalize_symbol(s)
    except InventoryError:
        return
    assert normalize_symbol(once) == once


@pytest.mark.parametrize(
    "inventories, expected",
    [
        ([("a", "b"), ("a", "b")], ("a", "b")),
        ([("a", "b"), ("c",)], ("a", "b", "c")),
        ([("p", "t"), ("p", "k"), ("k", "s")], ("p", "t", "k", "s")),
    ],
)
def test_shared_inventory(inventories, expected):
    shared = build_shared_inventory([inv(*i) for i in inventories])
    assert shared.phonemes == expected
    assert shared.language_id == SHARED_LANGUAGE


def test_shared_inventory_empty():
    with pytest.raises(InventoryError):
        build_shared_inventory([])


def test_inventory_rejects_duplicates():
    with pytest.raises(InventoryError):
        inv("a", "a")
    # duplicates after normalization count too
    with pytest.raises(InventoryError):
        inv("\u00e3", "a\u0303")


def test_universal_inventory_examples():
    assert build_universal_inventory([AllophoneMapping("x", {"p": ("p",)})]).phones == ("p",)
    eng = AllophoneMapping("eng", {"p": ("p", ASP)})
    cmn = AllophoneMapping("cmn", {"p": ("p",), ASP: (ASP,)})
    assert build_universal_inventory([eng, cmn]).phones == ("p", normalize_symbol(ASP))
    a = AllophoneMapping("a", {"t": ("t", "ɾ")})
    b = AllophoneMapping("b", {"d": ("d", "ɾ")})
    assert build_universal_inventory([a, b]).phones == ("t", "ɾ", "d")
    with pytest.raises(InventoryError):
        build_universal_inventory([])


def test_allophone_mapping_rejects_empty_set():
    with pytest.raises(InventoryError):
        AllophoneMapping("x", {"p": ()})


def test_signature_examples():
    s = build_signature_matrix(AllophoneMapping("eng", {"p": ("p", ASP)}), UniversalPhoneInventory(("p", ASP, "t")))
    assert s.entries.tolist() == [[1, 1, 0]]
    s = build_signature_matrix(AllophoneMapping("a", {"a": ("a",)}), UniversalPhoneInventory(("a",)))
    assert s.entries.tolist() == [[1]]
    s = build_signature_matrix(
        AllophoneMapping("q", {"x": ("x",), "y": ("y", "z")}), UniversalPhoneInventory(("z", "x", "y"))
    )
    assert s.entries.tolist() == [[0, 1, 0], [1, 0, 1]]


def test_signature_missing_phone_names_language_and_phone():
    with pytest.raises(InventoryError, match=r"eng.*\[b\]"):
        build_signature_matrix(AllophoneMapping("eng", {"p": ("p", "b")}), UniversalPhoneInventory(("p",)))


def test_signature_matrix_validation():
    with pytest.raises(InventoryError):
        SignatureMatrix("x", [[0, 2]])
    with pytest.raises(InventoryError):
        SignatureMatrix("x", [[1, 0], [0, 0]])
    s = SignatureMatrix("x", [[1, 0]])
    with pytest.raises(ValueError):
        s.entries[0, 0] = 0


def test_signature_text_round_trip():
    s = SignatureMatrix("cmn", [[1, 0, 0], [0, 1, 1]])
    text = s.to_text()
    assert text == "cmn 2 3\n100\n011\n"
    assert SignatureMatrix.from_text(text) == s
    with pytest.raises(InventoryError):
        SignatureMatrix.from_text("cmn 2 3\n100\n")
    with pytest.raises(InventoryError):
        SignatureMatrix.from_text("cmn 1 3\n1x0\n")


symbols = st.sampled_from(["p", "t", "k", "a", "i", ASP, "ɾ", "s"])
mapping_st = st.dictionaries(symbols, st.lists(symbols, min_size=1, max_size=3), min_size=1, max_size=4)
languages = st.lists(mapping_st, min_size=1, max_size=4).map(
    lambda ms: [AllophoneMapping(f"l{n}", {q: tuple(ps) for q, ps in m.items()}) for n, m in enumerate(ms)]
)


@given(languages)
def test_union_idempotent(mappings):
    assert build_universal_inventory(mappings + mappings) == build_universal_inventory(mappings)
    invs = [m.inventory for m in mappings]
    assert build_shared_inventory(invs + invs) == build_shared_inventory(invs)


@given(languages, mapping_st)
def test_adding_language_never_shrinks(mappings, extra):
    extra = AllophoneMapping("new", {q: tuple(ps) for q, ps in extra.items()})
    before = build_universal_inventory(mappings).phones
    after = build_universal_inventory(mappings + [extra]).phones
    assert after[: len(before)] == before
    shared_before = build_shared_inventory([m.inventory for m in mappings]).phonemes
    shared_after = build_shared_inventory([m.inventory for m in mappings + [extra]]).phonemes
    assert set(shared_before) <= set(shared_after)


@given(languages)
def test_signature_row_sums_and_count(mappings):
    p_uni = build_universal_inventory(mappings)
    for m in mappings:
        s = build_signature_matrix(m, p_uni)
        assert (s.entries.sum(axis=1) >= 1).all()
        assert s.entries.sum() == sum(len(set(ps)) for ps in m.mapping.values())


def test_phone_coverage_examples():
    uni = UniversalPhoneInventory(("a", "b", "c"))
    assert phone_coverage(uni, {"a", "b", "c"}) == 1
    assert phone_coverage(uni, {"a", "b", "d"}) == Fraction(2, 3)
    assert phone_coverage(UniversalPhoneInventory(("a",)), {"b", "c"}) == 0
    with pytest.raises(InventoryError):
        phone_coverage(uni, set())


@given(st.sets(symbols, min_size=1), st.sets(symbols), st.sets(symbols))
def test_coverage_properties(p_i, p_uni, extra):
    cov = phone_coverage(list(p_uni), p_i)
    assert 0 <= cov <= 1
    assert phone_coverage(list(p_uni | extra), p_i) >= cov
    assert phone_coverage(list(p_i | p_uni), p_i) == 1
    if not (p_i & p_uni):
        assert cov == 0


def test_coverage_by_area_examples():
    uni = UniversalPhoneInventory(("a", "b"))
    db = [PhoibleRecord("x", "Asia", frozenset({"a", "c"})), PhoibleRecord("y", "Asia", frozenset({"a", "b"}))]
    row = coverage_by_area(db, uni)["Asia"]
    assert (row.count, row.mean, row.stddev) == (2, 0.75, 0.25)
    single = coverage_by_area([PhoibleRecord("z", "Europe", frozenset({"a"}))], uni)
    assert (single["Europe"].count, single["Europe"].mean, single["Europe"].stddev) == (1, 1.0, 0.0)
    assert list(single) == ["Europe", "All"]
    with pytest.raises(InventoryError):
        coverage_by_area([], uni)


@given(st.lists(st.tuples(st.sampled_from(["Africa", "Asia", "Pacific"]), st.sets(symbols, min_size=1)), min_size=1))
def test_coverage_by_area_matches_brute_force(rows):
    uni = UniversalPhoneInventory(("p", "t", "a"))
    db = [PhoibleRecord(f"l{n}", area, frozenset(ps)) for n, (area, ps) in enumerate(rows)]
    report = coverage_by_area(db, uni)
    groups = {}
    for area, ps in rows:
        groups.setdefault(area, []).append(len(ps & {"p", "t", "a"}) / len(ps))
    groups["All"] = [c for area, ps in rows for c in [len(ps & {"p", "t", "a"}) / len(ps)]]
    for area, covs in groups.items():
        mean = sum(covs) / len(covs)
        std = math.sqrt(sum((c - mean) ** 2 for c in covs) / len(covs))
        assert report[area].count == len(covs)
        assert report[area].mean == pytest.approx(mean, abs=1e-12)
        assert report[area].stddev == pytest.approx(std, abs=1e-12)


def test_load_allophone_mappings(tmp_path):
    f = tmp_path / "allo.tsv"
    f.write_text("# comment\neng\tp\tp\neng\tp\tpʰ\neng\tp\tp\n", encoding="utf-8")
    (m,) = load_allophone_mappings(f)
    assert m.language_id == "eng"
    assert m.mapping == {"p": ("p", normalize_symbol("pʰ"))}

    f.write_text("", encoding="utf-8")
    assert load_allophone_mappings(f) == []

    f.write_text("cmn\tp\tp\neng\tt\tt\ncmn\tpʰ\tpʰ\neng\tt\tɾ\n", encoding="utf-8")
    ms = load_allophone_mappings(f)
    assert [m.language_id for m in ms] == ["cmn", "eng"]
    assert list(ms[0].mapping) == ["p", normalize_symbol("pʰ")]
    assert ms[1].mapping == {"t": ("t", "ɾ")}


def test_load_allophone_mappings_reports_line(tmp_path):
    f = tmp_path / "allo.tsv"
    f.write_text("eng\tp\tp\neng\tp\n", encoding="utf-8")
    with pytest.raises(InventoryError, match=":2:"):
        load_allophone_mappings(f)


def test_allophone_mapping_file_round_trip(tmp_path):
    ms = [AllophoneMapping("eng", {"p": ("p", "pʰ"), "t": ("t",)}), AllophoneMapping("cmn", {"a": ("a",)})]
    write_allophone_mappings(ms, tmp_path / "a.tsv")
    assert load_allophone_mappings(tmp_path / "a.tsv") == ms


def test_load_phoible(tmp_path):
    f = tmp_path / "phoible.tsv"
    f.write_text("xyz\tAsia\tp t k\n", encoding="utf-8")
    (r,) = load_phoible(f)
    assert (r.language_code, r.area, len(r.inventory)) == ("xyz", "Asia", 3)

    f.write_text("xyz\tAsia\tp p t\n", encoding="utf-8")
    assert load_phoible(f)[0].inventory == {"p", "t"}

    f.write_text("a\tAfrica\tp t\nb\tAfrica\tp\nc\tMars\tk\n", encoding="utf-8")
    db = load_phoible(f)
    report = coverage_by_area(db, UniversalPhoneInventory(("p",)))
    assert report["Africa"].count == 2 and report["Africa"].mean == 0.75
    assert report["Mars"].mean == 0.0
    assert report["All"].count == 3


@pytest.mark.parametrize("row", ["xyz\tAsia\n", "xyz\tAsia\t \n", "\tAsia\tp\n"])
def test_load_phoible_malformed(tmp_path, row):
    f = tmp_path / "phoible.tsv"
    f.write_text("ok\tAsia\tp\n" + row, encoding="utf-8")
    with pytest.raises(InventoryError, match=":2:"):
        load_phoible(f)


def test_load_phone_list(tmp_path):
    f = tmp_path / "inv.txt"
    f.write_text("# inventory\np t\nk p\n", encoding="utf-8")
    assert load_phone_list(f) == ["p", "t", "k"]
