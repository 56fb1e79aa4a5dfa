import threading
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairiqa.errors import ConfigurationError, ConflictError, InputError, RegistryLookupError
from pairiqa.prompts import (ADJECTIVE_PRESETS, TEMPLATES, PromptRegistry, get_pair, get_template, make_pair,
                             preset_pair, render)

GOLDEN = Path(__file__).parent / "golden" / "prompt_pairs.tsv"


def golden_rows():
    lines = GOLDEN.read_bytes().decode("utf-8").splitlines()
    return [tuple(line.split("\t")) for line in lines if not line.startswith("#")]


def test_golden_pairs_byte_match():
    reg = PromptRegistry.default()
    rows = golden_rows()
    assert len(rows) == 16
    for label, pos, neg in rows:
        p = reg.get_pair(label)
        assert p.positive_text.encode() == pos.encode()
        assert p.negative_text.encode() == neg.encode()
        assert p.template_id == "T1"
    # and nothing shipped beyond the golden rows
    assert len(reg) == len(rows)


def test_templates_exact():
    assert TEMPLATES == {"T1": "[text] photo.", "T2": "A photo of [text].", "T3": "There is [text] in the photo."}
    with pytest.raises(ConfigurationError):
        get_template("T4")


def test_render_examples():
    assert render("T1", "Good") == "Good photo."
    assert render(get_template("T2"), "Good") == "A photo of Good."
    assert render("T1", "High contrast") == "High contrast photo."
    assert render("T1", "Happy") == "Happy photo."
    assert render("T3", "Good") == "There is Good in the photo."
    with pytest.raises(InputError):
        render("T1", "")


def test_get_pair_examples():
    assert get_pair("noisiness").texts == ("Clean photo.", "Noisy photo.")
    assert get_pair("happy").texts == ("Happy photo.", "Sad photo.")
    assert get_pair("quality").texts == ("Good photo.", "Bad photo.")
    with pytest.raises(RegistryLookupError) as err:
        get_pair("vibes")
    assert "quality" in str(err.value) and "relaxing" in str(err.value)


def test_template_override():
    reg = PromptRegistry.default()
    assert reg.get_pair("quality", "T2").texts == ("A photo of Good.", "A photo of Bad.")


def test_presets():
    assert ADJECTIVE_PRESETS == {"a": ("Good", "Bad"), "b": ("High quality", "Low quality"),
                                 "c": ("High definition", "Low definition")}
    assert preset_pair("b").texts == ("High quality photo.", "Low quality photo.")
    assert preset_pair("c", "T3").texts == ("There is High definition in the photo.",
                                            "There is Low definition in the photo.")


def test_register_persist_and_conflict(tmp_path):
    reg = PromptRegistry.default()
    path = tmp_path / "prompts.txt"
    reg.register_pair("vividness", "Vivid", "Flat", "T1", persist_to=path)
    assert reg.get_pair("vividness").texts == ("Vivid photo.", "Flat photo.")
    with pytest.raises(ConflictError):
        reg.register_pair("vividness", "Lively", "Flat")
    reg.register_pair("vividness", "Lively", "Flat", overwrite=True)
    assert reg.get_pair("vividness").positive_text == "Lively photo."
    reloaded = PromptRegistry.load(path)
    assert reloaded.get_pair("vividness").texts == ("Vivid photo.", "Flat photo.")


def test_identical_texts_rejected():
    with pytest.raises(ConfigurationError):
        make_pair("x", "Same", "Same")


def test_shipped_round_trip():
    reg = PromptRegistry.default()
    assert PromptRegistry.loads(reg.dumps()) == reg


words = st.text(st.characters(whitelist_categories=("Lu", "Ll"), whitelist_characters=" "), min_size=1,
                max_size=12).map(str.strip).filter(bool)


@given(st.dictionaries(st.from_regex(r"[a-z][a-z_]{0,10}", fullmatch=True),
                       st.tuples(words, words, st.sampled_from(sorted(TEMPLATES))).filter(lambda t: t[0] != t[1]),
                       max_size=8))
def test_serialization_lossless(entries):
    reg = PromptRegistry(entries)
    assert PromptRegistry.loads(reg.dumps()) == reg


def test_malformed_registry_file():
    with pytest.raises(ConfigurationError):
        PromptRegistry.loads("quality = Good\n")
    with pytest.raises(ConfigurationError):
        PromptRegistry.loads("quality = Good | Bad | T9\n")


def test_concurrent_registration_single_winner():
    reg = PromptRegistry.default()
    outcomes = []

    def worker(i):
        try:
            reg.register_pair("race", f"Pos{i}", "Neg")
            outcomes.append("ok")
        except ConflictError:
            outcomes.append("conflict")

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert outcomes.count("ok") == 1 and outcomes.count("conflict") == 7
