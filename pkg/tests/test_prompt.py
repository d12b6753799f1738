from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nearshot.errors import (
    MissingImageError,
    PromptBudgetExceededError,
    UnknownLabelError,
    ZeroShotsError,
)
from nearshot.prompt import (
    ImageSlot,
    TemplateKind,
    TextSegment,
    assemble_prompt,
    parse_answer,
    render_question,
)
from nearshot.selection import PromptOrder, ScoredCandidate
from nearshot.types import Candidate, LabFeature, Outcome, QuerySample

from .conftest import emb, make_record, sample

QTC = LabFeature(label="QTc", value=0.52, unit="sec")
MINUTE_VOLUME = LabFeature(label="Minute Volume", value=9.0, unit="L/min")


def shots_from(records):
    scored = [
        ScoredCandidate(Candidate(r), sample(text=emb(1, 0)), float(i) / 10, i)
        for i, r in enumerate(records)
    ]
    return PromptOrder(shots=tuple(scored))


def test_question_with_ehr_is_byte_exact():
    question = render_question("Cardiomegaly", [QTC], TemplateKind.IMAGE_EHR_TEXT)
    assert question == ("Question: Is the patient likely to have Cardiomegaly, "
                        "given the following laboratory test results: 0.52 sec QTc?")


def test_question_without_ehr_is_byte_exact():
    assert render_question("Cardiomegaly", [], TemplateKind.IMAGE_TEXT) == \
        "Question: Is the patient likely to have Cardiomegaly?"
    # Image-only templates drop features even when present.
    assert render_question("Cardiomegaly", [QTC], TemplateKind.IMAGE_TEXT) == \
        "Question: Is the patient likely to have Cardiomegaly?"


def test_question_two_features_joined_by_comma():
    question = render_question("Cardiomegaly", [QTC, MINUTE_VOLUME],
                               TemplateKind.EHR_TEXT)
    assert question.endswith("0.52 sec QTc, 9 L/min Minute Volume?")


def test_question_empty_features_falls_back_to_plain_wording():
    assert render_question("Edema", [], TemplateKind.IMAGE_EHR_TEXT) == \
        "Question: Is the patient likely to have Edema?"


def test_question_unknown_label_rejected():
    with pytest.raises(UnknownLabelError):
        render_question("Migraine", [], TemplateKind.EHR_TEXT)


def _query(label=0):
    return QuerySample(make_record(record_id="q:Cardiomegaly", label=label,
                                   image_ref="query.png", features=(QTC,)))


def test_assemble_interleaves_shots_then_query():
    records = [
        make_record(record_id="a:Cardiomegaly", label=0, image_ref="a.png"),
        make_record(record_id="b:Cardiomegaly", label=1, image_ref="b.png",
                    features=(MINUTE_VOLUME,)),
    ]
    seq = assemble_prompt(shots_from(records), _query(), "query.png",
                          TemplateKind.IMAGE_EHR_TEXT)
    assert seq.shot_count == 2
    assert len(seq.image_refs) == 3  # one per shot plus the query
    assert seq.image_refs == ["a.png", "b.png", "query.png"]
    texts = seq.texts
    assert len(texts) == 5  # 2 questions + 2 answers + query question
    assert texts[1] == "no" and texts[3] == "yes"
    assert texts[-1].startswith("Question: Is the patient likely to have Cardiomegaly,")
    # answer of the most similar shot sits directly before the query block
    assert texts[-2] == "yes"
    assert isinstance(seq.segments[-1], TextSegment)
    assert isinstance(seq.segments[-2], ImageSlot)


def test_assemble_ehr_text_has_no_image_slots():
    records = [make_record(record_id="a:Cardiomegaly", label=1)]
    seq = assemble_prompt(shots_from(records), _query(), None, TemplateKind.EHR_TEXT)
    assert seq.image_refs == []
    assert seq.shot_count == 1


def test_assemble_zero_shots_rejected():
    # The order type itself refuses to be empty...
    with pytest.raises(ZeroShotsError):
        PromptOrder(shots=())
    # ...and assembly independently rejects an empty order smuggled past it.
    order = shots_from([make_record(record_id="a:Cardiomegaly")])
    object.__setattr__(order, "shots", ())
    with pytest.raises(ZeroShotsError):
        assemble_prompt(order, _query(), "q.png", TemplateKind.IMAGE_TEXT)


def test_assemble_missing_image_rejected_for_image_templates():
    records = [make_record(record_id="a:Cardiomegaly", image_ref="")]
    with pytest.raises(MissingImageError):
        assemble_prompt(shots_from(records), _query(), "q.png", TemplateKind.IMAGE_TEXT)
    records = [make_record(record_id="a:Cardiomegaly", image_ref="a.png")]
    with pytest.raises(MissingImageError):
        assemble_prompt(shots_from(records), _query(), None, TemplateKind.IMAGE_TEXT)


def test_assemble_respects_char_budget():
    records = [make_record(record_id="a:Cardiomegaly")]
    with pytest.raises(PromptBudgetExceededError):
        assemble_prompt(shots_from(records), _query(), "q.png",
                        TemplateKind.IMAGE_TEXT, max_chars=10)


def test_assemble_is_blind_to_query_label():
    records = [make_record(record_id="a:Cardiomegaly", label=1, image_ref="a.png")]
    seq_neg = assemble_prompt(shots_from(records), _query(label=0), "q.png",
                              TemplateKind.IMAGE_EHR_TEXT)
    seq_pos = assemble_prompt(shots_from(records), _query(label=1), "q.png",
                              TemplateKind.IMAGE_EHR_TEXT)
    assert seq_neg == seq_pos


@pytest.mark.parametrize("generation,expected", [
    ("Yes, the findings suggest Cardiomegaly.", Outcome.POSITIVE),
    ("no", Outcome.NEGATIVE),
    ("No.", Outcome.NEGATIVE),
    ("YES", Outcome.POSITIVE),
    ("The image quality is insufficient.", Outcome.UNPARSEABLE),
    ("yes and no", Outcome.UNPARSEABLE),
    ("not normal", Outcome.UNPARSEABLE),  # "no" must stand alone
    ("maybe. yes", Outcome.UNPARSEABLE),  # only the first sentence is scanned
    ("yes\nbut actually no", Outcome.POSITIVE),  # only the first line
    ("", Outcome.UNPARSEABLE),
])
def test_parse_answer_rule_table(generation, expected):
    prediction = parse_answer(generation)
    assert prediction.outcome is expected
    assert prediction.raw_text == generation


@given(st.text(max_size=200))
def test_parse_answer_total_and_retains_raw_text(text):
    prediction = parse_answer(text)
    assert prediction.outcome in (Outcome.POSITIVE, Outcome.NEGATIVE,
                                  Outcome.UNPARSEABLE)
    assert prediction.raw_text == text
