from __future__ import annotations

import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skilltrack.domain import Authority
from skilltrack.registry import (
    DanglingReference,
    DuplicateId,
    ParseError,
    Registry,
    load_slots,
    registry_load,
    serialize,
)

from conftest import SMALL_DOC


def test_small_document_loads_fully():
    reg = registry_load(SMALL_DOC)
    assert len(reg.outcomes) == 3
    assert len(reg.procedures) == 2
    assert len(reg.items) == 5
    assert len(reg.staff) == 2
    assert len(reg.students) == 3
    assert len(reg.locations) == 2
    assert len(reg.questions) == 3
    assert len(reg.teaching) == 1
    assert reg.outcomes["oA"].authority is Authority.EXTERNAL
    assert reg.procedures["p1"].position_of("wb") == 1
    assert reg.questions["q3"].attempts == 10


def test_empty_document_gives_empty_registry():
    reg = registry_load("")
    assert reg == Registry()


def test_dangling_item_reference_rejected():
    doc = """\
items:
  - {id: wa, label: x}
procedures:
  - {id: p1, label: y, workflow: [wa, missing]}
"""
    with pytest.raises(DanglingReference):
        registry_load(doc)


def test_dangling_outcome_on_question_rejected():
    doc = """\
questions:
  - {id: q1, text: t, outcome_ids: [nowhere]}
"""
    with pytest.raises(DanglingReference):
        registry_load(doc)


def test_duplicate_id_rejected():
    doc = """\
outcomes:
  - {id: oA, label: one}
  - {id: oA, label: two}
"""
    with pytest.raises(DuplicateId):
        registry_load(doc)


def test_non_yaml_rejected():
    with pytest.raises(ParseError):
        registry_load("outcomes: [:::")


def test_non_mapping_root_rejected():
    with pytest.raises(ParseError):
        registry_load("- just\n- a list\n")


def test_round_trip_small_document():
    reg = registry_load(SMALL_DOC)
    assert registry_load(serialize(reg)) == reg


def test_slots_section_loads_and_slots_only_loader():
    doc = SMALL_DOC + """\
slots:
  - {slot_id: sl1, procedure_id: p1, date: 2025-05-01, capacity: 2}
"""
    reg = registry_load(doc)
    assert reg.slots[0].capacity == 2
    specs = load_slots("slots:\n  - {slot_id: s9, procedure_id: px, capacity: 1}\n")
    assert specs[0].procedure_id == "px"  # reference check deferred to caller


def test_slot_with_unknown_procedure_rejected_in_full_document():
    doc = "slots:\n  - {slot_id: s1, procedure_id: ghost}\n"
    with pytest.raises(DanglingReference):
        registry_load(doc)


# -- generated round-trip property -------------------------------------------

_ident = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=12
)
# Entity text fields reject control/separator characters by contract.
_label = st.text(
    alphabet=st.characters(blacklist_categories=("Cc", "Zl", "Zp", "Cs")),
    max_size=20,
)


@st.composite
def registries(draw):
    outcome_ids = draw(
        st.lists(_ident.map(lambda s: "o-" + s), min_size=1, max_size=6, unique=True)
    )
    item_ids = draw(
        st.lists(_ident.map(lambda s: "w-" + s), min_size=1, max_size=8, unique=True)
    )
    sections = {
        "outcomes": [
            {
                "id": oid,
                "label": draw(_label),
                "authority": draw(
                    st.sampled_from(["internal", "external-stakeholder"])
                ),
            }
            for oid in outcome_ids
        ],
        "items": [
            {
                "id": iid,
                "label": draw(_label),
                "outcome_ids": sorted(
                    draw(st.sets(st.sampled_from(outcome_ids), max_size=3))
                ),
            }
            for iid in item_ids
        ],
    }
    n_procs = draw(st.integers(min_value=0, max_value=3))
    procs = []
    for k in range(n_procs):
        workflow = draw(
            st.lists(st.sampled_from(item_ids), min_size=1, max_size=4, unique=True)
        )
        procs.append({"id": f"p-{k}", "label": "", "workflow": workflow})
    if procs:
        sections["procedures"] = procs
        sections["locations"] = [
            {
                "id": "loc-0",
                "name": "",
                "available_procedures": [p["id"] for p in procs],
            }
        ]
    sections["staff"] = [{"id": "st-0", "name": draw(_label)}]
    sections["students"] = [
        {
            "id": "stu-0",
            "cohort": "c",
            "enrollment_date": draw(
                st.dates(
                    min_value=dt.date(2000, 1, 1), max_value=dt.date(2030, 1, 1)
                )
            ).isoformat(),
        }
    ]
    sections["questions"] = [
        {
            "id": "q-0",
            "text": draw(_label),
            "outcome_ids": [outcome_ids[0]],
            "attempts": draw(st.integers(min_value=0, max_value=50)),
        }
    ]
    sections["questions"][0]["correct"] = draw(
        st.integers(min_value=0, max_value=sections["questions"][0]["attempts"])
    )
    import yaml

    return yaml.safe_dump(sections, sort_keys=False)


@given(doc=registries())
@settings(max_examples=60, deadline=None)
def test_round_trip_generated_registries(doc):
    reg = registry_load(doc)
    assert registry_load(serialize(reg)) == reg
