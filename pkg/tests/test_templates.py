"""Template rendering and grounding enumeration."""

import json

import pytest

from factlogic.errors import DataError, GroundingError
from factlogic.templates import (
    NOT_APPLICABLE,
    NewsSample,
    Predicate,
    QuestionTemplate,
    enumerate_groundings,
    intervention_template_path,
    load_default_templates,
    load_templates,
    render_question,
    save_templates,
)


@pytest.fixture(scope="module")
def templates():
    return load_default_templates()


def by_id(templates, template_id):
    return next(t for t in templates if t.id == template_id)


class TestRenderQuestion:
    def test_background_statement_template(self, templates):
        rendered = render_question(by_id(templates, 1), ["no evidence found.", "the earth is flat"])
        assert rendered == (
            "Background Information: no evidence found.. "
            "Statement: the earth is flat. Is the statement true?"
        )

    def test_single_slot_template(self, templates):
        rendered = render_question(by_id(templates, 3), ["some message"])
        assert rendered == "Message: some message. Did the message contain adequate background information?"

    def test_arity_mismatch_is_grounding_error(self, templates):
        with pytest.raises(GroundingError):
            render_question(by_id(templates, 1), [])

    def test_empty_slot_value_is_grounding_error(self, templates):
        with pytest.raises(GroundingError):
            render_question(by_id(templates, 3), [""])

    def test_rendered_question_contains_every_value(self, templates):
        grounding = ("ALPHA-EVIDENCE", "BETA-CLAIM")
        rendered = render_question(by_id(templates, 1), grounding)
        for value in grounding:
            assert value in rendered

    def test_injective_in_grounding(self, templates):
        # distinct groundings without placeholder markers render distinctly
        template = by_id(templates, 1)
        seen = set()
        values = ["one", "two", "three", "four"]
        for a in values:
            for b in values:
                seen.add(render_question(template, [a, b]))
        assert len(seen) == len(values) ** 2

    def test_zero_placeholder_template_rejected(self):
        with pytest.raises(DataError):
            QuestionTemplate(
                id=99,
                text="Is water wet?",
                slots=(),
                slot_sources=(),
                predicate=Predicate(id=99, arity=1, semantics="x"),
            )


class TestEnumerateGroundings:
    def test_two_claims_one_evidence(self, templates):
        sample = NewsSample(
            id="s", text="t", label="true", claims=("c1", "c2"), evidence=("e1",)
        )
        atoms = enumerate_groundings(sample, by_id(templates, 1))
        # oracle: product of candidate counts, 1 evidence x 2 claims
        assert len(atoms) == 1 * 2
        assert [a.grounding for a in atoms] == [("e1", "c1"), ("e1", "c2")]

    def test_three_evidence_two_claims(self, templates):
        sample = NewsSample(
            id="s", text="t", label="true",
            claims=("c1", "c2"), evidence=("e1", "e2", "e3"),
        )
        atoms = enumerate_groundings(sample, by_id(templates, 1))
        assert len(atoms) == 3 * 2

    def test_single_source_single_atom(self, templates):
        sample = NewsSample(id="s", text="some message", label="true")
        atoms = enumerate_groundings(sample, by_id(templates, 3))
        assert len(atoms) == 1
        assert atoms[0].grounding == ("some message",)

    def test_missing_source_binds_sentinel(self, templates):
        sample = NewsSample(id="s", text="t", label="true")  # no evidence, no claims
        atoms = enumerate_groundings(sample, by_id(templates, 1))
        assert len(atoms) == 1
        assert atoms[0].grounding == (NOT_APPLICABLE, NOT_APPLICABLE)

    def test_count_matches_candidate_product(self, templates):
        import numpy as np

        rng = np.random.default_rng(0)
        for _ in range(50):
            n_claims = int(rng.integers(0, 5))
            n_evidence = int(rng.integers(0, 4))
            sample = NewsSample(
                id="s", text="t", label="true",
                claims=tuple(f"c{i}" for i in range(n_claims)) or None,
                evidence=tuple(f"e{i}" for i in range(n_evidence)) or None,
            )
            expected = max(1, n_evidence) * max(1, n_claims)
            assert len(enumerate_groundings(sample, by_id(templates, 1))) == expected

    def test_deterministic(self, templates):
        sample = NewsSample(
            id="s", text="t", label="true", claims=("c1", "c2"), evidence=("e1", "e2")
        )
        first = enumerate_groundings(sample, by_id(templates, 1))
        second = enumerate_groundings(sample, by_id(templates, 1))
        assert first == second


class TestTemplateFile:
    def test_bundled_sets(self, templates):
        assert [t.id for t in templates] == [1, 2, 3, 4, 5, 6, 7, 8]
        by_id(templates, 1).predicate.max_groundings == 4
        extra = load_templates(intervention_template_path())
        assert [t.id for t in extra] == [9, 10, 11, 12, 13]

    def test_round_trip(self, tmp_path, templates):
        path = tmp_path / "templates.jsonl"
        save_templates(templates, path)
        assert load_templates(path) == templates

    def test_max_groundings_override(self, tmp_path, templates):
        path = tmp_path / "templates.jsonl"
        save_templates(templates, path)
        loaded = load_templates(path, max_groundings={1: 7})
        assert by_id(loaded, 1).predicate.max_groundings == 7

    def test_corrupt_record(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": 1, "text": "x"}\n', encoding="utf-8")
        with pytest.raises(DataError):
            load_templates(path)

    def test_duplicate_id_rejected(self, tmp_path, templates):
        record = json.dumps(
            {
                "id": 1,
                "text": "Message: {m}. Really?",
                "slots": ["m"],
                "slot_sources": ["news_text"],
                "semantics": "x",
                "max_groundings": 1,
            }
        )
        path = tmp_path / "dup.jsonl"
        path.write_text(record + "\n" + record + "\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_templates(path)
