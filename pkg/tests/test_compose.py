import pytest
from conftest import (
    WALKTHROUGH_ANSWER,
    WALKTHROUGH_QUESTION,
    WALKTHROUGH_SCRIPT,
)

from kgrag.compose import (
    NO_RESULT_ANSWER,
    answer_prompt_parts,
    compose_answer,
    extract_cited_nodes,
)
from kgrag.llm import scripted_backend
from kgrag.traversal import ontology_based_retrieval


@pytest.fixture
def walkthrough_session(demo_graph):
    backend = scripted_backend(WALKTHROUGH_SCRIPT)
    return ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)


@pytest.fixture
def no_result_session(demo_graph):
    backend = scripted_backend(["[]", "[]"])
    return ontology_based_retrieval(demo_graph, "how is the weather?", backend)


class TestComposeAnswer:
    def test_walkthrough_answer_names_the_task(self, walkthrough_session):
        backend = scripted_backend([WALKTHROUGH_ANSWER])
        explanation = compose_answer(walkthrough_session, "none", backend)
        assert "ScrewPlacement" in explanation.answer
        assert "ScrewPlacement" in explanation.cited_node_ids
        assert "niryo_dataset_september_2024" in explanation.cited_node_ids

    def test_no_result_short_circuits_without_backend_calls(self, no_result_session):
        backend = scripted_backend([])
        explanation = compose_answer(no_result_session, "none", backend)
        assert explanation.answer == NO_RESULT_ANSWER
        assert explanation.cited_node_ids == ()
        assert backend.call_count == 0

    def test_stress_answer_recorded_as_given(self, demo_graph):
        backend = scripted_backend(
            ['["Task"]', '["ScrewPlacement", "ScrewPicking"]', "<STOP>"]
        )
        session = ontology_based_retrieval(demo_graph, "What task is easier?", backend)
        answer_backend = scripted_backend(
            [
                "Based on the ontology information provided, the task ScrewPicking "
                "appears to be easier compared to ScrewPlacement. There are no "
                "connected models or algorithms mentioned for ScrewPicking."
            ]
        )
        explanation = compose_answer(session, "none", answer_backend)
        assert "ScrewPicking" in explanation.answer
        assert "ScrewPicking" in explanation.cited_node_ids

    def test_unknown_role_rejected(self, walkthrough_session):
        with pytest.raises(ValueError):
            compose_answer(walkthrough_session, "manager", scripted_backend(["x"]))

    def test_cited_ids_always_within_node_dict(self, walkthrough_session):
        backend = scripted_backend(["mentions ghost_node and model_a23b"])
        explanation = compose_answer(walkthrough_session, "none", backend)
        assert set(explanation.cited_node_ids) <= set(walkthrough_session.node_dict)


class TestRolePrompts:
    def test_role_changes_only_the_style_segment(self, walkthrough_session):
        contexts = {}
        styles = {}
        for role in ("none", "worker", "developer"):
            context, style = answer_prompt_parts(walkthrough_session, role)
            contexts[role] = context
            styles[role] = style
        assert contexts["none"] == contexts["worker"] == contexts["developer"]
        assert len({styles["none"], styles["worker"], styles["developer"]}) == 3

    def test_context_contains_query_then_structures_in_retrieval_order(
        self, walkthrough_session
    ):
        context, _ = answer_prompt_parts(walkthrough_session, "none")
        assert context.startswith(f"User query: {WALKTHROUGH_QUESTION}")
        positions = [
            context.index(f"Node: {node_id}") for node_id in walkthrough_session.node_dict
        ]
        assert positions == sorted(positions)

    def test_final_prompt_is_context_plus_style(self, walkthrough_session):
        sent = []

        class Spy:
            def complete(self, messages):
                sent.append(messages[-1].content)
                return "ok"

        compose_answer(walkthrough_session, "worker", Spy())
        context, style = answer_prompt_parts(walkthrough_session, "worker")
        assert sent[0] == context + "\n\n" + style


class TestExtractCitedNodes:
    def test_walkthrough_answer_citations(self, walkthrough_session):
        cited = extract_cited_nodes(WALKTHROUGH_ANSWER, walkthrough_session.node_dict)
        assert "ScrewPlacement" in cited
        assert "niryo_dataset_september_2024" in cited

    def test_empty_answer_cites_nothing(self, walkthrough_session):
        assert extract_cited_nodes("", walkthrough_session.node_dict) == []

    def test_mentions_outside_node_dict_do_not_count(self, walkthrough_session):
        assert extract_cited_nodes("ScrewPicking only", walkthrough_session.node_dict) == []

    def test_order_follows_first_retrieval(self, walkthrough_session):
        answer = "ScrewPlacement came from niryo_dataset_september_2024 via model_a23b"
        cited = extract_cited_nodes(answer, walkthrough_session.node_dict)
        assert cited == ["niryo_dataset_september_2024", "model_a23b", "ScrewPlacement"]
