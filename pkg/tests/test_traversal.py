import pytest
from conftest import (
    WALKTHROUGH_NODE_IDS,
    WALKTHROUGH_QUESTION,
    WALKTHROUGH_SCRIPT,
)

from kgrag.kg import ClassDef, Edge, Instance, assemble_graph, class_schema_summary
from kgrag.llm import ChatMessage, ScriptExhaustedError, scripted_backend
from kgrag.prompts import NO_INSTANCE_FOUND, STOP_TOKEN
from kgrag.traversal import (
    LlmQuery,
    LlmQueryParseError,
    StopReason,
    TraversalBackendError,
    TraversalConfig,
    identify_classes,
    identify_start_nodes,
    ontology_based_retrieval,
    parse_llm_json,
    parse_id_list,
    render_trace,
)


def chain_graph(length):
    """n0 -> n1 -> ... -> n_{length-1}, all of one class."""
    classes = [ClassDef("Thing")]
    instances = [Instance(f"n{i}", types=("Thing",)) for i in range(length)]
    edges = [Edge(f"n{i}", "next", f"n{i+1}") for i in range(length - 1)]
    return assemble_graph(classes, instances, edges)


class TestParseLlmJson:
    def test_stop_token_anywhere_parses_as_stop(self):
        assert parse_llm_json("<STOP>").kind == "stop"
        assert parse_llm_json("I am done now <STOP> thanks").kind == "stop"

    def test_bare_list_is_node_request(self):
        query = parse_llm_json('["model_a23b", "model_xT77"]')
        assert query.kind == "node_request"
        assert query.ids == ("model_a23b", "model_xT77")

    def test_fenced_block_with_leading_prose(self):
        text = 'Sure, here are the nodes I need next.\n```json\n["ScrewPlacement"]\n```'
        query = parse_llm_json(text)
        assert query.kind == "node_request"
        assert query.ids == ("ScrewPlacement",)

    def test_instances_of_object(self):
        query = parse_llm_json('{"instances_of": "Model"}')
        assert query.kind == "class_instances_request"
        assert query.class_id == "Model"

    def test_duplicates_deduplicated_preserving_first_occurrence(self):
        query = parse_llm_json('["b", "a", "b", "a"]')
        assert query.ids == ("b", "a")

    def test_ids_normalized(self):
        query = parse_llm_json('["  spaced   id  "]')
        assert query.ids == ("spaced id",)

    def test_numbers_are_coerced_to_id_strings(self):
        query = parse_llm_json("[1, 2]")
        assert query.ids == ("1", "2")

    def test_empty_list_is_malformed(self):
        with pytest.raises(LlmQueryParseError):
            parse_llm_json("[]")

    def test_prose_without_json_is_malformed(self):
        with pytest.raises(LlmQueryParseError):
            parse_llm_json("I cannot answer that.")

    def test_unknown_object_shape_is_malformed(self):
        with pytest.raises(LlmQueryParseError):
            parse_llm_json('{"fetch": "x"}')

    def test_prose_with_brackets_before_json(self):
        query = parse_llm_json('Considering [several] options: ["n1"]')
        assert query.ids == ("n1",)


class TestParseIdList:
    def test_empty_list_is_legal(self):
        assert parse_id_list("[]") == []

    def test_prose_is_none(self):
        assert parse_id_list("no idea") is None

    def test_stop_is_none(self):
        assert parse_id_list("<STOP>") is None


class TestIdentifyClasses:
    def test_valid_class_list(self, demo_graph):
        backend = scripted_backend(['["Dataset"]'])
        classes, history = identify_classes(WALKTHROUGH_QUESTION, demo_graph, backend)
        assert classes == ["Dataset"]
        assert [m.role for m in history] == ["system", "user", "assistant"]

    def test_both_attempts_empty_is_no_result(self, demo_graph):
        backend = scripted_backend(["[]", "[]"])
        classes, history = identify_classes("anything", demo_graph, backend)
        assert classes == []
        assert backend.call_count == 2
        assert len(history) == 5

    def test_unknown_class_dropped_with_warning(self, demo_graph, caplog):
        backend = scripted_backend(['["Dataset", "Unicorn"]'])
        with caplog.at_level("WARNING"):
            classes, _ = identify_classes("q", demo_graph, backend)
        assert classes == ["Dataset"]
        assert any("Unicorn" in rec.getMessage() for rec in caplog.records)

    def test_fallback_rescues_empty_first_attempt(self, demo_graph):
        backend = scripted_backend(["[]", '["Task"]'])
        classes, _ = identify_classes("q", demo_graph, backend)
        assert classes == ["Task"]
        assert backend.call_count == 2


class TestIdentifyStartNodes:
    def test_single_valid_instance(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', '["niryo_dataset_september_2024"]'])
        classes, history = identify_classes(WALKTHROUGH_QUESTION, demo_graph, backend)
        start = identify_start_nodes(classes, WALKTHROUGH_QUESTION, demo_graph, backend, history)
        assert start == ["niryo_dataset_september_2024"]
        assert len(history) == 5

    def test_empty_reply_is_legal(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', "[]"])
        classes, history = identify_classes("q", demo_graph, backend)
        start = identify_start_nodes(classes, "q", demo_graph, backend, history)
        assert start == []

    def test_unknown_instance_dropped(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', '["niryo_dataset_september_2024", "ghost"]'])
        classes, history = identify_classes("q", demo_graph, backend)
        start = identify_start_nodes(classes, "q", demo_graph, backend, history)
        assert start == ["niryo_dataset_september_2024"]

    def test_class_id_is_not_a_start_instance(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', '["Dataset"]'])
        classes, history = identify_classes("q", demo_graph, backend)
        start = identify_start_nodes(classes, "q", demo_graph, backend, history)
        assert start == []


class TestOntologyBasedRetrieval:
    def test_demo_walkthrough_replay(self, demo_graph):
        backend = scripted_backend(WALKTHROUGH_SCRIPT)
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        assert session.stop_reason is StopReason.LLM_STOP
        assert set(session.node_dict) == WALKTHROUGH_NODE_IDS
        assert session.iteration == 2
        assert backend.call_count == 5

    def test_immediate_stop_keeps_start_nodes_only(self, demo_graph):
        backend = scripted_backend(
            ['["Dataset"]', '["niryo_dataset_september_2024"]', "<STOP>"]
        )
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        assert session.stop_reason is StopReason.LLM_STOP
        assert set(session.node_dict) == {"niryo_dataset_september_2024"}
        assert session.iteration == 0

    def test_rerequesting_seen_nodes_stops_after_first_repeat(self, demo_graph):
        repeat = '["niryo_dataset_september_2024"]'
        backend = scripted_backend(['["Dataset"]', repeat, repeat, repeat, repeat])
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        assert session.stop_reason is StopReason.NO_NEW_INFO
        assert set(session.node_dict) == {"niryo_dataset_september_2024"}
        # step1 + step2 + feedback after start render + feedback after repeat turn
        assert backend.call_count == 4

    def test_no_result_when_no_classes_found(self, demo_graph):
        backend = scripted_backend(["[]", "[]"])
        session = ontology_based_retrieval(demo_graph, "how is the weather?", backend)
        assert session.stop_reason is StopReason.NO_RESULT
        assert session.node_dict == {}
        assert session.trace == []
        assert backend.call_count == 2

    def test_iteration_cap_fires_on_endless_fresh_requests(self):
        graph = chain_graph(30)
        script = ['["Thing"]', '["n0"]'] + [f'["n{i}"]' for i in range(1, 29)]
        backend = scripted_backend(script)
        config = TraversalConfig(iteration_cap=1)
        session = ontology_based_retrieval(graph, "walk the chain", backend, config)
        assert session.stop_reason is StopReason.ITERATION_CAP
        assert session.iteration == 1
        assert set(session.node_dict) == {"n0", "n1"}

    def test_empty_start_falls_back_to_instances_of_query(self, demo_graph):
        backend = scripted_backend(
            ['["Model"]', '{"instances_of": "Model"}', "<STOP>"]
        )
        session = ontology_based_retrieval(demo_graph, "which models exist?", backend)
        assert session.stop_reason is StopReason.LLM_STOP
        assert set(session.node_dict) == {
            "model_a23b", "model_xT77", "model_p1b3", "model_qdk1",
        }

    def test_unresolvable_start_sends_no_instance_found(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', '["ghost"]', "<STOP>"])
        session = ontology_based_retrieval(demo_graph, "q", backend)
        assert session.stop_reason is StopReason.LLM_STOP
        assert session.node_dict == {}
        feedback = [m for m in session.history if m.role == "user"][-1]
        assert NO_INSTANCE_FOUND in feedback.content

    def test_malformed_loop_reply_terminates_via_no_new_info(self, demo_graph):
        backend = scripted_backend(
            ['["Dataset"]', '["niryo_dataset_september_2024"]',
             "I would rather chat about the weather.", "still prose", "more prose"]
        )
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        assert session.stop_reason is StopReason.NO_NEW_INFO
        assert set(session.node_dict) == {"niryo_dataset_september_2024"}

    def test_hallucinated_ids_never_reach_node_dict(self, demo_graph):
        backend = scripted_backend(
            ['["Dataset"]', '["niryo_dataset_september_2024"]',
             '["ghost_1", "model_a23b", "ghost_2"]', "<STOP>"]
        )
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        assert set(session.node_dict) <= demo_graph.node_ids

    def test_backend_failure_surfaces_partial_session(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', '["niryo_dataset_september_2024"]'])
        with pytest.raises(TraversalBackendError) as excinfo:
            ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        session = excinfo.value.session
        assert session.stop_reason is None
        assert session.start_ids == ["niryo_dataset_september_2024"]
        assert isinstance(excinfo.value.cause, ScriptExhaustedError)

    def test_retrieved_ids_superset_of_node_dict(self, demo_graph):
        backend = scripted_backend(WALKTHROUGH_SCRIPT)
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        assert set(session.node_dict) <= session.retrieved_ids

    def test_config_requires_positive_cap(self):
        with pytest.raises(ValueError):
            TraversalConfig(iteration_cap=0)


class TestPromptFidelity:
    def test_step1_messages_byte_match_templates(self, demo_graph):
        backend = scripted_backend(['["Dataset"]'])
        _, history = identify_classes(WALKTHROUGH_QUESTION, demo_graph, backend)
        expected_system = (
            "The following structure illustrates the class level of the ontology, "
            "which will be used to answer the subsequent questions. The node "
            "classes have instances that are not listed here: "
            + class_schema_summary(demo_graph)
            + "."
        )
        expected_user = (
            "Only give as an answer a list of classes (following this syntax: "
            "[class1, class2, ...]) which are relevant for this user query "
            + WALKTHROUGH_QUESTION
            + " Return only JSON syntax without prefix."
        )
        assert history.messages[0] == ChatMessage("system", expected_system)
        assert history.messages[1] == ChatMessage("user", expected_user)

    def test_feedback_carries_stop_instruction_and_result_prefix(self, demo_graph):
        backend = scripted_backend(WALKTHROUGH_SCRIPT)
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        feedback_messages = [m.content for m in session.history if m.role == "user"][2:]
        for content in feedback_messages:
            assert "Result to your query: " in content
            assert STOP_TOKEN in content
            assert content.rstrip().endswith(
                "If you need more information, use another query, "
                "otherwise write <STOP>. Return JSON without prefix."
            )

    def test_feedback_on_empty_resolution_contains_no_instance_found(self, demo_graph):
        backend = scripted_backend(['["Dataset"]', '["ghost"]', "<STOP>"])
        session = ontology_based_retrieval(demo_graph, "q", backend)
        last_user = [m for m in session.history if m.role == "user"][-1]
        assert NO_INSTANCE_FOUND in last_user.content
        assert STOP_TOKEN in last_user.content


class TestRenderTrace:
    def test_walkthrough_trace_lists_expansions(self, demo_graph):
        backend = scripted_backend(WALKTHROUGH_SCRIPT)
        session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
        trace = render_trace(session)
        assert "iteration 1: requested=[model_a23b, model_xT77, model_p1b3, model_qdk1]" in trace
        assert "iteration 2: requested=[ScrewPlacement]" in trace
        assert "stop_reason: llm_stop (2 expansion iterations)" in trace

    def test_no_result_trace_contains_marker(self, demo_graph):
        backend = scripted_backend(["[]", "[]"])
        session = ontology_based_retrieval(demo_graph, "weather?", backend)
        assert "no_result" in render_trace(session)

    def test_capped_trace_ends_with_cap_marker(self):
        graph = chain_graph(10)
        script = ['["Thing"]', '["n0"]'] + [f'["n{i}"]' for i in range(1, 9)]
        backend = scripted_backend(script)
        session = ontology_based_retrieval(
            graph, "walk", backend, TraversalConfig(iteration_cap=1)
        )
        trace = render_trace(session)
        assert trace.rstrip().endswith("stop_reason: iteration_cap (1 expansion iterations)")

    def test_runs_are_reproducible_byte_for_byte(self, demo_graph):
        def run():
            backend = scripted_backend(WALKTHROUGH_SCRIPT)
            session = ontology_based_retrieval(demo_graph, WALKTHROUGH_QUESTION, backend)
            return render_trace(session), [m.content for m in session.history]

        assert run() == run()


def test_llm_query_invariants():
    with pytest.raises(ValueError):
        LlmQuery(kind="stop", ids=("x",))
    with pytest.raises(ValueError):
        LlmQuery(kind="node_request", ids=())
    with pytest.raises(ValueError):
        LlmQuery(kind="class_instances_request")
