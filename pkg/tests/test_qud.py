import pytest

from eventqa.ingest import generate_questions
from eventqa.plan_dsl import parse_plan, serialize_plan, validate_plan
from eventqa.qud import (DepthExceeded, LlmClientConfig, MockTranscriptClient, PlanningFailed,
                         llm_decompose_step, llm_plan, plan_question, template_plan)

FIG1_TEXT = """
(APPLY
  (JOIN
    (EXTRACT (RETRIEVE "instances of eating italian food") [date, start_time])
    (EXTRACT (RETRIEVE "workout events") [date, end_time])
    (and (same_day left.date right.date) (gt left.start_time right.end_time)))
  len)
"""

# one operator per reply, breadth-first over pending placeholders
Q3_TRANSCRIPT = (
    '(APPLY (SUB "instances of eating italian food after a workout") len)',
    '(JOIN (SUB "instances of eating italian food") (SUB "workout events") '
    '(and (same_day left.date right.date) (gt left.start_time right.end_time)))',
    '(EXTRACT (SUB "instances of eating italian food") [date, start_time])',
    '(EXTRACT (SUB "workout events") [date, end_time])',
    '(RETRIEVE "instances of eating italian food")',
    '(RETRIEVE "workout events")',
)


def _strip_annotations(node):
    from dataclasses import replace
    return replace(node, sub_question=None,
                   children=tuple(_strip_annotations(c) for c in node.children))


def test_template_plan_fig1_shape():
    tree = template_plan("How often did I eat Italian food after a workout?")
    assert tree is not None
    assert tree.op == "APPLY" and tree.fn == "len"
    join = tree.children[0]
    assert join.op == "JOIN"
    assert all(c.op == "EXTRACT" and c.children[0].op == "RETRIEVE" for c in join.children)


def test_template_plan_superlative_shape():
    tree = template_plan("The month I listened to Taylor Swift the most?")
    chain = []
    node = tree
    while True:
        chain.append(node.op)
        if not node.children:
            break
        node = node.children[0]
    assert chain == ["ARGMAX", "MAP", "GROUP_BY", "EXTRACT", "RETRIEVE"]


def test_template_plan_no_match():
    assert template_plan("What is the meaning of life?") is None


def test_template_plan_deterministic():
    q = "How many yoga workouts did I do?"
    assert template_plan(q) == template_plan(q)


def test_template_plan_equals_gold_plans(gen_data):
    cases = generate_questions(gen_data.store, gen_data.profile, seed=31, n=40)
    for case in cases:
        planned = template_plan(case.question)
        assert planned == case.plan, case.question


def test_planner_output_validates_and_round_trips(gen_data):
    cases = generate_questions(gen_data.store, gen_data.profile, seed=32, n=25)
    for case in cases:
        tree = template_plan(case.question)
        assert parse_plan(serialize_plan(tree)) == tree
        assert not [d for d in validate_plan(tree) if d.severity == "error"]


def test_llm_plan_reproduces_fig1_tree():
    client = MockTranscriptClient(Q3_TRANSCRIPT)
    tree = llm_plan("How often did I eat Italian food after a workout?", client)
    assert _strip_annotations(tree) == parse_plan(FIG1_TEXT)
    assert len(client.calls) == len(Q3_TRANSCRIPT)


def test_llm_plan_attaches_sub_questions():
    client = MockTranscriptClient(Q3_TRANSCRIPT)
    tree = llm_plan("How often did I eat Italian food after a workout?", client)
    assert tree.sub_question == "How often did I eat Italian food after a workout?"
    join = tree.children[0]
    assert join.sub_question == "instances of eating italian food after a workout"


def test_llm_terminal_question_single_retrieve():
    client = MockTranscriptClient(('(RETRIEVE "workout events")',))
    tree = llm_plan("workout events", client)
    assert tree.op == "RETRIEVE" and tree.query == "workout events"
    assert len(client.calls) == 1


def test_llm_retry_then_planning_failed():
    client = MockTranscriptClient(("this is not a plan",))
    with pytest.raises(PlanningFailed):
        llm_plan("anything", client, LlmClientConfig(endpoint="", model="", max_retries=3))
    assert len(client.calls) == 4  # one attempt plus three retries


def test_llm_retry_recovers_after_diagnostic():
    client = MockTranscriptClient(("garbage (", '(RETRIEVE "workout events")'))
    step = llm_decompose_step("workout events", "(SUB \"workout events\")", client, max_retries=3)
    assert step.node.query == "workout events"
    assert len(client.calls) == 2
    assert "invalid" in client.calls[1][-1]["content"]


def test_llm_rejects_nested_emissions():
    nested = '(APPLY (EXTRACT (SUB "x") [date]) len)'
    client = MockTranscriptClient((nested,))
    with pytest.raises(PlanningFailed):
        llm_plan("q", client, LlmClientConfig(endpoint="", model="", max_retries=1))


def test_llm_depth_bound():
    # every step answers with another APPLY around a new placeholder
    client = MockTranscriptClient(('(APPLY (SUB "deeper") len)',) * 30)
    with pytest.raises(DepthExceeded):
        llm_plan("q", client, max_depth=8)


def test_plan_question_order_and_fallbacks():
    catalog_q = "How many yoga workouts did I do?"
    assert plan_question(catalog_q, "template").op == "APPLY"
    client = MockTranscriptClient(('(RETRIEVE "whatever")',))
    tree = plan_question("something off-catalog", "auto", client,
                         LlmClientConfig(endpoint="", model=""))
    assert tree.op == "RETRIEVE"
    assert client.calls  # template missed, llm used
    with pytest.raises(PlanningFailed):
        plan_question("something off-catalog", "template")
    with pytest.raises(PlanningFailed):
        plan_question("something off-catalog", "auto", None)
    with pytest.raises(ValueError):
        plan_question("x", "alchemy")
