import random

import pytest

from eventqa.engine import Answer
from eventqa.evalkit import (AlignmentError, EvalReport, MetricsConfig, SystemOutput,
                             evaluate_run, hit_at_1, normalize_answer, rlx_hit_at_1)
from eventqa.ingest import GoldCase
from eventqa.plan_dsl import OperatorNode


def test_normalize_examples():
    assert normalize_answer(" 2 ") == ("number", 2.0)
    assert normalize_answer("2024-03") == ("month", "2024-03")
    assert normalize_answer("2024-03-01") == ("date", "2024-03-01")
    assert normalize_answer("Yoga") == normalize_answer("yoga")
    assert normalize_answer("2024-03; 2024-05") == ("month", "2024-03")
    assert normalize_answer("-3.50") == ("number", -3.5)


def test_hit_examples():
    assert hit_at_1("2", "2") == 1
    assert hit_at_1("2", "3") == 0
    assert hit_at_1("2024-03", "2024-03") == 1
    assert hit_at_1("yoga", "Yoga") == 1
    assert hit_at_1("2", "yoga") == 0


def test_hit_symmetric_rlx_asymmetric():
    assert hit_at_1("100", "110") == hit_at_1("110", "100") == 0
    assert rlx_hit_at_1("100", "110") == 1   # 10/110 within tolerance
    assert rlx_hit_at_1("110", "100") == 1   # exactly 10% of 100, inclusive
    assert rlx_hit_at_1("100", "90") == 0    # 10/90 > 10%
    assert rlx_hit_at_1("90", "100") == 1


def test_rlx_boundary_suite():
    assert rlx_hit_at_1("100", "110") == 1
    assert rlx_hit_at_1("89", "100") == 0
    assert rlx_hit_at_1("90", "100") == 1
    assert rlx_hit_at_1("0", "0") == 1
    assert rlx_hit_at_1("0.0001", "0") == 0
    assert rlx_hit_at_1("0", "5") == 0


def test_rlx_zero_rho_is_exact():
    assert rlx_hit_at_1("100.0", "100", rho=0.0) == 1
    assert rlx_hit_at_1("100.01", "100", rho=0.0) == 0


def test_rlx_never_below_hit_random_pairs():
    rng = random.Random(8)
    for _ in range(1000):
        if rng.random() < 0.5:
            pred = str(round(rng.uniform(-50, 150), rng.randint(0, 2)))
            gold = str(round(rng.uniform(-50, 150), rng.randint(0, 2)))
        else:
            pred = rng.choice(("yoga", "2024-03", "no answer", "x"))
            gold = rng.choice(("yoga", "2024-03", "no answer", "y"))
        assert rlx_hit_at_1(pred, gold) >= hit_at_1(pred, gold)


def test_metrics_config_validation():
    MetricsConfig(rho=0.0)
    with pytest.raises(ValueError):
        MetricsConfig(rho=1.0)


def _case(question, display, template="t"):
    return GoldCase(question=question, template_id=template,
                    plan=OperatorNode("RETRIEVE", query="x"), answer=Answer.scalar(display))


def test_evaluate_run_aggregates():
    cases = [_case("q1", "100", "a"), _case("q2", "yoga", "b")]
    outputs = [SystemOutput("q1", "105"), SystemOutput("q2", "yoga")]
    report = evaluate_run(cases, outputs)
    assert report.n == 2
    assert report.hit_at_1 == 0.5 and report.rlx_hit_at_1 == 1.0
    assert report.per_template["a"] == {"n": 1, "hit_at_1": 0.0, "rlx_hit_at_1": 1.0}
    assert len(report.failures) == 1 and report.failures[0]["question"] == "q1"


def test_evaluate_run_rlx_always_at_least_hit():
    cases = [_case(f"q{i}", str(i)) for i in range(10)]
    outputs = [SystemOutput(f"q{i}", str(i + (i % 3))) for i in range(10)]
    report = evaluate_run(cases, outputs)
    assert report.rlx_hit_at_1 >= report.hit_at_1


def test_evaluate_run_alignment_errors():
    cases = [_case("q1", "1")]
    with pytest.raises(AlignmentError):
        evaluate_run(cases, [])
    with pytest.raises(AlignmentError):
        evaluate_run(cases, [SystemOutput("other question", "1")])


def test_evaluate_run_empty():
    report = evaluate_run([], [])
    assert report == EvalReport(n=0, hit_at_1=None, rlx_hit_at_1=None)
    assert report.to_doc()["hit_at_1"] is None
