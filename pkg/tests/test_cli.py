import json
import os
import subprocess
import sys

from eventqa.cli import main, read_config


def test_plan_prints_canonical_dsl(capsys):
    code = main(["plan", "How often did I eat Italian food after a workout?"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("(APPLY")
    assert '(RETRIEVE' in out and "JOIN" in out


def test_ask_demo_superlative(capsys):
    code = main(["ask", "--persona", "demo",
                 "--question", "The month I listened to Taylor Swift the most?"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "2024-03"


def test_ask_with_trace(capsys):
    code = main(["ask", "--persona", "demo", "--question",
                 "How many yoga workouts did I do?", "--trace"])
    out = capsys.readouterr().out
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "1"
    trace = json.loads("\n".join(lines[1:]))
    assert trace["op"] == "APPLY"


def test_unknown_subcommand_exit_1(capsys):
    assert main(["frobnicate"]) == 1


def test_unknown_persona_exit_1(capsys):
    assert main(["ask", "--persona", "nobody", "--question", "x"]) == 1


def test_planning_failure_exit_1(capsys):
    assert main(["ask", "--persona", "demo", "--question",
                 "What is the meaning of life?", "--planner", "template"]) == 1


def test_generate_then_eval_round_trip(tmp_path, capsys):
    code = main(["generate", "--out", str(tmp_path), "--name", "tiny",
                 "--seed", "7", "--events", "150", "--questions", "12"])
    assert code == 0
    capsys.readouterr()
    report_path = tmp_path / "report.json"
    code = main(["eval", "--cases", str(tmp_path / "tiny.cases.jsonl"),
                 "--store", str(tmp_path / "tiny.events.jsonl"),
                 "--planner", "template", "--report", str(report_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "hit@1=1.0" in out
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["n"] == 12 and report["hit_at_1"] == 1.0


def test_events_search(capsys):
    code = main(["events", "--persona", "demo", "--query", "trattoria"])
    out = capsys.readouterr().out
    assert code == 0
    assert json.loads(out.splitlines()[0])["id"] == "e2"


def test_read_config(tmp_path):
    path = tmp_path / "cfg"
    path.write_text("tau = 0.4\n# comment\nreference_date = 2024-11-25\n", encoding="utf-8")
    assert read_config(path) == {"tau": "0.4", "reference_date": "2024-11-25"}


def test_numpy_fallback_path_end_to_end():
    env = dict(os.environ, EVENTQA_NUMBA="0")
    script = (
        "from eventqa import _kernels; assert not _kernels.USE_NUMBA; "
        "from eventqa.cli import main; "
        "code = main(['ask', '--persona', 'demo', "
        "'--question', 'How often did I eat Italian food after a workout?']); "
        "raise SystemExit(code)"
    )
    proc = subprocess.run([sys.executable, "-c", script], env=env,
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "2"
