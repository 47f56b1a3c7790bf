import pytest

from faver.analytics import ConfusionCounts
from faver.errors import LengthMismatch, SessionAborted
from faver.genclient import ScriptedMockClient
from faver.loop import (AttemptRecord, NativeModelBackend, SessionOutcome,
                        compute_metrics, run_session)
from faver.specmodel import parse_design_spec

from conftest import COUNTER_SPEC, FIXTURES, CounterModel


def mock_session(tree: str, seed: int = 0, max_attempts: int = 5,
                 out_dir=None) -> SessionOutcome:
    design = parse_design_spec(COUNTER_SPEC)
    gen = ScriptedMockClient(FIXTURES / tree)
    backend = NativeModelBackend(CounterModel)
    return run_session(design, gen, backend, max_attempts=max_attempts,
                       seed=seed, out_dir=out_dir)


# --- session termination rules ----------------------------------------------------

def test_correct_on_first_attempt(tmp_path):
    outcome = mock_session("mock_counter_ok", out_dir=tmp_path)
    assert len(outcome.attempts) == 1
    assert outcome.selection_mode == "passed_verification"
    assert outcome.selected_index == 0
    assert outcome.passed
    assert (tmp_path / "selected.v").exists()
    assert (tmp_path / "session.jsonl").exists()


def test_faulty_faulty_correct_stops_at_three():
    outcome = mock_session("mock_counter_eventual")
    assert len(outcome.attempts) == 3
    assert outcome.selected_index == 2
    assert outcome.selection_mode == "passed_verification"
    assert [a.passed for a in outcome.attempts] == [False, False, True]


def test_eventual_classifications_name_the_bug_kinds():
    outcome = mock_session("mock_counter_eventual")
    kinds0 = dict(outcome.attempts[0].classifications)
    kinds1 = dict(outcome.attempts[1].classifications)
    assert kinds0["count_up"] == "functional"
    assert kinds1["count_up"] == "timing"


def test_all_faulty_exhausts_with_seeded_sample():
    outcome = mock_session("mock_counter_allfail", seed=123)
    assert len(outcome.attempts) == 5
    assert outcome.selection_mode == "exhaustion_sample"
    assert all(not a.passed for a in outcome.attempts)
    assert 0 <= outcome.selected_index < 5
    assert outcome.rng_seed == 123
    again = mock_session("mock_counter_allfail", seed=123)
    assert again.selected_index == outcome.selected_index


def test_exhaustion_sample_varies_with_seed():
    picks = {mock_session("mock_counter_allfail", seed=s).selected_index
             for s in range(8)}
    assert len(picks) > 1


def test_session_outcome_byte_reproducible():
    a = mock_session("mock_counter_allfail", seed=7)
    b = mock_session("mock_counter_allfail", seed=7)
    assert a.to_json() == b.to_json()


def test_refine_prompts_embed_previous_report():
    design = parse_design_spec(COUNTER_SPEC)
    gen = ScriptedMockClient(FIXTURES / "mock_counter_eventual")
    backend = NativeModelBackend(CounterModel)
    run_session(design, gen, backend, max_attempts=5, seed=0)
    refines = [r for r in gen.transcript if r.task_kind.value == "refine_rtl"]
    assert len(refines) == 2
    assert "verification verdict: FAIL" in refines[0].prompt
    assert "FUNCTIONAL" in refines[0].prompt
    assert "TIMING" in refines[1].prompt


def test_generator_failure_preserves_partial_outcome(tmp_path):
    import shutil
    tree = tmp_path / "broken"
    shutil.copytree(FIXTURES / "mock_counter_allfail", tree)
    shutil.rmtree(tree / "refine_rtl")
    design = parse_design_spec(COUNTER_SPEC)
    gen = ScriptedMockClient(tree)
    with pytest.raises(SessionAborted) as exc:
        run_session(design, gen, NativeModelBackend(CounterModel),
                    max_attempts=5, seed=0)
    partial = exc.value.partial_outcome
    assert partial is not None
    assert len(partial.attempts) == 1
    assert partial.selected_index is None


def test_all_faulty_bug_kinds_cover_three_classes():
    outcome = mock_session("mock_counter_allfail")
    kinds = [dict(a.classifications).get("count_up") for a in outcome.attempts]
    assert kinds[0] == "functional"
    assert kinds[1] == "timing"
    assert kinds[2] == "boundary"


def test_session_log_lines(tmp_path):
    import json
    mock_session("mock_counter_allfail", seed=5, out_dir=tmp_path)
    lines = (tmp_path / "session.jsonl").read_text().splitlines()
    assert len(lines) == 5
    first = json.loads(lines[0])
    assert first["attempt"] == 0 and first["verdict"] == "fail"
    assert first["seed"] == 5
    assert (tmp_path / "report0.txt").exists()
    assert (tmp_path / "stimuli.json").exists()
    assert (tmp_path / "vspec.json").exists()


# --- metrics ----------------------------------------------------------------------

def synth_outcome(verdicts: list[bool], selected: int, mode: str,
                  max_attempts: int | None = None) -> SessionOutcome:
    attempts = [AttemptRecord(i, f"// rtl {i}", v, "report")
                for i, v in enumerate(verdicts)]
    return SessionOutcome(attempts=attempts, selected_index=selected,
                          selection_mode=mode, rng_seed=0,
                          max_attempts=max_attempts or max(5, len(verdicts)))


def ten_session_fixture():
    """Hand-built outcome set; expected numbers are hand-counted below."""
    P, E = "passed_verification", "exhaustion_sample"
    sessions = [
        (synth_outcome([True], 0, P), [True]),
        (synth_outcome([False, True], 1, P), [False, True]),
        (synth_outcome([False] * 5, 2, E), [False] * 5),
        (synth_outcome([True], 0, P), [False]),
        (synth_outcome([False, False], 1, E, 2), [True, False]),
        (synth_outcome([False, True], 1, P), [True, True]),
        (synth_outcome([False, False, False, True], 3, P),
         [False, False, False, True]),
        (synth_outcome([True], 0, P), [True]),
        (synth_outcome([False, False, False], 0, E, 3), [False, True, False]),
        (synth_outcome([False, True], 1, P), [False, False]),
    ]
    outcomes = [s for s, _g in sessions]
    truth = [g for _s, g in sessions]
    return outcomes, truth


def test_metrics_hand_counted_values():
    outcomes, truth = ten_session_fixture()
    m = compute_metrics(outcomes, truth)
    # selected-correct sessions: 0, 1, 5, 6, 7 -> 5/10
    assert m.sys_sel_pass1 == pytest.approx(0.5)
    # any-correct sessions: 0, 1, 4, 5, 6, 7, 8 -> 7/10
    assert m.sys_inner_pass5 == pytest.approx(0.7)
    assert m.confusion == ConfusionCounts(tp=5, fp=2, tn=13, fn=3)


def test_inner_rate_dominates_selected_rate():
    outcomes, truth = ten_session_fixture()
    m = compute_metrics(outcomes, truth)
    assert m.sys_inner_pass5 >= m.sys_sel_pass1


def test_metrics_reject_empty():
    with pytest.raises(LengthMismatch):
        compute_metrics([], [])


def test_metrics_reject_session_count_mismatch():
    outcomes, truth = ten_session_fixture()
    with pytest.raises(LengthMismatch):
        compute_metrics(outcomes, truth[:-1])


def test_metrics_reject_attempt_count_mismatch():
    outcomes, truth = ten_session_fixture()
    truth = [list(t) for t in truth]
    truth[0].append(True)
    with pytest.raises(LengthMismatch, match="session 0"):
        compute_metrics(outcomes, truth)


def test_metrics_json_shape():
    outcomes, truth = ten_session_fixture()
    obj = compute_metrics(outcomes, truth).to_json_obj()
    assert set(obj) == {"sys_sel_pass1", "sys_inner_pass5", "tp", "fp", "tn",
                        "fn", "rates"}
    assert obj["rates"]["a_accept_given_correct"] == pytest.approx(5 / 8)


def test_outcome_invariant_checks():
    with pytest.raises(ValueError):
        synth_outcome([False] * 6, 0, "exhaustion_sample", max_attempts=5)
