import pytest

from faver.errors import MissingFixture, TransportError
from faver.genclient import (HttpChatClient, PromptBundle, PromptProfile,
                             ScriptedMockClient, TaskKind, extract_code_block)


@pytest.fixture
def mock_dir(tmp_path):
    (tmp_path / "gen_rtl").mkdir()
    (tmp_path / "gen_rtl" / "attempt0.v").write_text("module a; endmodule\n")
    (tmp_path / "gen_rtl" / "attempt1.v").write_text("module b; endmodule\n")
    (tmp_path / "refine_rtl").mkdir()
    (tmp_path / "refine_rtl" / "attempt0.v").write_text("module c; endmodule\n")
    return tmp_path


def bundle(task=TaskKind.GEN_RTL, **fields):
    fields.setdefault("spec_text", "module: m ...")
    return PromptBundle.build(task, **fields)


def test_mock_replays_in_order(mock_dir):
    client = ScriptedMockClient(mock_dir)
    assert client.request(bundle()) == "module a; endmodule\n"
    assert client.request(bundle()) == "module b; endmodule\n"


def test_mock_counts_per_task_kind(mock_dir):
    client = ScriptedMockClient(mock_dir)
    client.request(bundle())
    out = client.request(bundle(TaskKind.REFINE_RTL, previous_rtl="x",
                                report="failed"))
    assert out == "module c; endmodule\n"


def test_mock_missing_fixture_names_path(mock_dir):
    client = ScriptedMockClient(mock_dir)
    client.request(bundle())
    client.request(bundle())
    with pytest.raises(MissingFixture, match="attempt2"):
        client.request(bundle())


def test_mock_is_reproducible(mock_dir):
    runs = []
    for _ in range(2):
        client = ScriptedMockClient(mock_dir)
        runs.append([client.request(bundle()) for _ in range(2)])
    assert runs[0] == runs[1]


def test_transcript_archived(mock_dir, tmp_path):
    import json
    from faver.genclient import archive_transcript
    client = ScriptedMockClient(mock_dir)
    client.request(bundle())
    path = tmp_path / "t.jsonl"
    archive_transcript(client, path)
    rec = json.loads(path.read_text().splitlines()[0])
    assert rec["task"] == "gen_rtl" and rec["attempt"] == 0
    assert "module a" in rec["response"]


def test_http_unreachable_raises_transport_error():
    client = HttpChatClient("http://127.0.0.1:1", "m", timeout=0.2)
    with pytest.raises(TransportError):
        client.request(bundle())


# --- prompt templates --------------------------------------------------------

def test_every_template_renders():
    fields = {
        TaskKind.GEN_RTL: {"spec_text": "SPEC"},
        TaskKind.GEN_VERIFICATION_SPEC: {"spec_text": "SPEC"},
        TaskKind.FILL_TEMPLATE: {"vspec_json": "{}", "scaffold": "class Model: ..."},
        TaskKind.PROPOSE_PLAN: {"vspec_json": "{}"},
        TaskKind.PROPOSE_STIMULI: {"vspec_json": "{}", "data_ports": "en",
                                   "case_name": "c", "targeted": "t",
                                   "cycles": "4"},
        TaskKind.REFINE_RTL: {"spec_text": "SPEC", "previous_rtl": "RTL",
                              "report": "REPORT"},
    }
    for task, f in fields.items():
        rendered = PromptBundle.build(task, **f).rendered_prompt
        for value in f.values():
            assert value in rendered


def test_refine_requires_report():
    with pytest.raises(ValueError, match="report"):
        PromptBundle.build(TaskKind.REFINE_RTL, spec_text="s",
                           previous_rtl="r", report="")


def test_custom_profile_directory(tmp_path):
    (tmp_path / "gen_rtl.txt").write_text("custom: $spec_text")
    profile = PromptProfile("custom", tmp_path)
    b = PromptBundle.build(TaskKind.GEN_RTL, profile=profile, spec_text="S")
    assert b.rendered_prompt == "custom: S"


# --- code block extraction ------------------------------------------------------

def test_extract_single_tagged_block():
    text, warnings = extract_code_block(
        "intro\n```verilog\nmodule m; endmodule\n```\ntrailer", "verilog")
    assert text == "module m; endmodule\n"
    assert warnings == []


def test_extract_no_fence_returns_whole_with_warning():
    text, warnings = extract_code_block("module m; endmodule", "verilog")
    assert text == "module m; endmodule"
    assert len(warnings) == 1 and "no fenced" in warnings[0]


def test_extract_two_blocks_warns_and_takes_first():
    resp = "```verilog\nfirst\n```\n```verilog\nsecond\n```"
    text, warnings = extract_code_block(resp, "verilog")
    assert text == "first\n"
    assert any("2 candidate" in w for w in warnings)


def test_extract_untagged_fence_accepted_as_fallback():
    text, warnings = extract_code_block("```\nbody\n```", "verilog")
    assert text == "body\n"
