import json
import sys
import textwrap

import pytest

from faver.errors import ModelFault, ProtocolError, TransportError
from faver.refmodel import (EventKind, ModelEvent, RefModelHandle,
                            render_template, run_event_sequence)
from faver.specmodel import derive_verification_spec, parse_design_spec

from conftest import CounterModel, ConvModel

CONV_SPEC = """\
module: conv_mac
ports:
  clk in 1 clock
  rst in 1 reset
  x in 8
  k_flat in 24
  y out 18
reset: sync active-high hold=2
constraints:
  x max_width=8  # kernel elements are at most 8 bits wide
description:
  Three-tap multiply-accumulate over a flattened one-dimensional kernel.
"""


@pytest.fixture
def conv_vspec():
    return derive_verification_spec(parse_design_spec(CONV_SPEC))


def counter_events(n_steps: int, en: int = 1) -> list[ModelEvent]:
    return [ModelEvent.reset()] + [ModelEvent.step({"en": en})
                                   for _ in range(n_steps)]


# --- template rendering -------------------------------------------------------

def test_counter_template(counter_vspec):
    tmpl = render_template(counter_vspec)
    assert tmpl.state_vars == (("count_reg", 8, 0),)
    assert tmpl.step_inputs == ("en",)
    assert tmpl.step_outputs == ("count",)
    assert set(tmpl.helper_stubs) == {"compute", "reshape"}
    text = tmpl.rendered_text
    assert "def __init__(self):" in text
    assert "self.count_reg = 0" in text
    assert "def reset(self):" in text
    assert "def step(self, en):" in text
    assert '"count"' in text
    assert "def compute" in text and "def reshape" in text


def test_conv_template_flattened_input(conv_vspec):
    tmpl = render_template(conv_vspec)
    assert tmpl.step_inputs == ("x", "k_flat")
    assert "def step(self, x, k_flat):" in tmpl.rendered_text
    assert "def reshape" in tmpl.rendered_text


def test_stateless_template():
    spec = parse_design_spec(
        "module: add\nports:\n  a in 8\n  b in 8\n  y out 9\n")
    tmpl = render_template(derive_verification_spec(spec))
    assert tmpl.state_vars == ()
    assert "stateless" in tmpl.rendered_text


def test_template_never_names_a_clock(counter_vspec):
    assert "clk" not in render_template(counter_vspec).rendered_text


def test_template_is_valid_python(counter_vspec):
    compile(render_template(counter_vspec).rendered_text, "<scaffold>", "exec")


# --- native handle ---------------------------------------------------------------

def test_native_counter_sequence(counter_vspec):
    handle = RefModelHandle.native(CounterModel(), counter_vspec)
    handle.reset()
    outs = [handle.step({"en": 1})["count"] for _ in range(3)]
    assert outs == [1, 2, 3]


def test_reset_restores_fresh_state(counter_vspec):
    handle = RefModelHandle.native(CounterModel(), counter_vspec)
    handle.reset()
    for _ in range(5):
        handle.step({"en": 1})
    handle.reset()
    assert handle.step({"en": 1})["count"] == 1


def test_reset_idempotent(counter_vspec):
    h1 = RefModelHandle.native(CounterModel(), counter_vspec)
    h1.reset()
    h1.reset()
    h2 = RefModelHandle.native(CounterModel(), counter_vspec)
    h2.reset()
    assert h1.step({"en": 1}) == h2.step({"en": 1})


def test_step_missing_port_raises_before_model_call(counter_vspec):
    calls = []

    class Spy:
        def reset(self):
            pass

        def step(self, **kw):
            calls.append(kw)
            return {"count": 0}

    handle = RefModelHandle.native(Spy(), counter_vspec)
    with pytest.raises(ProtocolError, match="missing port"):
        handle.step({})
    assert calls == []


def test_model_exception_becomes_fault(counter_vspec):
    class Broken:
        def reset(self):
            pass

        def step(self, en):
            raise ValueError("boom")

    handle = RefModelHandle.native(Broken(), counter_vspec)
    with pytest.raises(ModelFault, match="boom"):
        handle.step({"en": 1})


def test_outputs_are_width_masked(counter_vspec):
    class Wide:
        def reset(self):
            pass

        def step(self, en):
            return {"count": 300}

    handle = RefModelHandle.native(Wide(), counter_vspec)
    assert handle.step({"en": 0})["count"] == 44


def test_signed_inputs_decoded_for_model():
    spec = parse_design_spec(
        "module: s\nports:\n  a in 8 signed\n  y out 8 signed\n")
    vspec = derive_verification_spec(spec)
    seen = []

    class Echo:
        def reset(self):
            pass

        def step(self, a):
            seen.append(a)
            return {"y": a}

    handle = RefModelHandle.native(Echo(), vspec)
    out = handle.step({"a": 0xFF})  # pattern for -1
    assert seen == [-1]
    assert out["y"] == 0xFF


# --- event sequences ---------------------------------------------------------------

def test_run_event_sequence_counter(counter_vspec):
    events = [ModelEvent.reset(), ModelEvent.step({"en": 1}),
              ModelEvent.step({"en": 0}), ModelEvent.step({"en": 1})]
    trace = run_event_sequence(
        RefModelHandle.native(CounterModel(), counter_vspec), events)
    assert trace.output_column("count") == [1, 1, 2]
    assert trace.reset_markers == [0]
    assert trace.warnings == []


def test_empty_event_list(counter_vspec):
    trace = run_event_sequence(
        RefModelHandle.native(CounterModel(), counter_vspec), [])
    assert len(trace) == 0


def test_unreset_model_warns(counter_vspec):
    trace = run_event_sequence(
        RefModelHandle.native(CounterModel(), counter_vspec),
        [ModelEvent.step({"en": 1})])
    assert "unreset model" in trace.warnings


def test_reset_equivalence_property(counter_vspec):
    prefix = [ModelEvent.reset()] + [ModelEvent.step({"en": 1})] * 4
    suffix = [ModelEvent.step({"en": e}) for e in (1, 0, 1, 1)]
    t_full = run_event_sequence(
        RefModelHandle.native(CounterModel(), counter_vspec),
        prefix + [ModelEvent.reset()] + suffix)
    t_ref = run_event_sequence(
        RefModelHandle.native(CounterModel(), counter_vspec),
        [ModelEvent.reset()] + suffix)
    tail = [r.outputs for r in t_full.records[-len(suffix):]]
    assert tail == [r.outputs for r in t_ref.records]


def test_partial_trace_attached_on_fault(counter_vspec):
    class FailsAtThree(CounterModel):
        def step(self, en):
            if self.count == 2 and en:
                raise RuntimeError("cycle three")
            return super().step(en)

    with pytest.raises(ModelFault) as exc:
        run_event_sequence(
            RefModelHandle.native(FailsAtThree(), counter_vspec),
            counter_events(5))
    assert exc.value.partial_trace is not None
    assert exc.value.partial_trace.output_column("count") == [1, 2]


def test_conv_model_reshape(conv_vspec):
    handle = RefModelHandle.native(ConvModel(), conv_vspec)
    handle.reset()
    k = (3 << 16) | (2 << 8) | 1  # taps 1, 2, 3
    assert handle.step({"x": 10, "k_flat": k})["y"] == 10
    assert handle.step({"x": 20, "k_flat": k})["y"] == 20 + 2 * 10
    assert handle.step({"x": 30, "k_flat": k})["y"] == 30 + 2 * 20 + 3 * 10


# --- external process handle ----------------------------------------------------

INLINE_SERVER = textwrap.dedent("""\
    import json, sys
    count = 0
    for line in sys.stdin:
        req = json.loads(line)
        if req["event"] == "close":
            print(json.dumps({"ok": True}), flush=True)
            break
        if req["event"] == "reset":
            count = 0
            print(json.dumps({"ok": True}), flush=True)
        elif req["event"] == "step":
            if req["inputs"].get("en"):
                count = (count + 1) % 256
            print(json.dumps({"ok": True, "outputs": {"count": count}}),
                  flush=True)
""")


def external_counter(vspec) -> RefModelHandle:
    return RefModelHandle.external(
        [sys.executable, "-c", INLINE_SERVER], vspec)


def test_external_native_equivalence(counter_vspec):
    events = counter_events(6) + [ModelEvent.reset()] + [
        ModelEvent.step({"en": e}) for e in (1, 0, 1)]
    native = run_event_sequence(
        RefModelHandle.native(CounterModel(), counter_vspec), events)
    with external_counter(counter_vspec) as handle:
        external = run_event_sequence(handle, events)
    assert native.to_json() == external.to_json()


def test_external_fault_reply(counter_vspec):
    server = textwrap.dedent("""\
        import json, sys
        for line in sys.stdin:
            req = json.loads(line)
            if req["event"] == "close":
                break
            print(json.dumps({"ok": False, "error": "kaput"}), flush=True)
    """)
    with RefModelHandle.external([sys.executable, "-c", server],
                                 counter_vspec) as handle:
        with pytest.raises(ModelFault, match="kaput"):
            handle.reset()


def test_external_dead_process_is_transport_error(counter_vspec):
    handle = RefModelHandle.external(
        [sys.executable, "-c", "import sys; sys.exit(0)"], counter_vspec)
    with pytest.raises(TransportError):
        handle.reset()


def test_external_hello_line_consumed(counter_vspec):
    server = ('import json, sys\n'
              'print(json.dumps({"hello": "faver-runner", "proto": 1, '
              '"wide": True}), flush=True)\n') + INLINE_SERVER
    with RefModelHandle.external([sys.executable, "-c", server],
                                 counter_vspec) as handle:
        handle.reset()
        assert handle.step({"en": 1})["count"] == 1
        assert handle._proc.wide is True


def test_external_malformed_reply_is_protocol_error(counter_vspec):
    server = 'import sys\nprint("not json", flush=True)\nsys.stdin.readline()\n'
    with RefModelHandle.external([sys.executable, "-c", server],
                                 counter_vspec) as handle:
        with pytest.raises(ProtocolError):
            handle.reset()
