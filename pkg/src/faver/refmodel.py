"""Executable contract for high-level reference models.

A reference model is stateful code with two entry points: ``reset()``
re-initializes all state, ``step(inputs)`` consumes one cycle's inputs
and returns that cycle's outputs.  There is no clock anywhere in the
interface: each rising clock edge of the design corresponds to one step
event, so clocking is encoded purely as event ordering.

Models run either natively (any in-process object with the two entry
points) or in an external process speaking a newline-delimited JSON
protocol over stdin/stdout:

    {"event":"reset"}                          -> {"ok":true}
    {"event":"step","inputs":{"<port>":int}}   -> {"ok":true,"outputs":{...}}
    {"event":"close"}                          -> {"ok":true}

Faulting models reply {"ok":false,"error":"..."}.  Integers are decimal;
values wider than 64 bits travel as decimal strings when the runner
announced ``"wide":true`` in its optional hello line.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from enum import Enum

from .bits import decode, mask
from .errors import ModelFault, ProtocolError, TransportError
from .specmodel import VerificationSpec
from .trace import CycleTrace, TracePort

_WIDE_LIMIT = 1 << 63


class EventKind(str, Enum):
    RESET = "reset"
    STEP = "step"


@dataclass(frozen=True)
class ModelEvent:
    kind: EventKind
    inputs: dict[str, int] | None = None  # bit patterns; present iff STEP

    @classmethod
    def reset(cls) -> "ModelEvent":
        return cls(EventKind.RESET)

    @classmethod
    def step(cls, inputs: dict[str, int]) -> "ModelEvent":
        return cls(EventKind.STEP, dict(inputs))


@dataclass(frozen=True)
class ModelTemplate:
    state_vars: tuple[tuple[str, int, int], ...]  # (name, width, reset value)
    step_inputs: tuple[str, ...]
    step_outputs: tuple[str, ...]
    helper_stubs: tuple[str, ...]
    rendered_text: str


def render_template(vspec: VerificationSpec) -> ModelTemplate:
    """Build the class scaffold the generator fills in.

    State variables are inferred one per output port when the design has a
    reset (stateful), none otherwise; the fixed helper stubs ``compute``
    and ``reshape`` are emitted and the generator may add more.
    """
    inputs = tuple(p.name for p in vspec.data_input_ports)
    outputs = tuple(p.name for p in vspec.output_ports)
    if vspec.reset is not None:
        state_vars = tuple((f"{p.name}_reg", p.width, 0) for p in vspec.output_ports)
    else:
        state_vars = ()
    helpers = ("compute", "reshape")

    lines = [
        f"class Model:",
        f'    """Reference model for {vspec.module_name}.',
        "",
    ]
    summary = vspec.function_summary.strip() or "(no summary provided)"
    for ln in summary.splitlines():
        lines.append(f"    {ln}" if ln else "")
    lines += ['    """', ""]

    lines.append("    def __init__(self):")
    if state_vars:
        for name, width, value in state_vars:
            lines.append(f"        self.{name} = {value}  # {width}-bit")
    else:
        lines.append("        pass  # stateless")
    lines.append("")

    lines.append("    def reset(self):")
    if state_vars:
        for name, _width, value in state_vars:
            lines.append(f"        self.{name} = {value}")
    else:
        lines.append("        pass")
    lines.append("")

    args = ", ".join(("self",) + inputs)
    ret = ", ".join(f'"{o}": 0' for o in outputs)
    lines += [
        f"    def step({args}):",
        f"        # one clock edge: update state, then compute outputs",
        f"        raise NotImplementedError  # generator fills this in",
        f"        return {{{ret}}}",
        "",
    ]
    for helper in helpers:
        lines += [
            f"    def {helper}(self, *args):",
            f"        pass",
            "",
        ]
    return ModelTemplate(
        state_vars=state_vars,
        step_inputs=inputs,
        step_outputs=outputs,
        helper_stubs=helpers,
        rendered_text="\n".join(lines),
    )


# ---------------------------------------------------------------------------
# Model handles
# ---------------------------------------------------------------------------

def _encode_wire(value: int, wide: bool):
    if wide and abs(value) >= _WIDE_LIMIT:
        return str(value)
    return value

def _decode_wire(value) -> int:
    if isinstance(value, bool):
        raise ProtocolError(f"boolean where integer expected: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 10)
        except ValueError:
            raise ProtocolError(f"non-integer value on the wire: {value!r}") from None
    raise ProtocolError(f"non-integer value on the wire: {value!r}")


class _ExternalProcess:
    """One runner subprocess, strict request-response."""

    def __init__(self, argv: list[str], cwd: str | None = None):
        try:
            self.proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1, cwd=cwd)
        except OSError as exc:
            raise TransportError(f"failed to spawn runner {argv!r}: {exc}") from exc
        self.wide = False
        self._hello_seen = False

    def request(self, obj: dict) -> dict:
        proc = self.proc
        if proc.poll() is not None:
            raise TransportError(f"runner exited with code {proc.returncode}")
        try:
            proc.stdin.write(json.dumps(obj, separators=(",", ":")) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"runner pipe closed: {exc}") from exc
        while True:
            line = proc.stdout.readline()
            if line == "":
                raise TransportError("runner closed its output stream")
            line = line.strip()
            if not line:
                continue
            try:
                reply = json.loads(line)
            except ValueError as exc:
                raise ProtocolError(f"reply is not valid JSON: {line[:200]!r}") from exc
            if not isinstance(reply, dict):
                raise ProtocolError(f"reply is not an object: {line[:200]!r}")
            if "hello" in reply and not self._hello_seen:
                self._hello_seen = True
                self.wide = bool(reply.get("wide", False))
                continue
            return reply

    def close(self) -> None:
        proc = self.proc
        if proc.poll() is None:
            try:
                proc.stdin.write('{"event":"close"}\n')
                proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()


class RefModelHandle:
    """A live model instance, native or external.

    One handle serves one session at a time with strict request-response
    ordering; it is usable between :meth:`open` (implicit in the
    constructors) and :meth:`close`.
    """

    def __init__(self, vspec: VerificationSpec, *, native_model=None,
                 external: _ExternalProcess | None = None):
        if (native_model is None) == (external is None):
            raise ValueError("exactly one backend must be given")
        self.vspec = vspec
        self._model = native_model
        self._proc = external
        self._open = True
        self.kind = "native" if native_model is not None else "external"
        self._input_ports = {p.name: p for p in vspec.data_input_ports}
        self._output_ports = [p for p in vspec.output_ports]

    @classmethod
    def native(cls, model, vspec: VerificationSpec) -> "RefModelHandle":
        """Wrap an in-process object exposing reset() and step(**inputs)."""
        return cls(vspec, native_model=model)

    @classmethod
    def external(cls, argv: list[str], vspec: VerificationSpec,
                 cwd: str | None = None) -> "RefModelHandle":
        """Spawn a runner process speaking the NDJSON stdio protocol."""
        return cls(vspec, external=_ExternalProcess(argv, cwd=cwd))

    def __enter__(self) -> "RefModelHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._open and self._proc is not None:
            self._proc.close()
        self._open = False

    def _require_open(self) -> None:
        if not self._open:
            raise ProtocolError("model handle is closed")

    def reset(self) -> None:
        """Return the model to its freshly-constructed state."""
        self._require_open()
        if self._model is not None:
            try:
                self._model.reset()
            except Exception as exc:  # noqa: BLE001 - model code is untrusted
                raise ModelFault(f"{type(exc).__name__}: {exc}") from exc
            return
        reply = self._proc.request({"event": "reset"})
        if not reply.get("ok", False):
            raise ModelFault(str(reply.get("error", "reset failed")))

    def step(self, inputs: dict[str, int]) -> dict[str, int]:
        """Apply one step event; returns width-masked output patterns."""
        self._require_open()
        missing = set(self._input_ports) - set(inputs)
        extra = set(inputs) - set(self._input_ports)
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing port(s): {', '.join(sorted(missing))}")
            if extra:
                parts.append(f"unknown port(s): {', '.join(sorted(extra))}")
            raise ProtocolError("step inputs " + "; ".join(parts))
        # the harness owns the two's-complement decode for signed ports
        natural = {
            name: decode(mask(value, p.width), p.width, p.signed)
            for name, value in inputs.items()
            for p in (self._input_ports[name],)
        }
        if self._model is not None:
            try:
                raw = self._model.step(**natural)
            except Exception as exc:  # noqa: BLE001 - model code is untrusted
                raise ModelFault(f"{type(exc).__name__}: {exc}") from exc
            if not isinstance(raw, dict):
                raise ModelFault(
                    f"step returned {type(raw).__name__}, expected a dict of outputs")
        else:
            wide = self._proc.wide
            reply = self._proc.request({
                "event": "step",
                "inputs": {k: _encode_wire(v, wide) for k, v in natural.items()},
            })
            if not reply.get("ok", False):
                raise ModelFault(str(reply.get("error", "step failed")))
            raw = reply.get("outputs")
            if not isinstance(raw, dict):
                raise ProtocolError("step reply carries no outputs object")
            raw = {k: _decode_wire(v) for k, v in raw.items()}

        outputs: dict[str, int] = {}
        for p in self._output_ports:
            if p.name not in raw:
                err = f"model produced no value for output '{p.name}'"
                if self._model is not None:
                    raise ModelFault(err)
                raise ProtocolError(err)
            value = raw[p.name]
            if not isinstance(value, int) or isinstance(value, bool):
                raise ModelFault(f"output '{p.name}' is not an integer: {value!r}")
            outputs[p.name] = mask(value, p.width)
        return outputs


def model_trace_ports(vspec: VerificationSpec) -> tuple[TracePort, ...]:
    """Trace columns for standalone model runs: data inputs then outputs."""
    return tuple([p.to_trace_port() for p in vspec.data_input_ports]
                 + [p.to_trace_port() for p in vspec.output_ports])


def run_event_sequence(model: RefModelHandle,
                       events: list[ModelEvent]) -> CycleTrace:
    """Drive the model through *events*; one trace record per step event,
    reset events become trace markers.  On failure the partial trace is
    attached to the raised error."""
    trace = CycleTrace(ports=model_trace_ports(model.vspec))
    if events and events[0].kind is not EventKind.RESET:
        trace.warnings.append("unreset model")
    try:
        for event in events:
            if event.kind is EventKind.RESET:
                model.reset()
                trace.mark_reset()
            else:
                outputs = model.step(event.inputs or {})
                masked_inputs = {
                    p.name: mask(event.inputs[p.name], p.width)
                    for p in model.vspec.data_input_ports
                }
                trace.append(masked_inputs, outputs)
    except (ModelFault, ProtocolError, TransportError) as exc:
        exc.partial_trace = trace
        raise
    return trace
