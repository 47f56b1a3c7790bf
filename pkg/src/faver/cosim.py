"""Lockstep co-simulation of a DUT against a reference model.

One DUT tick and one model event per clock edge: reset-asserted cycles
send the DUT its reset input while the model receives a reset event (no
output comparison row); every other cycle drives identical data inputs
into both sides and records their outputs side by side.

The DUT half is either the built-in interpreter or a pre-recorded trace
ingested from a file (external-simulator mode).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import io
import csv

from .errors import (CoSimError, EmptySuite, ModelFault, TraceLengthMismatch)
from .refmodel import RefModelHandle
from .rtlsim import HdlAst, elaborate
from .specmodel import VerificationSpec
from .stimgen import StimulusSuite, SuiteCase
from .trace import CycleTrace, TracePort


@dataclass(frozen=True)
class CoSimConfig:
    latency_offset: int = 0       # pairs dut[i + offset] with ref[i] for offset >= 0
    max_cycles: int = 10_000
    abort_suite_on_fault: bool = False

    def __post_init__(self):
        if abs(self.latency_offset) > self.max_cycles:
            raise CoSimError("latency offset exceeds the cycle cap")


@dataclass
class PairedTrace:
    """Cycle-aligned DUT and reference outputs for one case.

    ``ref_outputs[i]`` is None on reset cycles (no comparison row).  The
    latency offset is carried as metadata; comparison derives the shifted
    pairing from it rather than re-indexing the rows.
    """

    case_name: str
    ports: tuple[TracePort, ...]  # stimulus inputs (incl. reset) + outputs
    inputs: list[dict[str, int]] = field(default_factory=list)
    dut_outputs: list[dict[str, int]] = field(default_factory=list)
    ref_outputs: list[dict[str, int] | None] = field(default_factory=list)
    reset_cycles: set[int] = field(default_factory=set)
    latency_offset: int = 0
    fault: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def output_ports(self) -> list[TracePort]:
        return [p for p in self.ports if p.direction == "out"]

    def __len__(self) -> int:
        return len(self.inputs)

    def compared_pairs(self, extra_offset: int = 0):
        """Yield (dut_cycle, ref_cycle, dut_out, ref_out) honoring the
        offset; reset and faulted-out rows are skipped."""
        k = self.latency_offset + extra_offset
        n_dut, n_ref = len(self.dut_outputs), len(self.ref_outputs)
        for ref_i in range(n_ref):
            dut_i = ref_i + k
            if not 0 <= dut_i < n_dut:
                continue
            ref_out = self.ref_outputs[ref_i]
            dut_out = self.dut_outputs[dut_i]
            if ref_out is None or dut_out is None:
                continue
            if ref_i in self.reset_cycles or dut_i in self.reset_cycles:
                continue
            yield dut_i, ref_i, dut_out, ref_out

    def to_json_obj(self) -> dict:
        return {
            "case": self.case_name,
            "latencyOffset": self.latency_offset,
            "ports": [{"name": p.name, "dir": p.direction, "width": p.width,
                       "signed": p.signed} for p in self.ports],
            "inputs": [dict(i) for i in self.inputs],
            "dut": [dict(o) if o is not None else None for o in self.dut_outputs],
            "ref": [dict(o) if o is not None else None for o in self.ref_outputs],
            "resets": sorted(self.reset_cycles),
            "fault": self.fault,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PairedTrace":
        return cls(
            case_name=obj["case"],
            ports=tuple(TracePort(p["name"], p["dir"], p["width"],
                                  bool(p.get("signed", False)))
                        for p in obj["ports"]),
            inputs=[dict(i) for i in obj["inputs"]],
            dut_outputs=[dict(o) if o is not None else None for o in obj["dut"]],
            ref_outputs=[dict(o) if o is not None else None for o in obj["ref"]],
            reset_cycles=set(obj.get("resets", [])),
            latency_offset=int(obj.get("latencyOffset", 0)),
            fault=obj.get("fault"),
            warnings=list(obj.get("warnings", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "PairedTrace":
        return cls.from_json_obj(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        in_names = [p.name for p in self.ports if p.direction == "in"]
        out_names = [p.name for p in self.output_ports]
        writer.writerow(["cycle"] + in_names
                        + [f"dut_{n}" for n in out_names]
                        + [f"ref_{n}" for n in out_names])
        for i in range(len(self.inputs)):
            dut = self.dut_outputs[i] if i < len(self.dut_outputs) else None
            ref = self.ref_outputs[i] if i < len(self.ref_outputs) else None
            writer.writerow(
                [i] + [self.inputs[i].get(n, "") for n in in_names]
                + [(dut or {}).get(n, "") for n in out_names]
                + [(ref or {}).get(n, "") if ref is not None else ""
                   for n in out_names])
        return buf.getvalue()


class DutBackend:
    """One case's DUT half: tick-driven, re-created per case."""

    def tick(self, inputs: dict[str, int]) -> dict[str, int]:
        raise NotImplementedError

    def apply_async_reset(self, inputs: dict[str, int]) -> None:
        raise NotImplementedError


class InterpreterDut(DutBackend):
    def __init__(self, ast: HdlAst):
        self.inst = elaborate(ast)

    def tick(self, inputs):
        return self.inst.tick(inputs)

    def apply_async_reset(self, inputs):
        self.inst.apply_async_reset(inputs)


class RecordedDut(DutBackend):
    """Replays a pre-recorded DUT trace, checking input identity."""

    def __init__(self, trace: CycleTrace, case_name: str):
        self.trace = trace
        self.case_name = case_name
        self.cursor = 0

    def tick(self, inputs):
        if self.cursor >= len(self.trace.records):
            raise CoSimError(
                f"case '{self.case_name}': recorded trace ended at cycle "
                f"{self.cursor} but stimuli continue")
        rec = self.trace.records[self.cursor]
        if rec.inputs != inputs:
            raise CoSimError(
                f"case '{self.case_name}' cycle {self.cursor}: recorded inputs "
                f"{rec.inputs} do not match stimuli {inputs}")
        self.cursor += 1
        return dict(rec.outputs)

    def apply_async_reset(self, inputs):
        pass  # already baked into the recording


def paired_trace_ports(vspec: VerificationSpec) -> tuple[TracePort, ...]:
    inputs = [p.to_trace_port() for p in vspec.ports
              if p.direction.value == "in"]
    outputs = [p.to_trace_port() for p in vspec.output_ports]
    return tuple(inputs + outputs)


def run_case(dut: DutBackend, model: RefModelHandle, case: SuiteCase,
             vspec: VerificationSpec, cfg: CoSimConfig | None = None,
             ) -> PairedTrace:
    """Drive one refined case through both halves in lockstep.

    The model is reset at case start so cases are order-independent; a
    cycle asserting the declared reset sends the DUT its reset input and
    the model a reset event instead of a step.
    """
    cfg = cfg or CoSimConfig()
    trace = PairedTrace(case_name=case.name, ports=paired_trace_ports(vspec),
                        latency_offset=cfg.latency_offset)
    reset_port = vspec.reset_port
    reset = vspec.reset
    data_ports = [p.name for p in vspec.data_input_ports]

    cycles = list(case.cycles)
    if len(cycles) > cfg.max_cycles:
        trace.warnings.append(
            f"case truncated to max_cycles={cfg.max_cycles} (had {len(cycles)})")
        cycles = cycles[:cfg.max_cycles]

    model.reset()
    if case.async_reset_pre_assert and cycles:
        dut.apply_async_reset(cycles[0])

    try:
        for i, cycle in enumerate(cycles):
            dut_out = dut.tick(cycle)
            in_reset = (reset_port is not None and reset is not None
                        and cycle.get(reset_port.name) == reset.active_value)
            trace.inputs.append(dict(cycle))
            trace.dut_outputs.append(dut_out)
            if in_reset:
                model.reset()
                trace.ref_outputs.append(None)
                trace.reset_cycles.add(i)
            else:
                ref_out = model.step({p: cycle[p] for p in data_ports})
                trace.ref_outputs.append(ref_out)
    except ModelFault as exc:
        trace.fault = str(exc)
        if cfg.abort_suite_on_fault:
            exc.partial_trace = trace
            raise
        return trace

    compared = sum(1 for _ in trace.compared_pairs())
    if len(cycles) > 0 and compared < 1:
        raise TraceLengthMismatch(
            f"case '{case.name}': no overlapping cycles to compare at "
            f"offset {cfg.latency_offset}")
    return trace


def run_suite(dut_factory: Callable[[SuiteCase], DutBackend],
              model_factory: Callable[[], RefModelHandle],
              suite: StimulusSuite, vspec: VerificationSpec,
              cfg: CoSimConfig | None = None, jobs: int = 1,
              ) -> list[PairedTrace]:
    """One PairedTrace per case; the DUT is rebuilt per case so cases are
    independent.  With jobs > 1, cases run on parallel backend pairs."""
    if not suite.cases:
        raise EmptySuite("stimulus suite has no cases")
    cfg = cfg or CoSimConfig()

    def one(case: SuiteCase) -> PairedTrace:
        model = model_factory()
        try:
            return run_case(dut_factory(case), model, case, vspec, cfg)
        finally:
            model.close()

    if jobs <= 1 or len(suite.cases) == 1:
        return [one(case) for case in suite.cases]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, suite.cases))


def interpreter_dut_factory(ast: HdlAst) -> Callable[[SuiteCase], DutBackend]:
    return lambda case: InterpreterDut(ast)


def recorded_dut_factory(traces: dict[str, CycleTrace],
                         ) -> Callable[[SuiteCase], DutBackend]:
    """External-DUT mode: pre-recorded traces keyed by case name."""

    def make(case: SuiteCase) -> DutBackend:
        if case.name not in traces:
            raise CoSimError(f"no recorded DUT trace for case '{case.name}'")
        return RecordedDut(traces[case.name], case.name)

    return make
