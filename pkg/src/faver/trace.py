"""Per-cycle port-value traces and their file formats.

A trace is the common currency between the HDL interpreter, the
reference model, the VCD reader and the waveform comparator: one record
per clock edge, holding the input and output port values observed after
that edge.  Values are unsigned bit patterns masked to each port's
declared width.
"""

from __future__ import annotations

import io
import json
import csv
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TracePort:
    name: str
    direction: str  # "in" | "out"
    width: int
    signed: bool = False


@dataclass(frozen=True)
class TraceRecord:
    cycle: int
    inputs: dict[str, int]
    outputs: dict[str, int]


@dataclass
class CycleTrace:
    """Cycle-indexed trace with optional reset markers.

    ``reset_markers[k]`` means a reset occurred immediately before record
    index ``k`` (refmodel traces) or that record ``k`` itself is a
    reset-asserted cycle (DUT traces); the producer documents which.
    """

    ports: tuple[TracePort, ...]
    records: list[TraceRecord] = field(default_factory=list)
    reset_markers: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def input_ports(self) -> list[TracePort]:
        return [p for p in self.ports if p.direction == "in"]

    @property
    def output_ports(self) -> list[TracePort]:
        return [p for p in self.ports if p.direction == "out"]

    def __len__(self) -> int:
        return len(self.records)

    def append(self, inputs: dict[str, int], outputs: dict[str, int]) -> None:
        self.records.append(TraceRecord(len(self.records), dict(inputs), dict(outputs)))

    def mark_reset(self) -> None:
        self.reset_markers.append(len(self.records))

    def output_column(self, name: str) -> list[int]:
        return [r.outputs[name] for r in self.records]

    # -- serialization --------------------------------------------------

    def to_json_obj(self) -> dict:
        obj = {
            "ports": [
                {"name": p.name, "dir": p.direction, "width": p.width, "signed": p.signed}
                for p in self.ports
            ],
            "cycles": [
                {
                    "i": {p.name: r.inputs[p.name] for p in self.input_ports},
                    "o": {p.name: r.outputs[p.name] for p in self.output_ports},
                }
                for r in self.records
            ],
        }
        if self.reset_markers:
            obj["resets"] = list(self.reset_markers)
        if self.warnings:
            obj["warnings"] = list(self.warnings)
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CycleTrace":
        ports = tuple(
            TracePort(p["name"], p["dir"], p["width"], bool(p.get("signed", False)))
            for p in obj["ports"]
        )
        trace = cls(ports=ports)
        for k, rec in enumerate(obj["cycles"]):
            trace.records.append(TraceRecord(k, dict(rec["i"]), dict(rec["o"])))
        trace.reset_markers = list(obj.get("resets", []))
        trace.warnings = list(obj.get("warnings", []))
        return trace

    @classmethod
    def from_json(cls, text: str) -> "CycleTrace":
        return cls.from_json_obj(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        in_names = [p.name for p in self.input_ports]
        out_names = [p.name for p in self.output_ports]
        writer.writerow(["cycle"] + in_names + out_names)
        for r in self.records:
            writer.writerow(
                [r.cycle]
                + [r.inputs[n] for n in in_names]
                + [r.outputs[n] for n in out_names]
            )
        return buf.getvalue()
