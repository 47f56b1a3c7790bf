"""Value-change-dump ingestion.

Reads the common VCD subset ($timescale, $scope/$upscope, $var wire/reg,
#<time>, scalar and vector value changes), flattening hierarchical scopes
by leaf name, and samples one trace record per rising clock edge after
all value changes at that timestamp have been applied.  Two-state only:
an x or z on a monitored signal raises.
"""

from __future__ import annotations

from .bits import mask
from .errors import FourStateValue, MissingSignal, VcdSyntaxError
from .specmodel import PortDecl
from .trace import CycleTrace, TracePort


def parse_vcd(text: str, ports: list[PortDecl], clock_name: str) -> CycleTrace:
    """Extract a cycle trace for *ports*, clocked by *clock_name*.

    Every listed port and the clock must be declared in the VCD; values
    are width-masked; the clock itself never appears as a trace column.
    """
    tokens = text.split()
    n = len(tokens)
    i = 0

    code_by_name: dict[str, str] = {}
    scope_depth = 0

    # -- declaration section ------------------------------------------------
    while i < n:
        tok = tokens[i]
        if tok == "$enddefinitions":
            while i < n and tokens[i] != "$end":
                i += 1
            i += 1
            break
        if tok == "$var":
            # $var <type> <width> <code> <name> [<range>] $end
            j = i + 1
            fields = []
            while j < n and tokens[j] != "$end":
                fields.append(tokens[j])
                j += 1
            if j >= n or len(fields) < 4:
                raise VcdSyntaxError(f"malformed $var near token {i}")
            _vtype, _vwidth, code, name = fields[0], fields[1], fields[2], fields[3]
            code_by_name.setdefault(name, code)
            i = j + 1
            continue
        if tok == "$scope":
            scope_depth += 1
        elif tok == "$upscope":
            scope_depth -= 1
        if tok.startswith("$"):
            while i < n and tokens[i] != "$end":
                i += 1
            i += 1
            continue
        raise VcdSyntaxError(f"unexpected token before $enddefinitions: {tok!r}")

    monitored = {p.name for p in ports} | {clock_name}
    for name in sorted(monitored):
        if name not in code_by_name:
            raise MissingSignal(name)
    name_by_code = {code_by_name[name]: name for name in monitored}

    widths = {p.name: p.width for p in ports}
    widths[clock_name] = 1

    # -- value-change section -------------------------------------------------
    values: dict[str, int] = {name: 0 for name in monitored}
    clock_prev: int | None = None
    time = 0
    trace = CycleTrace(ports=tuple(
        TracePort(p.name, p.direction.value, p.width, p.signed) for p in ports))

    def sample() -> None:
        inputs = {p.name: values[p.name] for p in ports if p.direction.value == "in"}
        outputs = {p.name: values[p.name] for p in ports if p.direction.value == "out"}
        trace.append(inputs, outputs)

    def apply(code: str, raw: str, signal_time: int) -> None:
        name = name_by_code.get(code)
        if name is None:
            return
        lowered = raw.lower()
        if "x" in lowered or "z" in lowered:
            raise FourStateValue(name, signal_time)
        values[name] = mask(int(raw, 2), widths[name])

    pending_edge = False
    while i < n:
        tok = tokens[i]
        if tok.startswith("#"):
            if pending_edge:
                sample()
                pending_edge = False
            try:
                time = int(tok[1:])
            except ValueError:
                raise VcdSyntaxError(f"malformed timestamp {tok!r}") from None
            i += 1
            continue
        if tok.startswith("$"):  # $dumpvars / $dumpall / $end markers
            i += 1
            continue
        first = tok[0].lower()
        if first in "01xz":
            code = tok[1:]
            old_clock = values[clock_name]
            apply(code, tok[0], time)
            if name_by_code.get(code) == clock_name:
                if clock_prev is not None and old_clock == 0 and values[clock_name] == 1:
                    pending_edge = True
                clock_prev = values[clock_name]
            i += 1
            continue
        if first == "b":
            if i + 1 >= n:
                raise VcdSyntaxError("vector change missing identifier code")
            code = tokens[i + 1]
            old_clock = values[clock_name]
            apply(code, tok[1:].replace("_", ""), time)
            if name_by_code.get(code) == clock_name:
                if clock_prev is not None and old_clock == 0 and values[clock_name] == 1:
                    pending_edge = True
                clock_prev = values[clock_name]
            i += 2
            continue
        if first == "r":
            raise VcdSyntaxError(f"real-valued signal change {tok!r} is not supported")
        raise VcdSyntaxError(f"unexpected token {tok!r} at time {time}")

    if pending_edge:
        sample()
    return trace
