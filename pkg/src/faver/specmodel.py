"""Structured design specifications and derived verification specs.

The design spec is the harness's ground truth: a machine-readable port
list, reset policy and boundary constraints wrapped around a free-text
description.  The verification spec is the higher-level rewrite used to
drive reference-model and stimulus generation; it must preserve the
design's I/O ports exactly, with the clock removed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .bits import to_signed
from .errors import SpecSemanticError, SpecSyntaxError, ValidationError
from .genclient import GeneratorClient, PromptBundle, TaskKind, extract_code_block
from .trace import TracePort


class Direction(str, Enum):
    IN = "in"
    OUT = "out"


class Signedness(str, Enum):
    UNSIGNED = "unsigned"
    SIGNED = "signed"


class PortRole(str, Enum):
    CLOCK = "clock"
    RESET = "reset"
    DATA = "data"


class ResetStyle(str, Enum):
    SYNC = "sync"
    ASYNC = "async"


class ActiveLevel(str, Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: Direction
    width: int
    signedness: Signedness = Signedness.UNSIGNED
    role: PortRole = PortRole.DATA

    def __post_init__(self):
        if self.width < 1:
            raise SpecSemanticError(f"port '{self.name}': width must be >= 1")

    @property
    def signed(self) -> bool:
        return self.signedness is Signedness.SIGNED

    def to_trace_port(self) -> TracePort:
        return TracePort(self.name, self.direction.value, self.width, self.signed)


@dataclass(frozen=True)
class ResetSpec:
    style: ResetStyle
    active_level: ActiveLevel
    hold_cycles: int = 1

    def __post_init__(self):
        if self.hold_cycles < 1:
            raise SpecSemanticError("reset hold cycles must be >= 1")

    @property
    def active_value(self) -> int:
        return 1 if self.active_level is ActiveLevel.HIGH else 0

    @property
    def inactive_value(self) -> int:
        return 1 - self.active_value


@dataclass(frozen=True)
class BoundaryConstraint:
    port_name: str
    max_width_bits: int
    value_range: tuple[int, int] | None = None
    note: str = ""

    def __post_init__(self):
        if self.max_width_bits < 1:
            raise SpecSemanticError(
                f"constraint on '{self.port_name}': max_width must be >= 1")
        if self.value_range is not None and self.value_range[0] > self.value_range[1]:
            raise SpecSemanticError(
                f"constraint on '{self.port_name}': empty range "
                f"{self.value_range[0]}..{self.value_range[1]}")


def _check_ports(ports: tuple[PortDecl, ...]) -> None:
    names = [p.name for p in ports]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise SpecSemanticError(f"duplicate port name(s): {', '.join(sorted(dupes))}")
    clocks = [p for p in ports if p.role is PortRole.CLOCK]
    resets = [p for p in ports if p.role is PortRole.RESET]
    if len(clocks) > 1:
        raise SpecSemanticError("at most one clock port is supported")
    if len(resets) > 1:
        raise SpecSemanticError("at most one reset port is supported")


def _check_constraint_fits(c: BoundaryConstraint, port: PortDecl) -> None:
    if c.max_width_bits > port.width:
        raise SpecSemanticError(
            f"constraint on '{c.port_name}': max_width {c.max_width_bits} exceeds "
            f"the port's declared width {port.width}")
    if c.value_range is None:
        return
    lo, hi = c.value_range
    w = c.max_width_bits
    if port.signed:
        bound_lo, bound_hi = to_signed(1 << (w - 1), w), (1 << (w - 1)) - 1
    else:
        bound_lo, bound_hi = 0, (1 << w) - 1
    if lo < bound_lo or hi > bound_hi:
        raise SpecSemanticError(
            f"constraint on '{c.port_name}': range {lo}..{hi} does not fit in "
            f"{w} {'signed' if port.signed else 'unsigned'} bits")


@dataclass(frozen=True)
class DesignSpec:
    module_name: str
    ports: tuple[PortDecl, ...]
    reset: ResetSpec | None = None
    description: str = ""
    constraints: tuple[BoundaryConstraint, ...] = ()

    def __post_init__(self):
        _check_ports(self.ports)
        by_name = {p.name: p for p in self.ports}
        for c in self.constraints:
            if c.port_name not in by_name:
                raise SpecSemanticError(
                    f"constraint references unknown port '{c.port_name}'")
            _check_constraint_fits(c, by_name[c.port_name])
        if any(p.role is PortRole.RESET for p in self.ports) and self.reset is None:
            raise SpecSemanticError(
                "a reset port is declared but no reset: section is present")

    def port(self, name: str) -> PortDecl:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def clock_port(self) -> PortDecl | None:
        return next((p for p in self.ports if p.role is PortRole.CLOCK), None)

    @property
    def reset_port(self) -> PortDecl | None:
        return next((p for p in self.ports if p.role is PortRole.RESET), None)

    @property
    def data_input_ports(self) -> list[PortDecl]:
        return [p for p in self.ports
                if p.direction is Direction.IN and p.role is PortRole.DATA]

    @property
    def output_ports(self) -> list[PortDecl]:
        return [p for p in self.ports if p.direction is Direction.OUT]


@dataclass(frozen=True)
class VerificationSpec:
    module_name: str
    ports: tuple[PortDecl, ...]  # design ports with the clock removed
    function_summary: str
    boundary_conditions: tuple[BoundaryConstraint, ...] = ()
    reset: ResetSpec | None = None

    def __post_init__(self):
        _check_ports(self.ports)

    @property
    def reset_port(self) -> PortDecl | None:
        return next((p for p in self.ports if p.role is PortRole.RESET), None)

    @property
    def data_input_ports(self) -> list[PortDecl]:
        return [p for p in self.ports
                if p.direction is Direction.IN and p.role is PortRole.DATA]

    @property
    def output_ports(self) -> list[PortDecl]:
        return [p for p in self.ports if p.direction is Direction.OUT]

    def port(self, name: str) -> PortDecl:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Spec-file parsing
#
# Format (UTF-8 text):
#   module: <name>
#   ports:
#     <name> in|out <width> [signed] [clock|reset]
#   reset: sync|async active-high|active-low hold=<n>
#   constraints:
#     <port> max_width=<n> [range=<lo>..<hi>] [# note]
#   description:
#     free text until EOF
# ---------------------------------------------------------------------------

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SECTIONS = ("module", "ports", "reset", "constraints", "description")


def _parse_port_line(line: str, lineno: int) -> PortDecl:
    tokens = line.split()
    if len(tokens) < 3:
        raise SpecSyntaxError(lineno, "expected '<name> in|out <width> [signed] [clock|reset]'")
    name, dir_tok, width_tok, *flags = tokens
    if not _IDENT.match(name):
        raise SpecSyntaxError(lineno, f"invalid port name '{name}'")
    if dir_tok.lower() not in ("in", "out"):
        raise SpecSyntaxError(lineno, f"direction must be 'in' or 'out', got '{dir_tok}'")
    try:
        width = int(width_tok)
    except ValueError:
        raise SpecSyntaxError(lineno, f"invalid width '{width_tok}'") from None
    if width < 1:
        raise SpecSyntaxError(lineno, "width must be >= 1")
    signedness = Signedness.UNSIGNED
    role = PortRole.DATA
    for flag in flags:
        f = flag.lower()
        if f == "signed":
            signedness = Signedness.SIGNED
        elif f in ("clock", "reset"):
            role = PortRole(f)
        else:
            raise SpecSyntaxError(lineno, f"unknown port flag '{flag}'")
    return PortDecl(name, Direction(dir_tok.lower()), width, signedness, role)


def _parse_reset_line(line: str, lineno: int) -> ResetSpec:
    tokens = line.split()
    if len(tokens) != 3:
        raise SpecSyntaxError(lineno, "expected 'sync|async active-high|active-low hold=<n>'")
    style_tok, level_tok, hold_tok = tokens
    if style_tok not in ("sync", "async"):
        raise SpecSyntaxError(lineno, f"reset style must be sync or async, got '{style_tok}'")
    if level_tok not in ("active-high", "active-low"):
        raise SpecSyntaxError(lineno, f"expected active-high or active-low, got '{level_tok}'")
    m = re.match(r"^hold=(\d+)$", hold_tok)
    if not m:
        raise SpecSyntaxError(lineno, f"expected hold=<n>, got '{hold_tok}'")
    hold = int(m.group(1))
    if hold < 1:
        raise SpecSyntaxError(lineno, "hold must be >= 1")
    level = ActiveLevel.HIGH if level_tok == "active-high" else ActiveLevel.LOW
    return ResetSpec(ResetStyle(style_tok), level, hold)


def _parse_constraint_line(line: str, lineno: int) -> BoundaryConstraint:
    note = ""
    if "#" in line:
        line, note = line.split("#", 1)
        note = note.strip()
    tokens = line.split()
    if len(tokens) < 2:
        raise SpecSyntaxError(lineno, "expected '<port> max_width=<n> [range=<lo>..<hi>]'")
    port = tokens[0]
    if not _IDENT.match(port):
        raise SpecSyntaxError(lineno, f"invalid port name '{port}'")
    max_width = None
    value_range = None
    for tok in tokens[1:]:
        m = re.match(r"^max_width=(\d+)$", tok)
        if m:
            max_width = int(m.group(1))
            continue
        m = re.match(r"^range=(-?\d+)\.\.(-?\d+)$", tok)
        if m:
            value_range = (int(m.group(1)), int(m.group(2)))
            continue
        raise SpecSyntaxError(lineno, f"unknown constraint field '{tok}'")
    if max_width is None:
        raise SpecSyntaxError(lineno, "constraint missing max_width=<n>")
    if max_width < 1:
        raise SpecSyntaxError(lineno, "max_width must be >= 1")
    if value_range is not None and value_range[0] > value_range[1]:
        raise SpecSyntaxError(lineno, f"empty range {value_range[0]}..{value_range[1]}")
    return BoundaryConstraint(port, max_width, value_range, note)


def parse_design_spec(text: str) -> DesignSpec:
    """Parse spec-file text into a validated :class:`DesignSpec`."""
    module_name: str | None = None
    ports: list[PortDecl] = []
    reset: ResetSpec | None = None
    constraints: list[BoundaryConstraint] = []
    description_lines: list[str] = []

    section: str | None = None
    seen: set[str] = set()
    lines = text.splitlines()
    for idx, raw in enumerate(lines):
        lineno = idx + 1
        if section == "description":
            description_lines.append(raw)
            continue
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        header = re.match(r"^([A-Za-z_]+)\s*:(.*)$", line)
        if header and header.group(1) in _SECTIONS:
            name, rest = header.group(1), header.group(2).strip()
            if name in seen:
                raise SpecSyntaxError(lineno, f"duplicate section '{name}:'")
            seen.add(name)
            section = name
            if name == "module":
                if not _IDENT.match(rest):
                    raise SpecSyntaxError(lineno, f"invalid module name '{rest}'")
                module_name = rest
            elif name == "reset":
                reset = _parse_reset_line(rest, lineno)
            elif rest and name != "description":
                raise SpecSyntaxError(lineno, f"unexpected text after '{name}:'")
            elif name == "description" and rest:
                description_lines.append(rest)
            continue
        if section == "ports":
            ports.append(_parse_port_line(line, lineno))
        elif section == "constraints":
            constraints.append(_parse_constraint_line(line, lineno))
        elif section in ("module", "reset") or section is None:
            raise SpecSyntaxError(lineno, f"unexpected line outside a list section: '{line}'")

    if module_name is None:
        raise SpecSyntaxError(len(lines) or 1, "missing 'module:' section")
    if not ports:
        raise SpecSyntaxError(len(lines) or 1, "missing or empty 'ports:' section")

    return DesignSpec(
        module_name=module_name,
        ports=tuple(ports),
        reset=reset,
        description="\n".join(description_lines).strip(),
        constraints=tuple(constraints),
    )


def format_design_spec(design: DesignSpec) -> str:
    """Render a :class:`DesignSpec` back to spec-file text.

    ``parse_design_spec(format_design_spec(d)) == d`` for every valid spec.
    """
    out = [f"module: {design.module_name}", "ports:"]
    for p in design.ports:
        flags = []
        if p.signed:
            flags.append("signed")
        if p.role is not PortRole.DATA:
            flags.append(p.role.value)
        out.append("  " + " ".join([p.name, p.direction.value, str(p.width)] + flags))
    if design.reset is not None:
        r = design.reset
        out.append(f"reset: {r.style.value} active-{r.active_level.value} hold={r.hold_cycles}")
    if design.constraints:
        out.append("constraints:")
        for c in design.constraints:
            fields = [c.port_name, f"max_width={c.max_width_bits}"]
            if c.value_range is not None:
                fields.append(f"range={c.value_range[0]}..{c.value_range[1]}")
            line = "  " + " ".join(fields)
            if c.note:
                line += f"  # {c.note}"
            out.append(line)
    if design.description:
        out.append("description:")
        out.extend(design.description.splitlines())
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON serialization (interchange format for both spec kinds)
# ---------------------------------------------------------------------------

def _port_to_obj(p: PortDecl) -> dict:
    return {
        "name": p.name,
        "direction": p.direction.value,
        "width": p.width,
        "signedness": p.signedness.value,
        "role": p.role.value,
    }


def _port_from_obj(obj: dict) -> PortDecl:
    return PortDecl(
        name=obj["name"],
        direction=Direction(obj["direction"]),
        width=int(obj["width"]),
        signedness=Signedness(obj.get("signedness", "unsigned")),
        role=PortRole(obj.get("role", "data")),
    )


def _constraint_to_obj(c: BoundaryConstraint) -> dict:
    obj: dict = {"portName": c.port_name, "maxWidthBits": c.max_width_bits}
    if c.value_range is not None:
        obj["valueRange"] = [c.value_range[0], c.value_range[1]]
    if c.note:
        obj["note"] = c.note
    return obj


def _constraint_from_obj(obj: dict) -> BoundaryConstraint:
    rng = obj.get("valueRange")
    return BoundaryConstraint(
        port_name=obj["portName"],
        max_width_bits=int(obj["maxWidthBits"]),
        value_range=(int(rng[0]), int(rng[1])) if rng is not None else None,
        note=obj.get("note", ""),
    )


def _reset_to_obj(r: ResetSpec | None) -> dict | None:
    if r is None:
        return None
    return {"style": r.style.value, "activeLevel": r.active_level.value,
            "holdCycles": r.hold_cycles}


def _reset_from_obj(obj: dict | None) -> ResetSpec | None:
    if obj is None:
        return None
    return ResetSpec(ResetStyle(obj["style"]), ActiveLevel(obj["activeLevel"]),
                     int(obj["holdCycles"]))


def design_spec_to_json_obj(design: DesignSpec) -> dict:
    return {
        "moduleName": design.module_name,
        "ports": [_port_to_obj(p) for p in design.ports],
        "reset": _reset_to_obj(design.reset),
        "description": design.description,
        "constraints": [_constraint_to_obj(c) for c in design.constraints],
    }


def design_spec_from_json_obj(obj: dict) -> DesignSpec:
    return DesignSpec(
        module_name=obj["moduleName"],
        ports=tuple(_port_from_obj(p) for p in obj["ports"]),
        reset=_reset_from_obj(obj.get("reset")),
        description=obj.get("description", ""),
        constraints=tuple(_constraint_from_obj(c) for c in obj.get("constraints", [])),
    )


def verification_spec_to_json_obj(vspec: VerificationSpec) -> dict:
    return {
        "moduleName": vspec.module_name,
        "ports": [_port_to_obj(p) for p in vspec.ports],
        "functionSummary": vspec.function_summary,
        "boundaryConditions": [_constraint_to_obj(c) for c in vspec.boundary_conditions],
        "reset": _reset_to_obj(vspec.reset),
    }


def verification_spec_to_json(vspec: VerificationSpec) -> str:
    return json.dumps(verification_spec_to_json_obj(vspec), indent=2)


def verification_spec_from_json_obj(obj: dict) -> VerificationSpec:
    return VerificationSpec(
        module_name=obj["moduleName"],
        ports=tuple(_port_from_obj(p) for p in obj["ports"]),
        function_summary=obj.get("functionSummary", ""),
        boundary_conditions=tuple(
            _constraint_from_obj(c) for c in obj.get("boundaryConditions", [])),
        reset=_reset_from_obj(obj.get("reset")),
    )


def verification_spec_from_json(text: str) -> VerificationSpec:
    return verification_spec_from_json_obj(json.loads(text))


# ---------------------------------------------------------------------------
# Port preservation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreservationVerdict:
    passed: bool
    diffs: tuple[str, ...] = ()


def expected_verification_ports(design: DesignSpec) -> tuple[PortDecl, ...]:
    """Design ports with the clock-role port removed, order preserved."""
    return tuple(p for p in design.ports if p.role is not PortRole.CLOCK)


def derive_verification_spec(design: DesignSpec) -> VerificationSpec:
    """Local, generator-free derivation: design ports minus the clock,
    design constraints and reset carried over, the description standing in
    for the function summary.  Used by flows that need port/reset context
    without the generation step."""
    return VerificationSpec(
        module_name=design.module_name,
        ports=expected_verification_ports(design),
        function_summary=design.description or design.module_name,
        boundary_conditions=design.constraints,
        reset=design.reset,
    )


def validate_port_preservation(design: DesignSpec,
                               vspec: VerificationSpec) -> PreservationVerdict:
    """Check that the verification spec preserves the design's I/O ports.

    Pass iff ``vspec.ports`` equals the design ports minus the clock port,
    with name, width, direction and signedness all equal and order
    preserved.  The verdict carries one diff string per discrepancy.
    """
    expected = expected_verification_ports(design)
    diffs: list[str] = []

    clock = design.clock_port
    actual_by_name = {p.name: p for p in vspec.ports}
    if clock is not None and clock.name in actual_by_name:
        diffs.append(f"{clock.name}: clock port must be extracted, not retained")

    expected_names = [p.name for p in expected]
    actual_names = [p.name for p in vspec.ports]
    for name in expected_names:
        if name not in actual_by_name:
            diffs.append(f"{name}: missing from verification spec")
    for name in actual_names:
        if name not in expected_names and (clock is None or name != clock.name):
            diffs.append(f"{name}: not a design port")

    for exp in expected:
        act = actual_by_name.get(exp.name)
        if act is None:
            continue
        for fld in ("width", "direction", "signedness"):
            ev, av = getattr(exp, fld), getattr(act, fld)
            if ev != av:
                ev = ev.value if isinstance(ev, Enum) else ev
                av = av.value if isinstance(av, Enum) else av
                diffs.append(f"{exp.name}: {fld} {ev} vs {av}")

    common = [n for n in expected_names if n in actual_by_name]
    if not diffs and [n for n in actual_names if n in common] != common:
        diffs.append(f"port order changed: expected {expected_names}, got {actual_names}")

    return PreservationVerdict(passed=not diffs, diffs=tuple(diffs))


# ---------------------------------------------------------------------------
# Verification-spec generation
# ---------------------------------------------------------------------------

def _merge_constraints(design: DesignSpec,
                       generated: tuple[BoundaryConstraint, ...],
                       ) -> tuple[BoundaryConstraint, ...]:
    """Union generator constraints onto the design's.

    Design constraints are ground truth and always kept verbatim; a
    generated constraint is appended unless it duplicates or weakens an
    existing one on the same port (wider max_width and no narrower range).
    """
    merged = list(design.constraints)
    for g in generated:
        redundant = False
        for d in design.constraints:
            if d.port_name != g.port_name:
                continue
            if g.max_width_bits >= d.max_width_bits and (
                    g.value_range is None
                    or (d.value_range is not None
                        and g.value_range[0] <= d.value_range[0]
                        and g.value_range[1] >= d.value_range[1])):
                redundant = True
                break
        if not redundant and g not in merged:
            merged.append(g)
    return tuple(merged)


def build_verification_spec(design: DesignSpec,
                            gen: GeneratorClient) -> VerificationSpec:
    """Ask the generator for a verification spec and gate it.

    The generator receives the design spec text and must reply with the
    verification-spec JSON document.  Its port list is validated against
    the preservation rule and rejected (``ValidationError``) on any
    mismatch; boundary constraints are unioned with, and can never
    weaken, the ones declared in the design spec.
    """
    bundle = PromptBundle.build(
        TaskKind.GEN_VERIFICATION_SPEC,
        profile=gen.prompt_profile,
        spec_text=format_design_spec(design),
    )
    response = gen.request(bundle)
    payload, _ = extract_code_block(response, "json")
    try:
        obj = json.loads(payload)
        vspec = verification_spec_from_json_obj(obj)
    except (ValueError, KeyError, SpecSemanticError) as exc:
        raise ValidationError(f"generator returned a malformed verification spec: {exc}")

    verdict = validate_port_preservation(design, vspec)
    if not verdict.passed:
        raise ValidationError(
            "generator violated port preservation: " + "; ".join(verdict.diffs))
    if not vspec.function_summary.strip():
        raise ValidationError("generator returned an empty function summary")

    for c in vspec.boundary_conditions:
        port = next((p for p in vspec.ports if p.name == c.port_name), None)
        if port is None:
            raise ValidationError(f"generated constraint references unknown port "
                                  f"'{c.port_name}'")
        _check_constraint_fits(c, port)

    return replace(
        vspec,
        module_name=design.module_name,
        # roles and reset policy are design ground truth
        ports=tuple(replace(p, role=design.port(p.name).role) for p in vspec.ports),
        reset=design.reset,
        boundary_conditions=_merge_constraints(design, vspec.boundary_conditions),
    )
