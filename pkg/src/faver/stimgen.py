"""Hierarchical test-stimuli pipeline.

The generator proposes a test plan and per-case time series for the data
ports; rule-based refinement then makes the streams circuit-legal:
a reset prefix is inserted per the declared reset policy, and every data
value is width-wrapped and range-clamped to its boundary constraints,
with every change logged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bits import decode, mask, sign_extend
from .errors import MismatchedCases, ValidationError
from .genclient import GeneratorClient, PromptBundle, TaskKind, extract_code_block
from .specmodel import (BoundaryConstraint, ResetStyle, VerificationSpec,
                        verification_spec_to_json)


@dataclass(frozen=True)
class PlanCase:
    name: str
    targeted_functionality: str
    rationale: str
    requested_cycles: int


@dataclass(frozen=True)
class TestPlan:
    cases: tuple[PlanCase, ...]
    source_text: str = ""  # raw generator reply, archived for the report

    def __post_init__(self):
        if not self.cases:
            raise ValidationError("test plan has no cases")
        names = [c.name for c in self.cases]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate case names in plan: {names}")
        for c in self.cases:
            if c.requested_cycles < 1:
                raise ValidationError(f"case '{c.name}': requestedCycles must be >= 1")


@dataclass(frozen=True)
class FixLogEntry:
    case_name: str
    cycle: int
    port: str
    original: int
    fixed: int
    rule: str  # "width-wrap" | "range-clamp" | "no-reset"


@dataclass
class RawStimuli:
    """Per-case per-cycle data-port values, before refinement."""
    cases: dict[str, list[dict[str, int]]]


@dataclass
class RefinedStimuli:
    """Per-case cycles now including the reset column, plus the fix log."""
    cases: dict[str, list[dict[str, int]]]
    fix_log: list[FixLogEntry] = field(default_factory=list)
    async_reset_pre_assert: bool = False
    reset_inserted: bool = False


@dataclass(frozen=True)
class SuiteCase:
    name: str
    targeted_functionality: str
    rationale: str
    async_reset_pre_assert: bool
    cycles: tuple[dict[str, int], ...]


@dataclass(frozen=True)
class StimulusSuite:
    module_name: str
    cases: tuple[SuiteCase, ...]

    def to_json_obj(self) -> dict:
        return {
            "module": self.module_name,
            "cases": [
                {
                    "name": c.name,
                    "targetedFunctionality": c.targeted_functionality,
                    "rationale": c.rationale,
                    "asyncResetPreAssert": c.async_reset_pre_assert,
                    "cycles": [dict(cy) for cy in c.cycles],
                }
                for c in self.cases
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "StimulusSuite":
        return cls(
            module_name=obj["module"],
            cases=tuple(
                SuiteCase(
                    name=c["name"],
                    targeted_functionality=c.get("targetedFunctionality", ""),
                    rationale=c.get("rationale", ""),
                    async_reset_pre_assert=bool(c.get("asyncResetPreAssert", False)),
                    cycles=tuple({k: int(v) for k, v in cy.items()}
                                 for cy in c["cycles"]),
                )
                for c in obj["cases"]
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "StimulusSuite":
        return cls.from_json_obj(json.loads(text))


# ---------------------------------------------------------------------------
# Generator-driven steps
# ---------------------------------------------------------------------------

def plan_tests(vspec: VerificationSpec, gen: GeneratorClient) -> TestPlan:
    """Ask the generator for a test plan covering the functional space."""
    bundle = PromptBundle.build(
        TaskKind.PROPOSE_PLAN,
        profile=gen.prompt_profile,
        vspec_json=verification_spec_to_json(vspec),
    )
    response = gen.request(bundle)
    payload, _ = extract_code_block(response, "json")
    try:
        obj = json.loads(payload)
        raw_cases = obj["cases"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"malformed test plan: {exc}")
    cases = []
    for rc in raw_cases:
        try:
            cases.append(PlanCase(
                name=str(rc["name"]),
                targeted_functionality=str(rc.get("targetedFunctionality", "")),
                rationale=str(rc.get("rationale", "")),
                requested_cycles=int(rc["requestedCycles"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed plan case {rc!r}: {exc}")
    return TestPlan(cases=tuple(cases), source_text=response)


def generate_raw(plan: TestPlan, vspec: VerificationSpec,
                 gen: GeneratorClient) -> RawStimuli:
    """One generator request per plan case; validates port coverage,
    integer-ness and requested length."""
    data_ports = [p.name for p in vspec.data_input_ports]
    cases: dict[str, list[dict[str, int]]] = {}
    for case in plan.cases:
        bundle = PromptBundle.build(
            TaskKind.PROPOSE_STIMULI,
            profile=gen.prompt_profile,
            vspec_json=verification_spec_to_json(vspec),
            data_ports=", ".join(data_ports) or "(none)",
            case_name=case.name,
            targeted=case.targeted_functionality,
            cycles=str(case.requested_cycles),
        )
        response = gen.request(bundle)
        payload, _ = extract_code_block(response, "json")
        try:
            cycles = json.loads(payload)["cycles"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ValidationError(f"case '{case.name}': malformed stimuli: {exc}")
        if len(cycles) < case.requested_cycles:
            raise ValidationError(
                f"case '{case.name}': {len(cycles)} cycles generated, "
                f"{case.requested_cycles} requested")
        checked: list[dict[str, int]] = []
        for k, cy in enumerate(cycles):
            row: dict[str, int] = {}
            for port in data_ports:
                if port not in cy:
                    raise ValidationError(
                        f"case '{case.name}' cycle {k}: missing port '{port}'")
                v = cy[port]
                if not isinstance(v, int) or isinstance(v, bool):
                    raise ValidationError(
                        f"case '{case.name}' cycle {k}: port '{port}' value "
                        f"{v!r} is not an integer")
                row[port] = v
            unknown = set(cy) - set(data_ports)
            if unknown:
                raise ValidationError(
                    f"case '{case.name}' cycle {k}: unknown port(s) "
                    f"{', '.join(sorted(unknown))}")
            checked.append(row)
        cases[case.name] = checked
    return RawStimuli(cases=cases)


# ---------------------------------------------------------------------------
# Rule-based refinement
# ---------------------------------------------------------------------------

def insert_reset(raw: RawStimuli, vspec: VerificationSpec) -> RefinedStimuli:
    """Prefix every case with the declared reset sequence.

    The first hold_cycles cycles assert the reset at its active level with
    all data ports at 0; every following cycle carries the inactive level.
    Asynchronous resets additionally flag the co-sim driver to assert
    reset before the first edge.  Without a declared reset this is the
    identity, recorded as a "no-reset" marker in the fix log.
    """
    reset, port = vspec.reset, vspec.reset_port
    data_ports = [p.name for p in vspec.data_input_ports]
    if reset is None or port is None:
        refined = RefinedStimuli(
            cases={name: [dict(cy) for cy in cycles]
                   for name, cycles in raw.cases.items()})
        for name in raw.cases:
            refined.fix_log.append(FixLogEntry(name, 0, "", 0, 0, "no-reset"))
        return refined

    refined = RefinedStimuli(
        cases={},
        async_reset_pre_assert=(reset.style is ResetStyle.ASYNC),
        reset_inserted=True,
    )
    for name, cycles in raw.cases.items():
        prefix = [
            {port.name: reset.active_value, **{d: 0 for d in data_ports}}
            for _ in range(reset.hold_cycles)
        ]
        body = [{port.name: reset.inactive_value, **dict(cy)} for cy in cycles]
        refined.cases[name] = prefix + body
    return refined


def fix_boundaries(stim: RefinedStimuli, constraints: list[BoundaryConstraint],
                   vspec: VerificationSpec) -> RefinedStimuli:
    """Width-wrap then range-clamp every data value, logging each change.

    Ports without an explicit constraint are still wrapped to their
    declared width so refined stimuli are always circuit-legal.  The
    operation is idempotent.
    """
    ports = {p.name: p for p in vspec.data_input_ports}
    by_port: dict[str, list[BoundaryConstraint]] = {}
    for c in constraints:
        if c.port_name in ports:
            by_port.setdefault(c.port_name, []).append(c)

    out = RefinedStimuli(
        cases={},
        fix_log=list(stim.fix_log),
        async_reset_pre_assert=stim.async_reset_pre_assert,
        reset_inserted=stim.reset_inserted,
    )
    for name, cycles in stim.cases.items():
        fixed_cycles: list[dict[str, int]] = []
        for k, cy in enumerate(cycles):
            row = dict(cy)
            for port_name, original in list(row.items()):
                port = ports.get(port_name)
                if port is None:  # reset column
                    continue
                value = original
                for c in by_port.get(port_name, []):
                    # wrap into the constraint width, re-encoded at port width
                    # (sign extension keeps the signed value intact)
                    narrowed = mask(value, c.max_width_bits)
                    wrapped = (sign_extend(narrowed, c.max_width_bits, port.width)
                               if port.signed else narrowed)
                    if wrapped != value:
                        out.fix_log.append(FixLogEntry(
                            name, k, port_name, value, wrapped, "width-wrap"))
                        value = wrapped
                    if c.value_range is not None:
                        lo, hi = c.value_range
                        as_number = decode(mask(value, c.max_width_bits),
                                           c.max_width_bits, port.signed)
                        clamped = min(max(as_number, lo), hi)
                        if clamped != as_number:
                            new = mask(clamped, port.width)
                            out.fix_log.append(FixLogEntry(
                                name, k, port_name, value, new, "range-clamp"))
                            value = new
                wrapped = mask(value, port.width)
                if wrapped != value:
                    out.fix_log.append(FixLogEntry(
                        name, k, port_name, value, wrapped, "width-wrap"))
                    value = wrapped
                row[port_name] = value
            fixed_cycles.append(row)
        out.cases[name] = fixed_cycles
    return out


def refine(raw: RawStimuli, vspec: VerificationSpec) -> RefinedStimuli:
    """insert_reset then fix_boundaries with the spec's constraints."""
    return fix_boundaries(insert_reset(raw, vspec),
                          list(vspec.boundary_conditions), vspec)


def assemble_suite(plan: TestPlan, refined: RefinedStimuli,
                   module_name: str) -> StimulusSuite:
    """Bind plan metadata to refined cycles, 1:1 by case name."""
    plan_names = [c.name for c in plan.cases]
    if sorted(plan_names) != sorted(refined.cases.keys()):
        raise MismatchedCases(
            f"plan has cases {sorted(plan_names)}, "
            f"stimuli have {sorted(refined.cases.keys())}")
    return StimulusSuite(
        module_name=module_name,
        cases=tuple(
            SuiteCase(
                name=c.name,
                targeted_functionality=c.targeted_functionality,
                rationale=c.rationale,
                async_reset_pre_assert=refined.async_reset_pre_assert,
                cycles=tuple(dict(cy) for cy in refined.cases[c.name]),
            )
            for c in plan.cases
        ),
    )


def build_suite(vspec: VerificationSpec, gen: GeneratorClient,
                ) -> tuple[StimulusSuite, TestPlan, RawStimuli, RefinedStimuli]:
    """Full stimulus pipeline: plan, raw data, refinement, assembly."""
    plan = plan_tests(vspec, gen)
    raw = generate_raw(plan, vspec, gen)
    refined = refine(raw, vspec)
    suite = assemble_suite(plan, refined, vspec.module_name)
    return suite, plan, raw, refined


def raw_stimuli_to_json_obj(raw: RawStimuli, module_name: str) -> dict:
    return {
        "module": module_name,
        "cases": [
            {"name": name, "cycles": [dict(cy) for cy in cycles]}
            for name, cycles in raw.cases.items()
        ],
    }


def fix_log_to_json_obj(entries: list[FixLogEntry]) -> list[dict]:
    return [
        {"case": e.case_name, "cycle": e.cycle, "port": e.port,
         "original": e.original, "fixed": e.fixed, "rule": e.rule}
        for e in entries
    ]
