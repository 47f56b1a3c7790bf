"""Waveform comparison, mismatch classification and report assembly.

A paired trace either matches exactly on every compared cycle (PASS) or
is classified, in precedence order:

1. BOUNDARY - all mismatches sit on one port and every mismatching sample
   is the reference value wrapped (or truncate-and-sign-extended) at some
   width below the port's declared width.
2. TIMING - some nonzero shift k within +-K makes at least a fraction
   theta of the overlapping samples match (smallest |k| wins, ties to
   positive k).
3. FUNCTIONAL - the residual class.

Boundary is the most specific explanation and functional the least, so a
trace explainable as a pure width wrap is never labeled functional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .bits import mask, sign_extend
from .cosim import PairedTrace
from .stimgen import FixLogEntry, StimulusSuite


@dataclass(frozen=True)
class ClassifierParams:
    max_offset: int = 8          # K: timing search window
    min_match_fraction: float = 0.95  # theta
    evidence_limit: int = 32
    window: int = 8              # report context cycles

    def __post_init__(self):
        if self.max_offset < 1:
            raise ValueError("max_offset must be >= 1")
        if not 0.0 < self.min_match_fraction <= 1.0:
            raise ValueError("min_match_fraction must be in (0, 1]")


@dataclass(frozen=True)
class Evidence:
    cycle: int  # DUT cycle index
    port: str
    ref_value: int
    dut_value: int


@dataclass(frozen=True)
class MismatchClass:
    kind: str  # "pass" | "boundary" | "timing" | "functional"
    evidence: tuple[Evidence, ...] = ()
    port: str | None = None            # boundary
    width_bits: int | None = None      # boundary
    variant: str | None = None         # "wrap" | "signext"
    offset_cycles: int | None = None   # timing
    match_fraction: float | None = None
    notes: tuple[str, ...] = ()        # secondary candidates, fault text

    @property
    def passed(self) -> bool:
        return self.kind == "pass"

    def to_json_obj(self) -> dict:
        obj: dict = {"kind": self.kind}
        if self.port is not None:
            obj["port"] = self.port
            obj["widthBits"] = self.width_bits
            obj["variant"] = self.variant
        if self.offset_cycles is not None:
            obj["offsetCycles"] = self.offset_cycles
        if self.match_fraction is not None:
            obj["matchFraction"] = self.match_fraction
        if self.evidence:
            obj["evidence"] = [
                {"cycle": e.cycle, "port": e.port, "ref": e.ref_value,
                 "dut": e.dut_value} for e in self.evidence
            ]
        if self.notes:
            obj["notes"] = list(self.notes)
        return obj


def _collect_mismatches(trace: PairedTrace) -> list[Evidence]:
    out: list[Evidence] = []
    out_ports = [p.name for p in trace.output_ports]
    for dut_i, _ref_i, dut_out, ref_out in trace.compared_pairs():
        for port in out_ports:
            if dut_out[port] != ref_out[port]:
                out.append(Evidence(dut_i, port, ref_out[port], dut_out[port]))
    return out


def _try_boundary(trace: PairedTrace,
                  mismatches: list[Evidence]) -> MismatchClass | None:
    ports = {e.port for e in mismatches}
    if len(ports) != 1:
        return None
    port_name = next(iter(ports))
    decl = next(p for p in trace.output_ports if p.name == port_name)
    for w in range(decl.width - 1, 0, -1):
        if all(e.dut_value == mask(e.ref_value, w) for e in mismatches):
            return MismatchClass(kind="boundary", port=port_name, width_bits=w,
                                 variant="wrap")
        if all(e.dut_value == sign_extend(mask(e.ref_value, w), w, decl.width)
               for e in mismatches):
            return MismatchClass(kind="boundary", port=port_name, width_bits=w,
                                 variant="signext")
    return None


def _shift_match_fraction(trace: PairedTrace, k: int) -> tuple[float, int]:
    total = matched = 0
    out_ports = [p.name for p in trace.output_ports]
    for _d, _r, dut_out, ref_out in trace.compared_pairs(extra_offset=k):
        total += 1
        if all(dut_out[p] == ref_out[p] for p in out_ports):
            matched += 1
    if total == 0:
        return 0.0, 0
    return matched / total, total


def _try_timing(trace: PairedTrace,
                params: ClassifierParams) -> MismatchClass | None:
    # smallest |k| wins, ties broken toward positive k
    candidates: list[tuple[int, float]] = []
    for k in sorted(range(-params.max_offset, params.max_offset + 1),
                    key=lambda k: (abs(k), -k)):
        if k == 0:
            continue
        fraction, total = _shift_match_fraction(trace, k)
        if total >= 1 and fraction >= params.min_match_fraction:
            candidates.append((k, fraction))
            break
    if not candidates:
        return None
    k, fraction = candidates[0]
    return MismatchClass(kind="timing", offset_cycles=k, match_fraction=fraction)


def classify(trace: PairedTrace,
             params: ClassifierParams | None = None) -> MismatchClass:
    """Classify a mismatching paired trace (boundary > timing > functional).

    Evidence always includes the first divergence; secondary candidate
    classes are noted so precedence never hides them entirely.
    """
    params = params or ClassifierParams()
    mismatches = _collect_mismatches(trace)
    if not mismatches and trace.fault is None:
        return MismatchClass(kind="pass")

    evidence = tuple(mismatches[:params.evidence_limit])
    notes: list[str] = []
    if trace.fault is not None:
        notes.append(f"model fault: {trace.fault}")
        if not mismatches:
            return MismatchClass(kind="functional", notes=tuple(notes))

    boundary = _try_boundary(trace, mismatches)
    timing = _try_timing(trace, params)
    if boundary is not None:
        if timing is not None:
            notes.append(
                f"secondary candidate: timing offset {timing.offset_cycles:+d} "
                f"matches fraction {timing.match_fraction:.3f}")
        return MismatchClass(kind="boundary", evidence=evidence,
                             port=boundary.port, width_bits=boundary.width_bits,
                             variant=boundary.variant, notes=tuple(notes))
    if timing is not None:
        return MismatchClass(kind="timing", evidence=evidence,
                             offset_cycles=timing.offset_cycles,
                             match_fraction=timing.match_fraction,
                             notes=tuple(notes))
    return MismatchClass(kind="functional", evidence=evidence, notes=tuple(notes))


def compare(trace: PairedTrace,
            params: ClassifierParams | None = None) -> MismatchClass:
    """PASS iff every compared cycle matches exactly on every output port;
    otherwise the trace is classified."""
    return classify(trace, params)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

_HINTS = {
    "boundary": ("check declared widths, truncation and signedness on the "
                 "named port"),
    "timing": ("check pipeline depth and registered outputs; the reference "
               "matches under the reported cycle offset"),
    "functional": ("re-derive the update logic from the function summary; "
                   "the computed values differ beyond width or alignment"),
}


@dataclass(frozen=True)
class CaseResult:
    case_name: str
    classification: MismatchClass
    first_divergence: int | None
    window_rows: tuple[dict, ...] = ()
    fix_log_excerpt: tuple[FixLogEntry, ...] = ()

    @property
    def passed(self) -> bool:
        return self.classification.passed


@dataclass(frozen=True)
class VerificationReport:
    cases: tuple[CaseResult, ...]
    passed: bool
    text: str

    def to_json_obj(self) -> dict:
        return {
            "verdict": "pass" if self.passed else "fail",
            "cases": [
                {
                    "case": c.case_name,
                    "classification": c.classification.to_json_obj(),
                    "firstDivergence": c.first_divergence,
                    "window": list(c.window_rows),
                    "fixLog": [
                        {"cycle": e.cycle, "port": e.port, "original": e.original,
                         "fixed": e.fixed, "rule": e.rule}
                        for e in c.fix_log_excerpt
                    ],
                }
                for c in self.cases
            ],
            "text": self.text,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)


def _window_rows(trace: PairedTrace, center: int, window: int) -> list[dict]:
    lo = max(0, center - window // 2)
    hi = min(len(trace.inputs), lo + window)
    rows = []
    out_ports = [p.name for p in trace.output_ports]
    ref_by_dut = {d: r for d, r, _o, _e in trace.compared_pairs()}
    for i in range(lo, hi):
        ref_i = ref_by_dut.get(i)
        ref = trace.ref_outputs[ref_i] if ref_i is not None else (
            trace.ref_outputs[i] if i < len(trace.ref_outputs) else None)
        rows.append({
            "cycle": i,
            "reset": i in trace.reset_cycles,
            "inputs": dict(trace.inputs[i]),
            "dut": dict(trace.dut_outputs[i]) if i < len(trace.dut_outputs) else None,
            "ref": dict(ref) if ref is not None else None,
            "mismatch": [p for p in out_ports
                         if ref is not None
                         and i < len(trace.dut_outputs)
                         and trace.dut_outputs[i] is not None
                         and trace.dut_outputs[i][p] != ref[p]],
        })
    return rows


def render_report(results: list[tuple[PairedTrace, MismatchClass]],
                  suite: StimulusSuite | None = None,
                  fix_log: list[FixLogEntry] | None = None,
                  params: ClassifierParams | None = None) -> VerificationReport:
    """Assemble the deterministic verification report.

    Per failing case: classification, first divergence, an aligned window
    of cycles around it, the case's fix-log entries and a remediation hint
    keyed to the class.  Byte-stable for equal inputs.
    """
    params = params or ClassifierParams()
    fix_log = fix_log or []
    case_results: list[CaseResult] = []
    lines: list[str] = []
    all_pass = all(cls.passed for _t, cls in results) and bool(results)

    lines.append(f"verification verdict: {'PASS' if all_pass else 'FAIL'}")
    lines.append(f"cases: {len(results)}")

    for trace, cls in results:
        first = min((e.cycle for e in cls.evidence), default=None)
        excerpt = tuple(e for e in fix_log if e.case_name == trace.case_name)[:10]
        window = tuple(_window_rows(trace, first, params.window)) if first is not None else ()
        case_results.append(CaseResult(
            case_name=trace.case_name, classification=cls,
            first_divergence=first, window_rows=window,
            fix_log_excerpt=excerpt))
        if cls.passed:
            continue

        lines.append("")
        lines.append(f"case '{trace.case_name}': {cls.kind.upper()}")
        if trace.fault is not None:
            lines.append(f"  model fault: {trace.fault}")
        if cls.kind == "boundary":
            lines.append(f"  port '{cls.port}' behaves as if truncated to "
                         f"{cls.width_bits} bits ({cls.variant}): "
                         f"dut == ref mod 2^{cls.width_bits}")
        if cls.kind == "timing":
            lines.append(f"  outputs match at cycle offset "
                         f"{cls.offset_cycles:+d} "
                         f"(fraction {cls.match_fraction:.3f})")
        if first is not None:
            lines.append(f"  first divergence at cycle {first}")
            for row in window:
                marker = "*" if row["mismatch"] else " "
                reset = " (reset)" if row["reset"] else ""
                lines.append(
                    f"  {marker} cycle {row['cycle']:>4}{reset} "
                    f"in={_fmt_values(row['inputs'])} "
                    f"dut={_fmt_values(row['dut'])} "
                    f"ref={_fmt_values(row['ref'])}")
        for e in cls.evidence[:5]:
            lines.append(f"    cycle {e.cycle} port {e.port}: "
                         f"ref={e.ref_value} dut={e.dut_value}")
        if excerpt:
            lines.append("  stimulus fixes applied to this case:")
            for e in excerpt:
                lines.append(f"    cycle {e.cycle} port {e.port}: "
                             f"{e.original} -> {e.fixed} ({e.rule})")
        for note in cls.notes:
            lines.append(f"  note: {note}")
        lines.append(f"  hint: {_HINTS.get(cls.kind, '')}")

    if suite is not None:
        lines.append("")
        lines.append(f"stimuli: module {suite.module_name}, "
                     f"{len(suite.cases)} case(s)")

    text = "\n".join(lines) + "\n"
    return VerificationReport(cases=tuple(case_results), passed=all_pass,
                              text=text)


def _fmt_values(values: dict | None) -> str:
    if values is None:
        return "-"
    return "{" + ",".join(f"{k}:{v}" for k, v in values.items()) + "}"
