"""The design-with-verification session controller and system metrics.

A session runs the full pipeline: generate RTL, derive the verification
spec, build the reference model and refined stimuli once, then co-simulate
each candidate.  The first candidate passing verification is selected;
each failure feeds the verification report back into the next generation
prompt; after N consecutive failures one attempt is sampled uniformly
(seeded) as the fallback output.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import cosim, diagnose, stimgen
from .analytics import ConfusionCounts
from .errors import (FaverError, GeneratorError, HdlError, LengthMismatch,
                     SessionAborted, ValidationError)
from .genclient import GeneratorClient, PromptBundle, TaskKind, extract_code_block
from .refmodel import ModelTemplate, RefModelHandle, render_template
from .rtlsim import parse_hdl
from .specmodel import (DesignSpec, VerificationSpec, build_verification_spec,
                        format_design_spec, verification_spec_to_json)

DEFAULT_MAX_ATTEMPTS = 5


class ModelBackend:
    """Supplies per-case reference-model handles for one session."""

    def prepare(self, vspec: VerificationSpec, template: ModelTemplate,
                gen: GeneratorClient) -> None:
        """Called once per session before any co-simulation."""

    def handle_factory(self) -> Callable[[], RefModelHandle]:
        raise NotImplementedError


class NativeModelBackend(ModelBackend):
    """Harness-supplied in-process models (template filling is skipped;
    executing generated model text belongs to the external runner)."""

    def __init__(self, make_model: Callable[[], object]):
        self.make_model = make_model
        self._vspec: VerificationSpec | None = None

    def prepare(self, vspec, template, gen):
        self._vspec = vspec

    def handle_factory(self):
        vspec = self._vspec
        if vspec is None:
            raise FaverError("backend not prepared")
        return lambda: RefModelHandle.native(self.make_model(), vspec)


class RunnerModelBackend(ModelBackend):
    """Generator-filled model hosted by an external runner process.

    The template is rendered, sent to the generator for filling, and the
    completed model text is written next to the verification spec; the
    runner command receives both paths with ``{model}`` and ``{portspec}``
    placeholders substituted.
    """

    def __init__(self, runner_argv: list[str], workdir: str | Path):
        self.runner_argv = list(runner_argv)
        self.workdir = Path(workdir)
        self._argv: list[str] | None = None
        self._vspec: VerificationSpec | None = None

    def prepare(self, vspec, template, gen):
        bundle = PromptBundle.build(
            TaskKind.FILL_TEMPLATE,
            profile=gen.prompt_profile,
            vspec_json=verification_spec_to_json(vspec),
            scaffold=template.rendered_text,
        )
        response = gen.request(bundle)
        model_text, _ = extract_code_block(response, "python")
        self.workdir.mkdir(parents=True, exist_ok=True)
        model_path = self.workdir / "model.py"
        vspec_path = self.workdir / "vspec.json"
        model_path.write_text(model_text, encoding="utf-8")
        vspec_path.write_text(verification_spec_to_json(vspec), encoding="utf-8")
        self._argv = [arg.replace("{model}", str(model_path))
                         .replace("{portspec}", str(vspec_path))
                      for arg in self.runner_argv]
        self._vspec = vspec

    def handle_factory(self):
        argv, vspec = self._argv, self._vspec
        if argv is None or vspec is None:
            raise FaverError("backend not prepared")
        return lambda: RefModelHandle.external(argv, vspec)


@dataclass(frozen=True)
class AttemptRecord:
    index: int
    rtl_source: str
    passed: bool
    report_text: str
    classifications: tuple[tuple[str, str], ...] = ()  # (case, kind)
    error: str | None = None  # parse / interface failure

    def to_json_obj(self) -> dict:
        return {
            "index": self.index,
            "rtlSource": self.rtl_source,
            "passed": self.passed,
            "reportText": self.report_text,
            "classifications": [list(c) for c in self.classifications],
            "error": self.error,
        }


@dataclass
class SessionOutcome:
    attempts: list[AttemptRecord]
    selected_index: int | None
    selection_mode: str | None  # "passed_verification" | "exhaustion_sample"
    rng_seed: int
    max_attempts: int

    def __post_init__(self):
        if len(self.attempts) > self.max_attempts:
            raise ValueError("more attempts than the configured threshold")

    @property
    def selected(self) -> AttemptRecord | None:
        if self.selected_index is None:
            return None
        return self.attempts[self.selected_index]

    @property
    def passed(self) -> bool:
        return self.selection_mode == "passed_verification"

    def to_json_obj(self) -> dict:
        return {
            "attempts": [a.to_json_obj() for a in self.attempts],
            "selectedIndex": self.selected_index,
            "selectionMode": self.selection_mode,
            "rngSeed": self.rng_seed,
            "maxAttempts": self.max_attempts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)


def _interface_report(design: DesignSpec, ast) -> str | None:
    """Check the generated module against the declared interface."""
    problems: list[str] = []
    if ast.module_name != design.module_name:
        problems.append(f"module name '{ast.module_name}' != "
                        f"'{design.module_name}'")
    declared = {p.name: p for p in design.ports}
    actual = {d.name: d for d in ast.input_ports + ast.output_ports}
    for name, p in declared.items():
        d = actual.get(name)
        if d is None:
            problems.append(f"missing port '{name}'")
            continue
        want_dir = "input" if p.direction.value == "in" else "output"
        if d.kind != want_dir:
            problems.append(f"port '{name}': {d.kind}, expected {want_dir}")
        if d.width != p.width:
            problems.append(f"port '{name}': width {d.width}, expected {p.width}")
    for name in actual:
        if name not in declared:
            problems.append(f"extra port '{name}'")
    if not problems:
        return None
    return "interface mismatch: " + "; ".join(problems)


def _generate_rtl(gen: GeneratorClient, design: DesignSpec, attempt: int,
                  previous_rtl: str, previous_report: str) -> str:
    if attempt == 0:
        bundle = PromptBundle.build(
            TaskKind.GEN_RTL,
            profile=gen.prompt_profile,
            spec_text=format_design_spec(design),
        )
    else:
        bundle = PromptBundle.build(
            TaskKind.REFINE_RTL,
            profile=gen.prompt_profile,
            spec_text=format_design_spec(design),
            previous_rtl=previous_rtl,
            report=previous_report,
        )
    response = gen.request(bundle)
    source, _ = extract_code_block(response, "verilog")
    return source


def run_session(design: DesignSpec, gen: GeneratorClient,
                model_backend: ModelBackend,
                max_attempts: int = DEFAULT_MAX_ATTEMPTS, seed: int = 0,
                cfg: cosim.CoSimConfig | None = None,
                params: diagnose.ClassifierParams | None = None,
                out_dir: str | Path | None = None) -> SessionOutcome:
    """Run one design-with-verification session.

    The verification side (spec, model, stimuli) is built once, before
    the first candidate, and never regenerated from candidate output, so
    the reference cannot drift toward a faulty DUT across attempts.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    attempts: list[AttemptRecord] = []

    def abort(exc: Exception) -> SessionAborted:
        partial = SessionOutcome(attempts=attempts, selected_index=None,
                                 selection_mode=None, rng_seed=seed,
                                 max_attempts=max_attempts)
        return SessionAborted(f"generator failed mid-session: {exc}",
                              partial_outcome=partial)

    try:
        vspec = build_verification_spec(design, gen)
        template = render_template(vspec)
        model_backend.prepare(vspec, template, gen)
        suite, plan, raw, refined = stimgen.build_suite(vspec, gen)
    except GeneratorError as exc:
        raise abort(exc) from exc

    if out_path is not None:
        (out_path / "vspec.json").write_text(
            verification_spec_to_json(vspec), encoding="utf-8")
        (out_path / "stimuli.json").write_text(suite.to_json(), encoding="utf-8")
        (out_path / "fixlog.json").write_text(
            json.dumps(stimgen.fix_log_to_json_obj(refined.fix_log), indent=2),
            encoding="utf-8")

    previous_rtl = ""
    previous_report = ""
    selected_index: int | None = None
    selection_mode: str | None = None

    for attempt in range(max_attempts):
        try:
            rtl_source = _generate_rtl(gen, design, attempt,
                                       previous_rtl, previous_report)
        except GeneratorError as exc:
            raise abort(exc) from exc
        previous_rtl = rtl_source

        record = _verify_attempt(attempt, rtl_source, design, vspec, suite,
                                 refined, model_backend, cfg, params)
        attempts.append(record)
        previous_report = record.report_text

        if out_path is not None:
            (out_path / f"attempt{attempt}.v").write_text(rtl_source,
                                                          encoding="utf-8")
            (out_path / f"report{attempt}.txt").write_text(record.report_text,
                                                           encoding="utf-8")

        if record.passed:
            selected_index = attempt
            selection_mode = "passed_verification"
            break

    if selection_mode is None:
        rng = random.Random(seed)
        selected_index = rng.randrange(len(attempts))
        selection_mode = "exhaustion_sample"

    outcome = SessionOutcome(attempts=attempts, selected_index=selected_index,
                             selection_mode=selection_mode, rng_seed=seed,
                             max_attempts=max_attempts)
    if out_path is not None:
        _write_session_artifacts(out_path, outcome, gen)
    return outcome


def _verify_attempt(attempt: int, rtl_source: str, design: DesignSpec,
                    vspec: VerificationSpec, suite: stimgen.StimulusSuite,
                    refined: stimgen.RefinedStimuli,
                    model_backend: ModelBackend,
                    cfg: cosim.CoSimConfig | None,
                    params: diagnose.ClassifierParams | None) -> AttemptRecord:
    try:
        ast = parse_hdl(rtl_source)
    except HdlError as exc:
        text = f"verification verdict: FAIL\nRTL did not parse: {exc}\n"
        return AttemptRecord(attempt, rtl_source, False, text, error="parse")

    interface_problem = _interface_report(design, ast)
    if interface_problem is not None:
        text = f"verification verdict: FAIL\n{interface_problem}\n"
        return AttemptRecord(attempt, rtl_source, False, text, error="interface")

    try:
        traces = cosim.run_suite(
            cosim.interpreter_dut_factory(ast),
            model_backend.handle_factory(),
            suite, vspec, cfg)
    except FaverError as exc:
        text = f"verification verdict: FAIL\nco-simulation failed: {exc}\n"
        return AttemptRecord(attempt, rtl_source, False, text, error="cosim")

    results = [(t, diagnose.classify(t, params)) for t in traces]
    report = diagnose.render_report(results, suite, refined.fix_log, params)
    classifications = tuple((t.case_name, c.kind) for t, c in results)
    return AttemptRecord(attempt, rtl_source, report.passed, report.text,
                         classifications=classifications)


def _write_session_artifacts(out_path: Path, outcome: SessionOutcome,
                             gen: GeneratorClient) -> None:
    with open(out_path / "session.jsonl", "w", encoding="utf-8") as fh:
        for a in outcome.attempts:
            fh.write(json.dumps({
                "attempt": a.index,
                "verdict": "pass" if a.passed else "fail",
                "classification": [list(c) for c in a.classifications],
                "report_path": f"report{a.index}.txt",
                "seed": outcome.rng_seed,
            }, sort_keys=True) + "\n")
    (out_path / "session.json").write_text(outcome.to_json(), encoding="utf-8")
    if outcome.selected is not None:
        (out_path / "selected.v").write_text(outcome.selected.rtl_source,
                                             encoding="utf-8")
    from .genclient import archive_transcript
    archive_transcript(gen, out_path / "transcript.jsonl")


# ---------------------------------------------------------------------------
# System metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SessionMetrics:
    sys_sel_pass1: float
    sys_inner_pass5: float
    confusion: ConfusionCounts

    def to_json_obj(self) -> dict:
        counts = self.confusion
        correct = counts.tp + counts.fn
        incorrect = counts.fp + counts.tn
        return {
            "sys_sel_pass1": self.sys_sel_pass1,
            "sys_inner_pass5": self.sys_inner_pass5,
            "tp": counts.tp, "fp": counts.fp,
            "tn": counts.tn, "fn": counts.fn,
            "rates": {
                "a_accept_given_correct": counts.tp / correct if correct else None,
                "b_accept_given_incorrect": counts.fp / incorrect if incorrect else None,
                "c_reject_given_incorrect": counts.tn / incorrect if incorrect else None,
                "d_reject_given_correct": counts.fn / correct if correct else None,
            },
        }


def compute_metrics(outcomes: list[SessionOutcome],
                    ground_truth: list[list[bool]]) -> SessionMetrics:
    """Score sessions against an external pass oracle.

    *ground_truth* holds one verdict per attempt per session, from a
    trusted benchmark testbench - never from this package's own verifier.
    sys_sel_pass@1 counts sessions whose selected design is truly correct;
    sys_inner_pass@5 counts sessions where any attempt is; the confusion
    matrix tallies verifier verdict against truth over all attempts.
    """
    if not outcomes:
        raise LengthMismatch("no session outcomes given")
    if len(outcomes) != len(ground_truth):
        raise LengthMismatch(
            f"{len(outcomes)} outcomes vs {len(ground_truth)} ground-truth sessions")
    tp = fp = tn = fn = 0
    sel_hits = 0
    inner_hits = 0
    for s, (outcome, truths) in enumerate(zip(outcomes, ground_truth)):
        if len(outcome.attempts) != len(truths):
            raise LengthMismatch(
                f"session {s}: {len(outcome.attempts)} attempts vs "
                f"{len(truths)} ground-truth verdicts")
        if outcome.selected_index is None:
            raise ValidationError(f"session {s} has no selected attempt")
        if truths[outcome.selected_index]:
            sel_hits += 1
        if any(truths):
            inner_hits += 1
        for attempt, truth in zip(outcome.attempts, truths):
            if attempt.passed and truth:
                tp += 1
            elif attempt.passed and not truth:
                fp += 1
            elif not attempt.passed and not truth:
                tn += 1
            else:
                fn += 1
    n = len(outcomes)
    return SessionMetrics(
        sys_sel_pass1=sel_hits / n,
        sys_inner_pass5=inner_hits / n,
        confusion=ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn),
    )
