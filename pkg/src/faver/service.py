"""HTTP service wrapping the verification pipeline.

Every pipeline stage is an endpoint taking file *contents* (spec text,
HDL source, stimuli/trace JSON) so the service holds no per-client state;
the CLI is a thin client of these endpoints.  Run standalone with
``uvicorn faver.service:app``.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__, analytics, cosim, diagnose, loop, stimgen, vcd
from .errors import (FaverError, GeneratorError, ProtocolError,
                     TransportError)
from .genclient import GeneratorClient, HttpChatClient, PromptProfile, ScriptedMockClient
from .rtlsim import elaborate, parse_hdl, run_stimuli
from .specmodel import (DesignSpec, VerificationSpec, build_verification_spec,
                        derive_verification_spec, design_spec_to_json_obj,
                        parse_design_spec, validate_port_preservation,
                        verification_spec_from_json_obj,
                        verification_spec_to_json_obj)
from .refmodel import render_template

app = FastAPI(title="faver", version=__version__)


# ---------------------------------------------------------------------------
# shared request fragments
# ---------------------------------------------------------------------------

class GeneratorConfig(BaseModel):
    kind: Literal["mock", "http"]
    fixture_dir: str | None = None
    endpoint: str | None = None
    model_name: str | None = None
    auth_token_env: str = "FAVER_API_TOKEN"
    timeout: float = 120.0
    prompt_dir: str | None = None

    def build(self) -> GeneratorClient:
        profile = (PromptProfile("custom", Path(self.prompt_dir))
                   if self.prompt_dir else PromptProfile())
        if self.kind == "mock":
            if not self.fixture_dir:
                raise GeneratorError("mock generator requires fixture_dir")
            return ScriptedMockClient(self.fixture_dir, prompt_profile=profile)
        if not self.endpoint or not self.model_name:
            raise GeneratorError("http generator requires endpoint and model_name")
        return HttpChatClient(self.endpoint, self.model_name,
                              auth_token_env=self.auth_token_env,
                              timeout=self.timeout, prompt_profile=profile)


class RunnerConfig(BaseModel):
    """External reference-model runner command; {model} and {portspec}
    placeholders are replaced with server-local file paths."""
    argv: list[str] = Field(
        default_factory=lambda: [sys.executable, "-m", "faver_runner",
                                 "{model}", "{portspec}"])


class CoSimSettings(BaseModel):
    latency_offset: int = 0
    max_cycles: int = 10_000
    abort_suite_on_fault: bool = False

    def build(self) -> cosim.CoSimConfig:
        return cosim.CoSimConfig(latency_offset=self.latency_offset,
                                 max_cycles=self.max_cycles,
                                 abort_suite_on_fault=self.abort_suite_on_fault)


class ClassifierSettings(BaseModel):
    max_offset: int = 8
    min_match_fraction: float = 0.95
    window: int = 8

    def build(self) -> diagnose.ClassifierParams:
        return diagnose.ClassifierParams(max_offset=self.max_offset,
                                         min_match_fraction=self.min_match_fraction,
                                         window=self.window)


def _vspec_from_payload(spec_text: str,
                        vspec_obj: dict | None) -> tuple[DesignSpec, VerificationSpec]:
    design = parse_design_spec(spec_text)
    if vspec_obj is not None:
        return design, verification_spec_from_json_obj(vspec_obj)
    return design, derive_verification_spec(design)


# ---------------------------------------------------------------------------
# endpoints
# ---------------------------------------------------------------------------

@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


class ParseSpecRequest(BaseModel):
    text: str


@app.post("/spec/parse")
def spec_parse(req: ParseSpecRequest) -> dict:
    design = parse_design_spec(req.text)
    return {"design": design_spec_to_json_obj(design)}


class VerificationSpecRequest(BaseModel):
    spec_text: str
    generator: GeneratorConfig


@app.post("/spec/verification")
def spec_verification(req: VerificationSpecRequest) -> dict:
    design = parse_design_spec(req.spec_text)
    gen = req.generator.build()
    vspec = build_verification_spec(design, gen)
    verdict = validate_port_preservation(design, vspec)
    return {
        "vspec": verification_spec_to_json_obj(vspec),
        "preservation": {"passed": verdict.passed, "diffs": list(verdict.diffs)},
    }


class PreservationRequest(BaseModel):
    spec_text: str
    vspec: dict


@app.post("/spec/preservation")
def spec_preservation(req: PreservationRequest) -> dict:
    design = parse_design_spec(req.spec_text)
    vspec = verification_spec_from_json_obj(req.vspec)
    verdict = validate_port_preservation(design, vspec)
    return {"passed": verdict.passed, "diffs": list(verdict.diffs)}


class TemplateRequest(BaseModel):
    spec_text: str
    vspec: dict | None = None


@app.post("/template")
def template(req: TemplateRequest) -> dict:
    _design, vspec = _vspec_from_payload(req.spec_text, req.vspec)
    tmpl = render_template(vspec)
    return {
        "stateVars": [{"name": n, "width": w, "resetValue": v}
                      for n, w, v in tmpl.state_vars],
        "stepInputs": list(tmpl.step_inputs),
        "stepOutputs": list(tmpl.step_outputs),
        "helperStubs": list(tmpl.helper_stubs),
        "renderedText": tmpl.rendered_text,
    }


class SimRequest(BaseModel):
    hdl: str
    suite: dict | None = None          # stimuli-suite JSON
    cycles: list[dict[str, int]] | None = None  # or one bare cycle list


@app.post("/sim")
def sim(req: SimRequest) -> dict:
    ast = parse_hdl(req.hdl)
    if (req.suite is None) == (req.cycles is None):
        raise FaverError("provide exactly one of suite or cycles")
    if req.cycles is not None:
        trace = run_stimuli(elaborate(ast), req.cycles)
        return {"trace": trace.to_json_obj()}
    suite = stimgen.StimulusSuite.from_json_obj(req.suite)
    traces = {}
    for case in suite.cases:
        inst = elaborate(ast)
        if case.async_reset_pre_assert and case.cycles:
            inst.apply_async_reset(case.cycles[0])
        traces[case.name] = run_stimuli(inst, list(case.cycles)).to_json_obj()
    return {"traces": traces}


class StimuliRequest(BaseModel):
    spec_text: str
    generator: GeneratorConfig


@app.post("/stimuli")
def stimuli(req: StimuliRequest) -> dict:
    design = parse_design_spec(req.spec_text)
    gen = req.generator.build()
    vspec = build_verification_spec(design, gen)
    suite, plan, raw, refined = stimgen.build_suite(vspec, gen)
    return {
        "vspec": verification_spec_to_json_obj(vspec),
        "suite": suite.to_json_obj(),
        "raw": stimgen.raw_stimuli_to_json_obj(raw, design.module_name),
        "fixLog": stimgen.fix_log_to_json_obj(refined.fix_log),
        "plan": [{"name": c.name,
                  "targetedFunctionality": c.targeted_functionality,
                  "rationale": c.rationale,
                  "requestedCycles": c.requested_cycles} for c in plan.cases],
    }


class CoSimRequest(BaseModel):
    spec_text: str
    vspec: dict | None = None
    hdl: str | None = None
    dut_traces: dict[str, dict] | None = None  # case name -> CycleTrace JSON
    suite: dict
    runner: RunnerConfig
    cosim: CoSimSettings = CoSimSettings()
    classifier: ClassifierSettings = ClassifierSettings()
    jobs: int = 1


@app.post("/cosim")
def cosim_endpoint(req: CoSimRequest) -> dict:
    from .trace import CycleTrace

    _design, vspec = _vspec_from_payload(req.spec_text, req.vspec)
    suite = stimgen.StimulusSuite.from_json_obj(req.suite)
    if (req.hdl is None) == (req.dut_traces is None):
        raise FaverError("provide exactly one of hdl or dut_traces")
    if req.hdl is not None:
        dut_factory = cosim.interpreter_dut_factory(parse_hdl(req.hdl))
    else:
        recorded = {name: CycleTrace.from_json_obj(obj)
                    for name, obj in req.dut_traces.items()}
        dut_factory = cosim.recorded_dut_factory(recorded)

    from .refmodel import RefModelHandle
    argv = req.runner.argv

    def model_factory() -> RefModelHandle:
        return RefModelHandle.external(argv, vspec)

    params = req.classifier.build()
    traces = cosim.run_suite(dut_factory, model_factory, suite, vspec,
                             req.cosim.build(), jobs=req.jobs)
    results = [(t, diagnose.classify(t, params)) for t in traces]
    report = diagnose.render_report(results, suite, None, params)
    return {
        "passed": report.passed,
        "traces": [t.to_json_obj() for t in traces],
        "classifications": [c.to_json_obj() for _t, c in results],
        "report": report.to_json_obj(),
    }


class ClassifyRequest(BaseModel):
    trace: dict  # PairedTrace JSON
    classifier: ClassifierSettings = ClassifierSettings()


@app.post("/classify")
def classify_endpoint(req: ClassifyRequest) -> dict:
    trace = cosim.PairedTrace.from_json_obj(req.trace)
    result = diagnose.classify(trace, req.classifier.build())
    return {"classification": result.to_json_obj()}


class ReportRequest(BaseModel):
    traces: list[dict]
    classifier: ClassifierSettings = ClassifierSettings()


@app.post("/report")
def report_endpoint(req: ReportRequest) -> dict:
    params = req.classifier.build()
    traces = [cosim.PairedTrace.from_json_obj(t) for t in req.traces]
    results = [(t, diagnose.classify(t, params)) for t in traces]
    report = diagnose.render_report(results, None, None, params)
    return {"passed": report.passed, "report": report.to_json_obj()}


class ParseVcdRequest(BaseModel):
    spec_text: str
    vcd_text: str


@app.post("/vcd/parse")
def vcd_parse(req: ParseVcdRequest) -> dict:
    design = parse_design_spec(req.spec_text)
    clock = design.clock_port
    if clock is None:
        raise FaverError("design spec declares no clock port")
    ports = [p for p in design.ports if p is not clock]
    trace = vcd.parse_vcd(req.vcd_text, ports, clock.name)
    return {"trace": trace.to_json_obj()}


class AnalyticsRequest(BaseModel):
    x: float
    a: float
    b: float
    c: float | None = None
    d: float | None = None
    n_attempts: int = loop.DEFAULT_MAX_ATTEMPTS
    trials: int = 0  # 0: skip Monte Carlo
    seed: int = 0


@app.post("/analytics/model")
def analytics_model(req: AnalyticsRequest) -> dict:
    p = analytics.AnalyticParams(x=req.x, a=req.a, b=req.b, c=req.c, d=req.d)
    out: dict[str, Any] = {
        "sysSuccessRate": analytics.sys_success_rate(p),
        "feedbackTrueRate": analytics.feedback_true_rate(p),
        "finiteHorizonSuccessRate":
            analytics.finite_horizon_success_rate(p, req.n_attempts),
        "nAttempts": req.n_attempts,
    }
    if req.trials > 0:
        mc = analytics.monte_carlo_system(p, req.n_attempts, req.trials, req.seed)
        out["monteCarlo"] = {"rate": mc.rate, "halfWidth99": mc.half_width,
                             "trials": mc.trials, "seed": mc.seed}
    return out


class SessionRequest(BaseModel):
    spec_text: str
    generator: GeneratorConfig
    runner: RunnerConfig | None = None
    max_attempts: int = loop.DEFAULT_MAX_ATTEMPTS
    seed: int = 0
    out_dir: str | None = None  # server-local artifact directory
    cosim: CoSimSettings = CoSimSettings()
    classifier: ClassifierSettings = ClassifierSettings()


@app.post("/session/run")
def session_run(req: SessionRequest) -> dict:
    import tempfile

    design = parse_design_spec(req.spec_text)
    gen = req.generator.build()
    runner = req.runner or RunnerConfig()
    workdir = Path(req.out_dir) / "model" if req.out_dir else \
        Path(tempfile.mkdtemp(prefix="faver-model-"))
    backend = loop.RunnerModelBackend(runner.argv, workdir)
    outcome = loop.run_session(
        design, gen, backend,
        max_attempts=req.max_attempts, seed=req.seed,
        cfg=req.cosim.build(), params=req.classifier.build(),
        out_dir=req.out_dir)
    return {"outcome": outcome.to_json_obj(), "passed": outcome.passed}


class MetricsRequest(BaseModel):
    outcomes: list[dict]       # SessionOutcome JSON objects
    ground_truth: list[list[bool]]


@app.post("/metrics")
def metrics_endpoint(req: MetricsRequest) -> dict:
    outcomes = [_outcome_from_json(o) for o in req.outcomes]
    m = loop.compute_metrics(outcomes, req.ground_truth)
    return m.to_json_obj()


def _outcome_from_json(obj: dict) -> loop.SessionOutcome:
    attempts = [
        loop.AttemptRecord(
            index=a["index"], rtl_source=a.get("rtlSource", ""),
            passed=bool(a["passed"]), report_text=a.get("reportText", ""),
            classifications=tuple(tuple(c) for c in a.get("classifications", [])),
            error=a.get("error"))
        for a in obj["attempts"]
    ]
    return loop.SessionOutcome(
        attempts=attempts,
        selected_index=obj["selectedIndex"],
        selection_mode=obj.get("selectionMode"),
        rng_seed=obj.get("rngSeed", 0),
        max_attempts=obj.get("maxAttempts", max(len(attempts), 1)),
    )


# ---------------------------------------------------------------------------
# error mapping
# ---------------------------------------------------------------------------

@app.exception_handler(FaverError)
def faver_error_handler(_request: Request, exc: FaverError) -> JSONResponse:
    status = 502 if isinstance(exc, (TransportError, ProtocolError)) else 422
    return JSONResponse(
        status_code=status,
        content={"error": type(exc).__name__, "message": str(exc)},
    )
