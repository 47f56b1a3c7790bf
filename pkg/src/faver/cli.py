"""Command-line client for the verification service.

Every command builds a request for one service endpoint and writes the
reply to files; by default the service app runs in-process, so no server
is needed, and ``--server URL`` points the same commands at a remote
instance.  Exit codes: 0 pass, 1 verification failure, 2 exhaustion
fallback, 64 usage error, 70 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_EXHAUSTED = 2
EXIT_USAGE = 64
EXIT_INTERNAL = 70


class ServiceClient:
    """Thin HTTP client; in-process ASGI transport unless --server given."""

    def __init__(self, server: str | None):
        if server:
            import httpx
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings
            with warnings.catch_warnings():
                # the in-process test transport import warns on some
                # starlette versions; it is irrelevant to CLI users
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app
            self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        body = resp.json()
        if resp.status_code != 200:
            raise ServiceFailure(resp.status_code, body)
        return body


class ServiceFailure(Exception):
    def __init__(self, status: int, body: dict):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {json.dumps(body)}")


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise click.UsageError(f"file not found: {path}")
    return p.read_text(encoding="utf-8")


def _load_config(config_path: str | None) -> dict:
    if not config_path:
        return {}
    try:
        return json.loads(_read(config_path))
    except ValueError as exc:
        raise click.UsageError(f"malformed config file: {exc}")


def _generator_payload(cfg: dict, mock_dir: str | None, endpoint: str | None,
                       model_name: str | None) -> dict:
    gen = dict(cfg.get("generator", {}))
    if mock_dir:
        gen = {"kind": "mock", "fixture_dir": mock_dir}
    if endpoint:
        gen = {"kind": "http", "endpoint": endpoint,
               "model_name": model_name or gen.get("model_name")}
    if not gen:
        raise click.UsageError(
            "no generator configured (--mock-dir, --endpoint or config file)")
    return gen


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL (default: run the service in-process).")
@click.option("--config", "config_path", default=None, metavar="FILE",
              help="JSON config file; flags override its fields.")
@click.pass_context
def main_group(ctx: click.Context, server: str | None, config_path: str | None):
    """Verify candidate RTL against high-level reference models."""
    ctx.ensure_object(dict)
    ctx.obj["client"] = ServiceClient(server)
    ctx.obj["config"] = _load_config(config_path)


@main_group.command()
@click.argument("spec_file")
@click.option("--mock-dir", default=None, help="Scripted-mock fixture directory.")
@click.option("--endpoint", default=None, help="Chat backend endpoint URL.")
@click.option("--model-name", default=None, help="Backend model name.")
@click.option("--runner-cmd", default=None,
              help="Reference-model runner argv (JSON list, {model}/{portspec} "
                   "placeholders).")
@click.option("-n", "--max-attempts", default=None, type=int,
              help="Regeneration threshold N (default 5).")
@click.option("--seed", default=None, type=int, help="Session RNG seed.")
@click.option("-o", "--out", "out_dir", default="faver-out",
              help="Artifact output directory.")
@click.pass_context
def run(ctx, spec_file, mock_dir, endpoint, model_name, runner_cmd,
        max_attempts, seed, out_dir):
    """Run the full generate-verify loop for SPEC_FILE."""
    cfg = ctx.obj["config"]
    payload = {
        "spec_text": _read(spec_file),
        "generator": _generator_payload(cfg, mock_dir, endpoint, model_name),
        "max_attempts": max_attempts if max_attempts is not None
            else cfg.get("max_attempts", 5),
        "seed": seed if seed is not None else cfg.get("seed", 0),
        "out_dir": str(Path(out_dir).resolve()),
        "cosim": cfg.get("cosim", {}),
        "classifier": cfg.get("classifier", {}),
    }
    if runner_cmd:
        payload["runner"] = {"argv": json.loads(runner_cmd)}
    elif cfg.get("runner"):
        payload["runner"] = cfg["runner"]
    body = ctx.obj["client"].post("/session/run", payload)
    outcome = body["outcome"]
    _write_json(Path(out_dir) / "outcome.json", outcome)
    mode = outcome["selectionMode"]
    click.echo(f"selected attempt {outcome['selectedIndex']} ({mode}); "
               f"artifacts in {out_dir}/")
    if mode == "passed_verification":
        ctx.exit(EXIT_PASS)
    ctx.exit(EXIT_EXHAUSTED)


@main_group.command()
@click.argument("hdl_file")
@click.argument("stimuli_file")
@click.option("-o", "--out", "out_file", default="trace.json")
@click.option("--csv", "as_csv", is_flag=True, help="Also write CSV next to JSON.")
@click.pass_context
def sim(ctx, hdl_file, stimuli_file, out_file, as_csv):
    """Simulate HDL_FILE over a stimuli suite; write the trace(s)."""
    payload = {"hdl": _read(hdl_file),
               "suite": json.loads(_read(stimuli_file))}
    body = ctx.obj["client"].post("/sim", payload)
    _write_json(Path(out_file), body.get("traces", body.get("trace")))
    if as_csv:
        from .trace import CycleTrace
        traces = body.get("traces") or {"trace": body["trace"]}
        for name, obj in traces.items():
            csv_path = Path(out_file).with_suffix(f".{name}.csv")
            csv_path.write_text(CycleTrace.from_json_obj(obj).to_csv(),
                                encoding="utf-8")
    click.echo(f"trace written to {out_file}")
    ctx.exit(EXIT_PASS)


@main_group.command()
@click.argument("spec_file")
@click.argument("stimuli_file")
@click.option("--hdl", "hdl_file", default=None, help="DUT HDL source file.")
@click.option("--dut-traces", default=None,
              help="Pre-recorded DUT traces JSON (case name -> trace).")
@click.option("--runner-cmd", required=True,
              help="Reference-model runner argv as a JSON list.")
@click.option("--latency-offset", default=0, type=int)
@click.option("--jobs", default=1, type=int)
@click.option("-o", "--out", "out_dir", default="cosim-out")
@click.pass_context
def cosim(ctx, spec_file, stimuli_file, hdl_file, dut_traces, runner_cmd,
          latency_offset, jobs, out_dir):
    """Co-simulate a DUT against a reference model over STIMULI_FILE."""
    cfg = ctx.obj["config"]
    if (hdl_file is None) == (dut_traces is None):
        raise click.UsageError("give exactly one of --hdl or --dut-traces")
    payload = {
        "spec_text": _read(spec_file),
        "suite": json.loads(_read(stimuli_file)),
        "runner": {"argv": json.loads(runner_cmd)},
        "cosim": {**cfg.get("cosim", {}), "latency_offset": latency_offset},
        "classifier": cfg.get("classifier", {}),
        "jobs": jobs,
    }
    if hdl_file:
        payload["hdl"] = _read(hdl_file)
    else:
        payload["dut_traces"] = json.loads(_read(dut_traces))
    body = ctx.obj["client"].post("/cosim", payload)
    out = Path(out_dir)
    _write_json(out / "paired_traces.json", body["traces"])
    _write_json(out / "report.json", body["report"])
    (out / "report.txt").write_text(body["report"]["text"], encoding="utf-8")
    click.echo(f"verdict: {'PASS' if body['passed'] else 'FAIL'}; "
               f"report in {out_dir}/")
    ctx.exit(EXIT_PASS if body["passed"] else EXIT_FAIL)


@main_group.command()
@click.argument("spec_file")
@click.option("--mock-dir", default=None)
@click.option("--endpoint", default=None)
@click.option("--model-name", default=None)
@click.option("-o", "--out", "out_dir", default="stimuli-out")
@click.pass_context
def stimuli(ctx, spec_file, mock_dir, endpoint, model_name, out_dir):
    """Generate the refined stimulus suite for SPEC_FILE."""
    cfg = ctx.obj["config"]
    payload = {
        "spec_text": _read(spec_file),
        "generator": _generator_payload(cfg, mock_dir, endpoint, model_name),
    }
    body = ctx.obj["client"].post("/stimuli", payload)
    out = Path(out_dir)
    _write_json(out / "stimuli.json", body["suite"])
    _write_json(out / "raw_stimuli.json", body["raw"])
    _write_json(out / "fixlog.json", body["fixLog"])
    _write_json(out / "plan.json", body["plan"])
    _write_json(out / "vspec.json", body["vspec"])
    click.echo(f"suite with {len(body['suite']['cases'])} case(s) in {out_dir}/")
    ctx.exit(EXIT_PASS)


@main_group.command()
@click.argument("paired_trace_file")
@click.option("--max-offset", default=8, type=int)
@click.option("--min-match-fraction", default=0.95, type=float)
@click.option("-o", "--out", "out_file", default="classification.json")
@click.pass_context
def classify(ctx, paired_trace_file, max_offset, min_match_fraction, out_file):
    """Classify the mismatch in a paired-trace JSON file."""
    payload = {
        "trace": json.loads(_read(paired_trace_file)),
        "classifier": {"max_offset": max_offset,
                       "min_match_fraction": min_match_fraction},
    }
    body = ctx.obj["client"].post("/classify", payload)
    _write_json(Path(out_file), body["classification"])
    click.echo(f"classification: {body['classification']['kind']}")
    ctx.exit(EXIT_PASS)


@main_group.command()
@click.option("-x", type=float, required=True, help="Generator success rate.")
@click.option("-a", type=float, required=True, help="P(accept | correct).")
@click.option("-b", type=float, required=True, help="P(accept | incorrect).")
@click.option("-c", type=float, default=None, help="P(reject | incorrect).")
@click.option("-d", type=float, default=None, help="P(reject | correct).")
@click.option("-n", "--max-attempts", default=5, type=int)
@click.option("--trials", default=0, type=int, help="Monte Carlo trials (0: skip).")
@click.option("--seed", default=0, type=int)
@click.option("-o", "--out", "out_file", default="analytics.json")
@click.pass_context
def model(ctx, x, a, b, c, d, max_attempts, trials, seed, out_file):
    """Evaluate the analytic loop model (and optionally Monte Carlo)."""
    payload = {"x": x, "a": a, "b": b, "c": c, "d": d,
               "n_attempts": max_attempts, "trials": trials, "seed": seed}
    body = ctx.obj["client"].post("/analytics/model", payload)
    click.echo(json.dumps(body, indent=2, sort_keys=True))
    _write_json(Path(out_file), body)
    ctx.exit(EXIT_PASS)


@main_group.command()
@click.argument("paired_traces_file")
@click.option("-o", "--out", "out_dir", default="report-out")
@click.pass_context
def report(ctx, paired_traces_file, out_dir):
    """Render a verification report from paired-trace JSON files."""
    traces = json.loads(_read(paired_traces_file))
    if isinstance(traces, dict):
        traces = [traces]
    body = ctx.obj["client"].post("/report", {"traces": traces})
    out = Path(out_dir)
    _write_json(out / "report.json", body["report"])
    (out / "report.txt").write_text(body["report"]["text"], encoding="utf-8")
    click.echo(f"verdict: {'PASS' if body['passed'] else 'FAIL'}")
    ctx.exit(EXIT_PASS if body["passed"] else EXIT_FAIL)


@main_group.command("parse-vcd")
@click.argument("spec_file")
@click.argument("vcd_file")
@click.option("-o", "--out", "out_file", default="trace.json")
@click.pass_context
def parse_vcd_cmd(ctx, spec_file, vcd_file, out_file):
    """Convert an external simulator's VCD into a cycle trace."""
    payload = {"spec_text": _read(spec_file), "vcd_text": _read(vcd_file)}
    body = ctx.obj["client"].post("/vcd/parse", payload)
    _write_json(Path(out_file), body["trace"])
    click.echo(f"trace written to {out_file}")
    ctx.exit(EXIT_PASS)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        rv = main_group.main(args=argv, standalone_mode=False, obj={})
        return rv if isinstance(rv, int) else EXIT_PASS
    except SystemExit as exc:
        if exc.code is None:
            return EXIT_PASS
        return exc.code if isinstance(exc.code, int) else EXIT_INTERNAL
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except ServiceFailure as exc:
        click.echo(json.dumps(exc.body, indent=2), err=True)
        return EXIT_USAGE if exc.status == 422 else EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
