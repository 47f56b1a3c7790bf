"""Host for generated reference models.

Loads one model file (untrusted, generator-written Python defining a
``Model`` class with ``reset()`` and ``step(<inputs>)``), then serves the
NDJSON stdio protocol until a close event:

    {"event":"reset"}                        -> {"ok":true}
    {"event":"step","inputs":{"<port>":v}}   -> {"ok":true,"outputs":{...}}
    {"event":"close"}                        -> {"ok":true}, exit 0

The first output line is a hello announcing wide-integer support:
{"hello":"faver-runner","proto":1,"wide":true}.  Integers within 64 bits
travel as JSON numbers, wider ones as decimal strings.  A model exception
produces {"ok":false,"error":...} with the traceback and the loop keeps
serving; a model file missing an entry point is fatal (error reply, exit
nonzero).  Process isolation is the containment boundary: the host grants
the model nothing beyond the interpreter it runs in.
"""

from __future__ import annotations

import argparse
import inspect
import json
import sys
import traceback

PROTO_VERSION = 1
_WIDE_LIMIT = 1 << 63


class LoadError(Exception):
    """Model file does not satisfy the template contract."""


def load_model(model_path: str, port_spec_path: str | None = None):
    """Exec the model file and instantiate its ``Model`` class.

    With a port spec, the step signature is checked against the declared
    data input ports so signature drift fails at load, not mid-run.
    """
    try:
        with open(model_path, "r", encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        raise LoadError(f"cannot read model file: {exc}") from exc

    namespace: dict = {"__name__": "faver_hosted_model"}
    try:
        exec(compile(source, model_path, "exec"), namespace)
    except Exception as exc:
        raise LoadError(f"model file failed to execute: "
                        f"{type(exc).__name__}: {exc}") from exc

    cls = namespace.get("Model")
    if cls is None or not inspect.isclass(cls):
        raise LoadError("model file defines no Model class")
    for entry in ("reset", "step"):
        if not callable(getattr(cls, entry, None)):
            raise LoadError(f"Model has no callable {entry}()")

    try:
        model = cls()
    except Exception as exc:
        raise LoadError(f"Model construction failed: "
                        f"{type(exc).__name__}: {exc}") from exc

    if port_spec_path is not None:
        expected = _data_input_ports(port_spec_path)
        params = [p for p in
                  inspect.signature(model.step).parameters.values()
                  if p.kind in (p.POSITIONAL_OR_KEYWORD, p.KEYWORD_ONLY)]
        names = [p.name for p in params]
        if names != expected:
            raise LoadError(
                f"step signature {names} does not match the declared "
                f"input ports {expected}")
    return model


def _data_input_ports(port_spec_path: str) -> list[str]:
    try:
        with open(port_spec_path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, ValueError) as exc:
        raise LoadError(f"cannot read port spec: {exc}") from exc
    return [
        p["name"] for p in spec.get("ports", [])
        if p.get("direction") == "in" and p.get("role", "data") == "data"
    ]


def _encode(value):
    if isinstance(value, int) and abs(value) >= _WIDE_LIMIT:
        return str(value)
    return value


def _decode(value):
    if isinstance(value, str):
        return int(value, 10)
    return value


def _error_reply(message: str) -> dict:
    return {"ok": False, "error": message}


def serve(model, stdin=None, stdout=None) -> int:
    """Single-threaded request loop; one reply line per request line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(obj: dict) -> None:
        stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")
        stdout.flush()

    emit({"hello": "faver-runner", "proto": PROTO_VERSION, "wide": True})

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            event = request.get("event")
        except (ValueError, AttributeError):
            emit(_error_reply(f"request is not a JSON object: {line[:200]}"))
            continue

        if event == "close":
            emit({"ok": True})
            return 0
        if event == "reset":
            try:
                model.reset()
            except Exception:
                emit(_error_reply(traceback.format_exc(limit=8)))
                continue
            emit({"ok": True})
        elif event == "step":
            inputs = request.get("inputs")
            if not isinstance(inputs, dict):
                emit(_error_reply("step request carries no inputs object"))
                continue
            try:
                decoded = {k: _decode(v) for k, v in inputs.items()}
                outputs = model.step(**decoded)
            except Exception:
                emit(_error_reply(traceback.format_exc(limit=8)))
                continue
            if not isinstance(outputs, dict):
                emit(_error_reply(
                    f"step returned {type(outputs).__name__}, expected dict"))
                continue
            emit({"ok": True,
                  "outputs": {k: _encode(v) for k, v in outputs.items()}})
        else:
            emit(_error_reply(f"unknown event {event!r}"))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="faver-runner",
        description="Serve a generated reference model over stdio.")
    parser.add_argument("model", help="Python file defining the Model class")
    parser.add_argument("portspec", nargs="?", default=None,
                        help="verification-spec JSON used to check the "
                             "step signature")
    args = parser.parse_args(argv)

    try:
        model = load_model(args.model, args.portspec)
    except LoadError as exc:
        sys.stdout.write(json.dumps(
            {"hello": "faver-runner", "proto": PROTO_VERSION, "wide": True})
            + "\n")
        sys.stdout.write(json.dumps(
            {"ok": False, "error": f"load error: {exc}"}) + "\n")
        sys.stdout.flush()
        return 3
    return serve(model)


if __name__ == "__main__":
    sys.exit(main())
