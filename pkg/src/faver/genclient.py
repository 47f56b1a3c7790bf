"""Pluggable text-generation client.

Two backends share one interface: a chat-style HTTP backend for real
models and a scripted mock that replays fixture files in deterministic
order, keyed by (task kind, attempt index).  Prompt wording lives in
editable text assets under ``faver/prompts/``, not in code.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from string import Template

import requests

from .errors import GeneratorTimeout, MissingFixture, TransportError

log = logging.getLogger(__name__)


class TaskKind(str, Enum):
    GEN_RTL = "gen_rtl"
    GEN_VERIFICATION_SPEC = "gen_verification_spec"
    FILL_TEMPLATE = "fill_template"
    PROPOSE_PLAN = "propose_plan"
    PROPOSE_STIMULI = "propose_stimuli"
    REFINE_RTL = "refine_rtl"


@dataclass(frozen=True)
class PromptProfile:
    """A named set of prompt templates, one ``<task>.txt`` per task kind."""

    name: str = "default"
    directory: Path | None = None  # None -> packaged assets

    def load(self, task: TaskKind) -> Template:
        if self.directory is not None:
            text = (self.directory / f"{task.value}.txt").read_text(encoding="utf-8")
        else:
            text = resources.files("faver.prompts").joinpath(
                f"{task.value}.txt").read_text(encoding="utf-8")
        return Template(text)


@dataclass(frozen=True)
class PromptBundle:
    task_kind: TaskKind
    rendered_prompt: str
    attachments: dict[str, str] = field(default_factory=dict)

    @classmethod
    def build(cls, task: TaskKind, profile: PromptProfile | None = None,
              **fields: str) -> "PromptBundle":
        """Render the profile's template for *task* with **fields**.

        Refinement prompts must embed the latest verification report; the
        template has a ``$report`` placeholder enforcing that.
        """
        profile = profile or PromptProfile()
        if task is TaskKind.REFINE_RTL and not fields.get("report"):
            raise ValueError("refine prompts require the previous verification report")
        rendered = profile.load(task).substitute(**fields)
        return cls(task_kind=task, rendered_prompt=rendered, attachments=dict(fields))


@dataclass
class RequestRecord:
    task_kind: TaskKind
    attempt_index: int
    prompt: str
    response: str


class GeneratorClient:
    """Base client: counts attempts per task kind and archives traffic."""

    def __init__(self, prompt_profile: PromptProfile | None = None):
        self.prompt_profile = prompt_profile or PromptProfile()
        self.transcript: list[RequestRecord] = []
        self._counters: dict[TaskKind, int] = {}

    def request(self, bundle: PromptBundle) -> str:
        attempt = self._counters.get(bundle.task_kind, 0)
        self._counters[bundle.task_kind] = attempt + 1
        response = self._send(bundle, attempt)
        self.transcript.append(RequestRecord(
            bundle.task_kind, attempt, bundle.rendered_prompt, response))
        return response

    def _send(self, bundle: PromptBundle, attempt: int) -> str:
        raise NotImplementedError


class ScriptedMockClient(GeneratorClient):
    """Replays fixture files laid out as ``<task_kind>/attempt<k>.<ext>``.

    Responses are consumed in deterministic order: the k-th request of a
    given task kind reads ``attempt<k>``, whatever its extension.
    """

    def __init__(self, fixture_dir: str | Path,
                 prompt_profile: PromptProfile | None = None):
        super().__init__(prompt_profile)
        self.fixture_dir = Path(fixture_dir)

    def _send(self, bundle: PromptBundle, attempt: int) -> str:
        task_dir = self.fixture_dir / bundle.task_kind.value
        matches = sorted(task_dir.glob(f"attempt{attempt}.*"))
        if not matches:
            raise MissingFixture(str(task_dir / f"attempt{attempt}.*"))
        return matches[0].read_text(encoding="utf-8")


class HttpChatClient(GeneratorClient):
    """Chat-completions-style JSON POST backend.

    The bearer token is read from the environment variable named by
    *auth_token_env* at request time; a semaphore caps concurrent
    requests across sessions sharing the client.
    """

    def __init__(self, endpoint: str, model_name: str,
                 auth_token_env: str = "FAVER_API_TOKEN",
                 timeout: float = 120.0, max_concurrency: int = 4,
                 prompt_profile: PromptProfile | None = None):
        super().__init__(prompt_profile)
        self.endpoint = endpoint
        self.model_name = model_name
        self.auth_token_env = auth_token_env
        self.timeout = timeout
        self._gate = threading.Semaphore(max_concurrency)

    def _send(self, bundle: PromptBundle, attempt: int) -> str:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": bundle.rendered_prompt}],
        }
        with self._gate:
            try:
                resp = requests.post(self.endpoint, json=payload,
                                     headers=headers, timeout=self.timeout)
            except requests.Timeout as exc:
                raise GeneratorTimeout(f"request timed out after {self.timeout}s") from exc
            except requests.RequestException as exc:
                raise TransportError(f"backend unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"backend returned HTTP {resp.status_code}: "
                                 f"{resp.text[:500]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            raise TransportError(f"malformed backend reply: {exc}") from exc


_FENCE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)


def extract_code_block(response: str, language_tag: str) -> tuple[str, list[str]]:
    """Pull the first fenced code block matching *language_tag*.

    Returns ``(text, warnings)``.  With no matching fence the whole
    response is returned and a warning notes the fallback; extra matching
    blocks are ignored with a warning.
    """
    warnings: list[str] = []
    matches = [m for m in _FENCE.finditer(response)
               if m.group(1).strip() in (language_tag, "")]
    tagged = [m for m in matches if m.group(1).strip() == language_tag]
    chosen = tagged or matches
    if not chosen:
        warnings.append(f"no fenced {language_tag} block found; using whole response")
        return response, warnings
    if len(chosen) > 1:
        warnings.append(f"{len(chosen)} candidate blocks found; using the first")
    for w in warnings:
        log.warning("%s", w)
    return chosen[0].group(2), warnings


def archive_transcript(client: GeneratorClient, path: str | Path) -> None:
    """Write the request/response transcript as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in client.transcript:
            fh.write(json.dumps({
                "task": rec.task_kind.value,
                "attempt": rec.attempt_index,
                "prompt": rec.prompt,
                "response": rec.response,
            }) + "\n")
