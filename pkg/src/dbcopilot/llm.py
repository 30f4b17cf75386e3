"""Text-generation backends: a deterministic scripted mock and a generic
HTTP chat-completion client.

Every module that needs generation takes a ``Backend``; nothing else in
the engine performs LLM network calls. The scripted backend makes every
pipeline test a replayable fixture: the first script rule whose trigger
matches the last user message wins, otherwise the script's default
response is returned.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import BackendUnavailable, ScriptMissingDefault


@dataclass
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass
class BackendConfig:
    kind: str = "scripted"  # scripted | http
    script_file: str | None = None
    base_url: str | None = None
    model_name: str | None = None
    timeout_s: float = 30.0
    max_retries: int = 1

    def __post_init__(self) -> None:
        if self.kind == "scripted" and not self.script_file:
            raise ValueError("scripted backend requires script_file")
        if self.kind == "http" and not self.base_url:
            raise ValueError("http backend requires base_url")


class Backend:
    def complete(self, messages: list[ChatMessage]) -> str:
        raise NotImplementedError


@dataclass
class ScriptRule:
    trigger: str
    response: str
    is_regex: bool = False

    def matches(self, text: str) -> bool:
        if self.is_regex:
            return re.search(self.trigger, text, re.IGNORECASE) is not None
        return self.trigger.lower() in text.lower()


class ScriptedBackend(Backend):
    """First-match-wins canned responses keyed on the last user message."""

    def __init__(self, rules: list[ScriptRule], default: str):
        self.rules = rules
        self.default = default

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        rules: list[ScriptRule] = []
        default: str | None = None
        for entry in entries:
            if "default" in entry:
                default = entry["default"]
            else:
                rules.append(ScriptRule(
                    trigger=entry["trigger"],
                    response=entry["response"],
                    is_regex=bool(entry.get("is_regex", False)),
                ))
        if default is None:
            raise ScriptMissingDefault(f"{path}: script has no default response")
        return cls(rules, default)

    def complete(self, messages: list[ChatMessage]) -> str:
        last_user = ""
        for message in reversed(messages):
            if message.role == "user":
                last_user = message.content
                break
        for rule in self.rules:
            if rule.matches(last_user):
                return rule.response
        return self.default


class HttpBackend(Backend):
    """Minimal chat-completion client (OpenAI-style request/response)."""

    def __init__(self, base_url: str, model_name: str | None = None,
                 timeout_s: float = 30.0, max_retries: int = 1):
        self.base_url = base_url
        self.model_name = model_name
        self.timeout_s = timeout_s
        self.max_retries = max_retries

    def complete(self, messages: list[ChatMessage]) -> str:
        payload = {
            "model": self.model_name or "default",
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        }
        last_error: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                resp = requests.post(self.base_url, json=payload, timeout=self.timeout_s)
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - any transport/shape failure retries
                last_error = exc
        raise BackendUnavailable(f"LLM backend unreachable: {last_error}")


def make_backend(cfg: BackendConfig) -> Backend:
    if cfg.kind == "scripted":
        return ScriptedBackend.from_file(cfg.script_file)  # type: ignore[arg-type]
    if cfg.kind == "http":
        return HttpBackend(cfg.base_url, cfg.model_name,  # type: ignore[arg-type]
                           cfg.timeout_s, cfg.max_retries)
    raise ValueError(f"unknown backend kind: {cfg.kind!r}")


def backend_from_env(default_script: str | Path | None = None) -> Backend | None:
    """Build a backend from COPILOT_LLM_* environment variables.

    Returns None when nothing is configured and no default script is given,
    in which case callers fall back to rule-only behavior.
    """
    kind = os.environ.get("COPILOT_LLM_KIND")
    if kind == "http":
        return HttpBackend(
            base_url=os.environ["COPILOT_LLM_URL"],
            model_name=os.environ.get("COPILOT_LLM_MODEL"),
        )
    script = os.environ.get("COPILOT_LLM_SCRIPT") or default_script
    if kind == "scripted" or script:
        if not script:
            raise ValueError("COPILOT_LLM_KIND=scripted requires COPILOT_LLM_SCRIPT")
        return ScriptedBackend.from_file(script)
    return None


def complete(messages: list[ChatMessage], cfg: BackendConfig) -> str:
    return make_backend(cfg).complete(messages)
