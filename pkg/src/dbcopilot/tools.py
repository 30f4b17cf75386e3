"""Diagnostic tool registry: schemas, two-step selection and parameter
filling, and REST invocation.

Tool selection deliberately reuses the retrieval pipeline over a mini
knowledge base holding one chunk per tool description, so the same hybrid
ranking plus below-zero rerank drop applies to tools and documents alike.
Parameter filling is cheapest-first: explicitly supplied session values,
then typed pattern rules over the context, then tree-author hints, then
LLM extraction; anything still missing is surfaced to the user rather
than guessed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import DuplicateName, ToolNotFound, TypeMismatch, UnboundArguments
from .kb import Chunk, KnowledgeBase, content_hash
from .llm import Backend, ChatMessage
from .retrieval import Retriever, tokenize

PARAM_TYPES = ("string", "int", "float", "enum")

# context words that commonly stand in for a parameter name
PARAM_ALIASES = {
    "db": "db_name",
    "database": "db_name",
    "dbname": "db_name",
    "metric_name": "metric",
    "statement": "sql",
    "query": "sql",
    "topk": "top_k",
}

_KV_VALUE = r"('([^']*)'|\"([^\"]*)\"|([^\s,;]+))"
_SQL_RE = re.compile(
    r"['\"]((?:SELECT|INSERT|UPDATE|DELETE|CREATE|DROP|ALTER|WITH)\b[^'\"]*)['\"]",
    re.IGNORECASE,
)
_DB_PHRASE_RE = re.compile(r"\b(?:database|db)\s+([A-Za-z_][\w$]*)", re.IGNORECASE)


@dataclass
class ParamSpec:
    name: str
    type: str = "string"
    required: bool = True
    enum_values: list[str] | None = None

    def __post_init__(self) -> None:
        if self.type not in PARAM_TYPES:
            raise ValueError(f"unknown param type {self.type!r}")
        if self.type == "enum" and not self.enum_values:
            raise ValueError(f"enum param {self.name!r} needs enum_values")


@dataclass
class ToolDescriptor:
    name: str
    description: str
    params: list[ParamSpec] = field(default_factory=list)
    endpoint: str = ""

    def __post_init__(self) -> None:
        if not self.endpoint:
            self.endpoint = f"/tools/{self.name}"
        # required params listed before optional ones, original order otherwise
        self.params = ([p for p in self.params if p.required]
                       + [p for p in self.params if not p.required])

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolDescriptor":
        return cls(
            name=raw["name"],
            description=raw["description"],
            params=[ParamSpec(
                name=p["name"],
                type=p.get("type", "string"),
                required=bool(p.get("required", True)),
                enum_values=p.get("enum_values"),
            ) for p in raw.get("params", [])],
            endpoint=raw.get("endpoint", ""),
        )


@dataclass
class ToolCall:
    tool_name: str
    arguments: dict[str, object]
    session_id: str = ""


@dataclass
class ToolResult:
    tool_name: str
    status: str  # ok | error
    raw: object
    normalized_text: str
    metrics: list[tuple[str, list[tuple[object, float]]]] | None = None

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "status": self.status,
            "raw": self.raw,
            "normalized_text": self.normalized_text,
            "metrics": [[name, [list(p) for p in points]] for name, points in self.metrics]
            if self.metrics else None,
        }


@dataclass
class BoundArguments:
    values: dict[str, object]


@dataclass
class MissingParams:
    params: list[ParamSpec]


@dataclass
class ToolSession:
    """Per-conversation scratch state: user-supplied parameter values and
    pause/resume bookkeeping owned by traversals."""

    session_id: str
    provided_params: dict[str, object] = field(default_factory=dict)
    state: dict = field(default_factory=dict)


class ToolRegistry:
    """Immutable-after-startup name -> descriptor map."""

    def __init__(self, base_url: str | None = None):
        self.base_url = base_url
        self._tools: dict[str, ToolDescriptor] = {}
        self._retriever: Retriever | None = None
        self._chunk_to_tool: dict[str, str] = {}

    def register_tool(self, descriptor: ToolDescriptor) -> None:
        if descriptor.name in self._tools:
            raise DuplicateName(f"tool already registered: {descriptor.name}")
        self._tools[descriptor.name] = descriptor
        self._retriever = None

    def get(self, name: str) -> ToolDescriptor | None:
        return self._tools.get(name)

    def list_tools(self) -> list[ToolDescriptor]:
        return list(self._tools.values())

    def __len__(self) -> int:
        return len(self._tools)

    def subset(self, names: list[str]) -> "ToolRegistry":
        sub = ToolRegistry(base_url=self.base_url)
        for name in names:
            descriptor = self._tools.get(name)
            if descriptor is not None:
                sub.register_tool(descriptor)
        return sub

    @classmethod
    def from_file(cls, path: str | Path, base_url: str | None = None) -> "ToolRegistry":
        registry = cls(base_url=base_url)
        for raw in json.loads(Path(path).read_text(encoding="utf-8")):
            registry.register_tool(ToolDescriptor.from_dict(raw))
        return registry

    def description_retriever(self) -> Retriever:
        """Mini-KB over tool descriptions, one single-chunk doc per tool."""
        if self._retriever is None:
            chunks = []
            self._chunk_to_tool = {}
            for descriptor in self._tools.values():
                text = f"{descriptor.name}: {descriptor.description}"
                chunk = Chunk(
                    chunk_id=f"tool-{descriptor.name}:0000",
                    text=text,
                    content_hash=content_hash(text),
                    version_tag="tools",
                    source="tool-registry",
                )
                chunks.append(chunk)
                self._chunk_to_tool[chunk.chunk_id] = descriptor.name
            self._retriever = Retriever(KnowledgeBase(chunks))
        return self._retriever


def select_tools(context_text: str, registry: ToolRegistry, k: int) -> list[ToolDescriptor]:
    """Rank tools for a context via hybrid retrieval over their usage text;
    candidates reranked below zero are dropped, so [] is a valid answer."""
    if len(registry) == 0 or not context_text.strip():
        return []
    retriever = registry.description_retriever()
    results = retriever.retrieve(context_text, k)
    selected = []
    for item in results:
        tool_name = registry._chunk_to_tool.get(item.chunk_id)
        if tool_name is not None:
            selected.append(registry.get(tool_name))
    return selected


# ---------------------------------------------------------------------------
# parameter filling

def _coerce(spec: ParamSpec, value: object) -> object:
    if spec.type == "string":
        return str(value)
    if spec.type == "int":
        try:
            return int(str(value), 10)
        except ValueError as exc:
            raise TypeMismatch(f"param {spec.name!r}: {value!r} is not an int") from exc
    if spec.type == "float":
        try:
            return float(str(value))
        except ValueError as exc:
            raise TypeMismatch(f"param {spec.name!r}: {value!r} is not a float") from exc
    value = str(value)
    if value not in (spec.enum_values or []):
        raise TypeMismatch(f"param {spec.name!r}: {value!r} not in {spec.enum_values}")
    return value


def _extract_from_patterns(tool: ToolDescriptor, context_text: str) -> dict[str, str]:
    found: dict[str, str] = {}
    param_names = {p.name for p in tool.params}

    # targeted key=value / key: value search per parameter (plus its aliases),
    # so unrelated colons in prose cannot swallow a real binding
    for spec in tool.params:
        keys = [spec.name] + [alias for alias, target in PARAM_ALIASES.items()
                              if target == spec.name]
        pattern = re.compile(
            r"\b(?:" + "|".join(re.escape(k) for k in keys) + r")\s*[:=]\s*" + _KV_VALUE,
            re.IGNORECASE,
        )
        m = pattern.search(context_text)
        if m:
            if m.group(2) is not None:
                value = m.group(2)
            elif m.group(3) is not None:
                value = m.group(3)
            else:
                value = m.group(4).rstrip(":,.?!;)]}")
            found[spec.name] = value

    if "sql" in param_names and "sql" not in found:
        m = _SQL_RE.search(context_text)
        if m:
            found["sql"] = m.group(1)

    if "db_name" in param_names and "db_name" not in found:
        m = _DB_PHRASE_RE.search(context_text)
        if m:
            found["db_name"] = m.group(1)

    context_tokens = set(tokenize(context_text))
    for spec in tool.params:
        if spec.type == "enum" and spec.name not in found:
            for candidate in spec.enum_values or []:
                if candidate.lower() in context_tokens:
                    found[spec.name] = candidate
                    break
    return found


def _extract_with_llm(tool: ToolDescriptor, missing: list[ParamSpec],
                      context_text: str, llm: Backend) -> dict[str, object]:
    wanted = ", ".join(f"{p.name} ({p.type})" for p in missing)
    try:
        reply = llm.complete([
            ChatMessage("system",
                        "Extract tool argument values from the context. Reply with "
                        "a JSON object containing only the parameters you can find; "
                        "omit anything not present. Never invent values."),
            ChatMessage("user", f"Tool: {tool.name}\nParameters: {wanted}\n"
                                f"Context: {context_text}"),
        ])
    except Exception:
        return {}
    m = re.search(r"\{.*\}", reply, re.DOTALL)
    if not m:
        return {}
    try:
        parsed = json.loads(m.group(0))
    except json.JSONDecodeError:
        return {}
    return parsed if isinstance(parsed, dict) else {}


def fill_parameters(tool: ToolDescriptor, context_text: str,
                    session: ToolSession | None = None,
                    llm: Backend | None = None,
                    hints: dict[str, str] | None = None) -> BoundArguments | MissingParams:
    """Bind arguments from session values, pattern rules, hints, then LLM.

    Unresolvable required parameters are returned as ``MissingParams`` for
    user elicitation, never guessed. A supplied value of the wrong type
    raises ``TypeMismatch``.
    """
    bound: dict[str, object] = {}

    if session is not None:
        for spec in tool.params:
            if spec.name in session.provided_params:
                bound[spec.name] = _coerce(spec, session.provided_params[spec.name])

    extracted = _extract_from_patterns(tool, context_text)
    for spec in tool.params:
        if spec.name not in bound and spec.name in extracted:
            bound[spec.name] = _coerce(spec, extracted[spec.name])

    for spec in tool.params:
        if spec.name not in bound and hints and spec.name in hints:
            bound[spec.name] = _coerce(spec, hints[spec.name])

    missing = [p for p in tool.params if p.required and p.name not in bound]
    if missing and llm is not None:
        llm_found = _extract_with_llm(tool, missing, context_text, llm)
        for spec in missing:
            if spec.name in llm_found:
                bound[spec.name] = _coerce(spec, llm_found[spec.name])
        missing = [p for p in tool.params if p.required and p.name not in bound]

    if missing:
        return MissingParams(missing)
    return BoundArguments(bound)


# ---------------------------------------------------------------------------
# invocation

def normalize_result(tool_name: str, status: str, data: object, message: str) -> str:
    """Render a raw tool payload into the unified text form."""
    if status != "ok":
        return f"{tool_name} error: {message or 'invocation failed'}"
    parts: list[str] = []
    if isinstance(data, dict):
        if data.get("summary"):
            parts.append(str(data["summary"]))
        for finding in data.get("findings", []) or []:
            parts.append(f"- {finding}")
        for metric in data.get("metrics", []) or []:
            if isinstance(metric, dict) and metric.get("name"):
                state = "abnormal" if metric.get("abnormal") else "normal"
                parts.append(f"metric {metric['name']} is {state}")
        if data.get("root_cause"):
            parts.append(f"root cause: {data['root_cause']}")
        if data.get("recommendation"):
            parts.append(f"recommendation: {data['recommendation']}")
    if not parts:
        if message:
            parts.append(message)
        else:
            parts.append(f"{tool_name} completed with no findings")
    return f"{tool_name}: " + "\n".join(parts)


def _parse_metrics(data: object) -> list[tuple[str, list[tuple[object, float]]]] | None:
    if not isinstance(data, dict) or not isinstance(data.get("metrics"), list):
        return None
    series = []
    for metric in data["metrics"]:
        if not isinstance(metric, dict) or "name" not in metric:
            continue
        points = [(p[0], float(p[1])) for p in metric.get("points", []) if len(p) == 2]
        series.append((str(metric["name"]), points))
    return series or None


def invoke(call: ToolCall, registry: ToolRegistry, timeout_s: float = 10.0) -> ToolResult:
    """POST the bound arguments to the tool endpoint and normalize the reply.

    Transport failures become ``status=error`` results (the diagnosis trees
    branch on them); unknown tools and unbound required parameters are
    caller bugs and raise.
    """
    descriptor = registry.get(call.tool_name)
    if descriptor is None:
        raise ToolNotFound(call.tool_name)
    unbound = [p.name for p in descriptor.params
               if p.required and p.name not in call.arguments]
    if unbound:
        raise UnboundArguments(f"{call.tool_name}: missing {unbound}")
    if not registry.base_url:
        raise ValueError("registry has no base_url configured for invocation")

    url = registry.base_url.rstrip("/") + descriptor.endpoint
    try:
        resp = requests.post(url, json={"arguments": call.arguments}, timeout=timeout_s)
        body = resp.json()
    except Exception as exc:  # noqa: BLE001 - network failure is a modeled outcome
        return ToolResult(
            tool_name=call.tool_name,
            status="error",
            raw=None,
            normalized_text=f"{call.tool_name} error: request failed ({exc.__class__.__name__})",
        )
    status = body.get("status", "error")
    data = body.get("data")
    message = body.get("message", "")
    return ToolResult(
        tool_name=call.tool_name,
        status=status,
        raw=data,
        normalized_text=normalize_result(call.tool_name, status, data, message),
        metrics=_parse_metrics(data),
    )


class RegistryInvoker:
    """Callable (tool_name, arguments) -> ToolResult bound to one registry."""

    def __init__(self, registry: ToolRegistry, session_id: str = ""):
        self.registry = registry
        self.session_id = session_id

    def __call__(self, tool_name: str, arguments: dict[str, object]) -> ToolResult:
        return invoke(ToolCall(tool_name, arguments, self.session_id), self.registry)
