"""Multi-agent anomaly diagnosis.

A chief DBA agent recruits expert agents whose specialty descriptions best
match the alert, decomposes the matched runbook tree into per-expert task
queues, and round-robins the experts. Each expert step is two-phase: pick
the tool from usage descriptions (restricted to the expert's allowed
tools), extract its arguments, invoke, then reflect on the result to
conclude a finding, retry, or hand the thread to another expert via a
cross-review message. Findings aggregate into a root-cause report with an
evidence trail; the whole run is deterministic given scripted reflections
and fixed tool responses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .diagtree import DiagnosisTree, HistoricalCase, match_tree
from .errors import EmptyAlert, NoTreeMatched
from .kb import Chunk, KnowledgeBase, content_hash, fnv1a64
from .llm import Backend, ChatMessage
from .retrieval import Retriever, tokenize
from .tools import (BoundArguments, MissingParams, ParamSpec, ToolCall,
                    ToolRegistry, ToolResult, ToolSession, fill_parameters,
                    invoke, select_tools)

ROUND_LIMIT = 8
TASK_CAP = 6
RETRY_CAP = 2

REFLECT_PROMPT = (
    "You are a database diagnosis expert reviewing one tool invocation. "
    "Reply with exactly one line: 'CONCLUDED: <finding>' when the result "
    "answers the task, 'NEEDS_MORE: <next step>' when it does not, or "
    "'HANDOFF <agent_id>: <task description>' when another expert should "
    "take over."
)

_VERDICT_RE = re.compile(r"^\s*(CONCLUDED|NEEDS_MORE|HANDOFF)\s*([\w-]*)\s*:\s*(.*)$",
                         re.IGNORECASE | re.DOTALL)

FAMILY_GUIDELINES = {
    "cpu": "Emphasize CPU usage: which statements or processes spike CPU and why.",
    "io": "Emphasize disk I/O: which processes and SQL statements drive I/O pressure.",
    "lock": "Emphasize locking: waiting chains, blockers, and long transactions.",
    "slow_sql": "Emphasize slow SQL: offending statements, plans, and index options.",
    "other": "Summarize the observed evidence and the most likely cause.",
}

_FAMILY_HINTS = (
    ("lock", ("lock", "contention", "blocked", "deadlock")),
    ("cpu", ("cpu",)),
    ("io", ("io", "i/o", "disk", "ioutils")),
    ("slow_sql", ("slow", "sql", "query")),
)


def root_cause_family(text: str) -> str:
    tokens = set(tokenize(text)) | {text.lower()}
    joined = text.lower()
    for family, hints in _FAMILY_HINTS:
        if any(h in tokens or h in joined for h in hints):
            return family
    return "other"


# ---------------------------------------------------------------------------
# profiles and tasks

@dataclass
class AgentProfile:
    agent_id: str
    name: str
    description: str
    allowed_tools: list[str] = field(default_factory=list)
    role: str = "expert"  # chief | expert | generalist


def load_profiles(path: str | Path) -> list[AgentProfile]:
    return [AgentProfile(
        agent_id=raw["agent_id"],
        name=raw["name"],
        description=raw["description"],
        allowed_tools=list(raw.get("allowed_tools", [])),
        role=raw.get("role", "expert"),
    ) for raw in json.loads(Path(path).read_text(encoding="utf-8"))]


@dataclass
class DiagnosisTask:
    task_id: str
    assignee: str
    instruction: str
    status: str = "pending"  # pending | running | done | handed_off
    kind: str = "tool"       # tool | verify
    node_id: str | None = None
    hints: dict[str, str] = field(default_factory=dict)
    handoff_node_id: str | None = None
    attempts: int = 0


@dataclass
class CrossReviewMessage:
    from_agent: str
    to_agent: str
    payload: str
    suggested_tasks: list[DiagnosisTask] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.from_agent == self.to_agent:
            raise ValueError("cross-review messages must target another agent")


@dataclass
class StepOutcome:
    kind: str  # concluded | needs_more | handoff | missing_params
    finding: str = ""
    hint: str = ""
    to_agent: str | None = None
    payload: str = ""
    result: ToolResult | None = None
    missing: list[ParamSpec] = field(default_factory=list)


# ---------------------------------------------------------------------------
# expert assignment and task decomposition

def assign_experts(alert_text: str, profiles: list[AgentProfile],
                   k: int) -> list[AgentProfile]:
    """Rank expert profiles against the alert; positive reranks only, and
    the generalist profile when nothing matches."""
    experts = [p for p in profiles if p.role == "expert"]
    chunks = [Chunk(chunk_id=f"agent-{p.agent_id}:0000",
                    text=f"{p.name}. {p.description}",
                    content_hash=content_hash(p.description),
                    version_tag="agents", source="profiles")
              for p in experts]
    ranked: list[AgentProfile] = []
    if chunks:
        hits = Retriever(KnowledgeBase(chunks)).retrieve(alert_text, k)
        by_id = {f"agent-{p.agent_id}:0000": p for p in experts}
        ranked = [by_id[h.chunk_id] for h in hits if h.chunk_id in by_id]
    if ranked:
        return ranked
    generalists = [p for p in profiles if p.role == "generalist"]
    if generalists:
        return [generalists[0]]
    return [AgentProfile("generalist", "Generalist",
                         "General-purpose diagnosis across all tools.",
                         allowed_tools=[], role="generalist")]


def _hint_suffix(hints: dict[str, str]) -> str:
    if not hints:
        return ""
    rendered = []
    for key, value in sorted(hints.items()):
        value = str(value)
        rendered.append(f"{key}='{value}'" if " " in value else f"{key}={value}")
    return " (" + " ".join(rendered) + ")"


def decompose_tasks(alert: str, expert: AgentProfile,
                    tree: DiagnosisTree | None = None,
                    docs: list[str] | None = None,
                    llm: Backend | None = None) -> list[DiagnosisTask]:
    """Turn the matched runbook (or LLM-proposed steps) into a task queue.

    With a tree: one task per expected-path node this expert can execute,
    starting from the root, plus a free-form verification task. The first
    path node beyond the expert's tools is recorded as a handoff hint so
    the thread can continue on another expert.
    """
    if not alert.strip():
        raise EmptyAlert("alert text is empty")
    tasks: list[DiagnosisTask] = []
    if tree is not None:
        path = [n for n in tree.primary_path() if not n.is_leaf]
        prefix: list = []
        handoff_node = None
        for node in path:
            if node.tool_name in expert.allowed_tools:
                prefix.append(node)
            else:
                handoff_node = node.node_id
                break
        for i, node in enumerate(prefix):
            if i == 0:
                instruction = (f"Checking the {tree.title} with {node.tool_name}"
                               f"{_hint_suffix(node.argument_hints)}")
            else:
                instruction = (f"Run {node.tool_name} for {tree.title}"
                               f"{_hint_suffix(node.argument_hints)}")
            tasks.append(DiagnosisTask(
                task_id=f"{expert.agent_id}-t{i + 1}",
                assignee=expert.agent_id,
                instruction=instruction,
                node_id=node.node_id,
                hints=dict(node.argument_hints),
            ))
        if tasks and handoff_node is not None:
            tasks[-1].handoff_node_id = handoff_node
        tasks.append(DiagnosisTask(
            task_id=f"{expert.agent_id}-verify",
            assignee=expert.agent_id,
            instruction=f"Cross-check the collected evidence for {tree.title} "
                        f"and flag anything unexplained",
            kind="verify",
        ))
        return tasks[:TASK_CAP]

    if llm is not None:
        try:
            reply = llm.complete([
                ChatMessage("system", "Propose troubleshooting steps for the alert, "
                                      "one short step per line."),
                ChatMessage("user", f"Alert: {alert}\nExpert: {expert.name} "
                                    f"(tools: {', '.join(expert.allowed_tools)})"),
            ])
            for i, line in enumerate(ln.strip() for ln in reply.splitlines()):
                if line:
                    tasks.append(DiagnosisTask(
                        task_id=f"{expert.agent_id}-t{i + 1}",
                        assignee=expert.agent_id,
                        instruction=line,
                    ))
        except Exception:
            tasks = []
    if not tasks:
        tasks = [DiagnosisTask(
            task_id=f"{expert.agent_id}-t1",
            assignee=expert.agent_id,
            instruction=f"Investigate the alert with available diagnostics: {alert}",
        )]
    return tasks[:TASK_CAP]


# ---------------------------------------------------------------------------
# the expert step

def parse_verdict(reply: str) -> StepOutcome | None:
    m = _VERDICT_RE.match(reply.strip())
    if not m:
        return None
    verb = m.group(1).upper()
    if verb == "CONCLUDED":
        return StepOutcome(kind="concluded", finding=m.group(3).strip())
    if verb == "NEEDS_MORE":
        return StepOutcome(kind="needs_more", hint=m.group(3).strip())
    target = m.group(2).strip()
    if not target:
        return None
    return StepOutcome(kind="handoff", to_agent=target, payload=m.group(3).strip())


def expert_step(task: DiagnosisTask, llm: Backend | None, registry: ToolRegistry,
                session: ToolSession, expert: AgentProfile,
                context: str = "") -> StepOutcome:
    """Two-step tool reflection for one task.

    Select a tool from the expert's allowed subset, bind its arguments,
    invoke it, then reflect on the normalized result. Without an LLM the
    reflection falls back to deterministic rules: ok results conclude,
    errors ask for another attempt, and a pending handoff hint hands off.
    """
    if task.kind == "verify":
        return StepOutcome(kind="concluded",
                           finding=f"verified collected evidence: {task.instruction}")

    # selection sees the task wording only; accumulated findings would bias
    # the overlap scorer toward tools already used
    allowed = registry.subset(expert.allowed_tools)
    candidates = select_tools(task.instruction, allowed, k=3)
    if not candidates:
        return StepOutcome(kind="needs_more",
                           hint="no relevant tool for this step")
    tool = candidates[0]

    param_context = f"{context}\n{task.instruction}" if context else task.instruction
    binding = fill_parameters(tool, param_context, session=session, llm=llm,
                              hints=task.hints)
    if isinstance(binding, MissingParams):
        return StepOutcome(kind="missing_params", missing=binding.params)
    assert isinstance(binding, BoundArguments)
    result = invoke(ToolCall(tool.name, binding.values, session.session_id), registry)

    outcome: StepOutcome | None = None
    if llm is not None:
        try:
            reply = llm.complete([
                ChatMessage("system", REFLECT_PROMPT),
                ChatMessage("user", f"Task: {task.instruction}\nTool: {tool.name}\n"
                                    f"Result:\n{result.normalized_text}"),
            ])
            outcome = parse_verdict(reply)
        except Exception:
            outcome = None
    if outcome is None:
        if result.status != "ok":
            outcome = StepOutcome(kind="needs_more", hint=result.normalized_text)
        elif task.handoff_node_id is not None:
            outcome = StepOutcome(kind="handoff", to_agent=None,
                                  payload=f"continue the runbook after {tool.name}")
        else:
            outcome = StepOutcome(kind="concluded", finding=result.normalized_text)
    outcome.result = result
    return outcome


# ---------------------------------------------------------------------------
# report

@dataclass
class RootCause:
    cause: str
    confidence_note: str
    recommendation: str
    evidence_task_ids: list[str] = field(default_factory=list)


@dataclass
class EvidenceItem:
    task_id: str
    text: str
    metrics: list[tuple[str, list[tuple[object, float]]]] | None = None


@dataclass
class DiagnosisReport:
    report_id: str
    alert: str
    status: str  # complete | inconclusive
    recruited_experts: list[str]
    expert_summaries: dict[str, str]
    evidence: list[EvidenceItem]
    root_causes: list[RootCause]
    trace: list[dict]

    def to_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "alert": self.alert,
            "status": self.status,
            "recruited_experts": self.recruited_experts,
            "expert_summaries": self.expert_summaries,
            "evidence": [{"task_id": e.task_id, "text": e.text,
                          "metrics": [[n, [list(p) for p in pts]] for n, pts in e.metrics]
                          if e.metrics else None}
                         for e in self.evidence],
            "root_causes": [{"cause": rc.cause,
                             "confidence_note": rc.confidence_note,
                             "recommendation": rc.recommendation,
                             "evidence_task_ids": rc.evidence_task_ids}
                            for rc in self.root_causes],
            "trace": self.trace,
        }

    def to_markdown(self) -> str:
        lines = [f"# Diagnosis Report {self.report_id}", "",
                 f"**Alert:** {self.alert}", "",
                 f"**Status:** {self.status}", "",
                 "## Recruited Experts", ""]
        for name in self.recruited_experts:
            lines.append(f"- {name}")
        lines += ["", "## Root Causes", ""]
        if not self.root_causes:
            lines.append("No root cause identified.")
        for i, rc in enumerate(self.root_causes, 1):
            lines += [f"{i}. **{rc.cause}**",
                      f"   - Recommendation: {rc.recommendation}",
                      f"   - Confidence: {rc.confidence_note}",
                      f"   - Evidence: {', '.join(rc.evidence_task_ids)}"]
        lines += ["", "## Expert Summaries", ""]
        for agent, summary in self.expert_summaries.items():
            lines += [f"### {agent}", "", summary, ""]
        lines += ["## Evidence", ""]
        for item in self.evidence:
            lines += [f"### {item.task_id}", "", "```text", item.text, "```", ""]
            for name, points in item.metrics or []:
                lines += [f"| ts | {name} |", "| --- | --- |"]
                lines += [f"| {ts} | {value} |" for ts, value in points]
                lines.append("")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# orchestration

@dataclass
class DiagnosisConfig:
    profiles: list[AgentProfile]
    registry: ToolRegistry
    tree_library: list[DiagnosisTree] = field(default_factory=list)
    llm: Backend | None = None
    history: list[HistoricalCase] = field(default_factory=list)
    round_limit: int = ROUND_LIMIT
    task_cap: int = TASK_CAP
    expert_k: int = 2


class DiagnosisEngine:
    """One diagnosis run: orchestrates recruiting, task execution and
    cross-review; pausable on missing parameters and resumable with the
    values the user supplies."""

    def __init__(self, alert: str, config: DiagnosisConfig,
                 session: ToolSession | None = None):
        if not alert.strip():
            raise EmptyAlert("alert text is empty")
        self.alert = alert
        self.config = config
        self.session = session or ToolSession(session_id="local")
        self.state = "active"  # active | awaiting_params | done
        self.pending_params: list[ParamSpec] = []
        self.trace: list[dict] = []
        self.report: DiagnosisReport | None = None

        self._profiles = {p.agent_id: p for p in config.profiles}
        self._recruit_order: list[str] = []
        self._queues: dict[str, list[DiagnosisTask]] = {}
        self._findings: list[tuple[str, DiagnosisTask, str]] = []
        self._evidence: list[EvidenceItem] = []
        self._results: dict[str, ToolResult] = {}
        self._rounds_used = 0
        self._task_seq = 0
        self._prepared = False
        self.tree: DiagnosisTree | None = None

    # -- setup ---------------------------------------------------------------

    def _log(self, event: str, **fields) -> None:
        self.trace.append({"event": event, **fields})

    def _recruit(self, profile: AgentProfile, via: str) -> None:
        if profile.agent_id in self._recruit_order:
            return
        self._recruit_order.append(profile.agent_id)
        self._queues.setdefault(profile.agent_id, [])
        self._log("recruit", agent=profile.agent_id, via=via)

    def _prepare(self) -> None:
        try:
            self.tree, cases = match_tree(self.alert, self.config.tree_library,
                                          self.config.history)
            self._log("tree_matched", tree=self.tree.tree_id,
                      cases=[c.case_id for c in cases])
        except NoTreeMatched:
            self.tree = None
            self._log("tree_matched", tree=None, cases=[])
        experts = assign_experts(self.alert, self.config.profiles, self.config.expert_k)
        for expert in experts:
            self._profiles.setdefault(expert.agent_id, expert)
            self._recruit(expert, via="assignment")
            tasks = decompose_tasks(self.alert, expert, self.tree, llm=self.config.llm)
            self._queues[expert.agent_id] = tasks[:self.config.task_cap]
            self._log("tasks", agent=expert.agent_id,
                      instructions=[t.instruction for t in tasks])
        self._prepared = True

    # -- cross review ----------------------------------------------------------

    def _resolve_handoff_target(self, outcome: StepOutcome,
                                task: DiagnosisTask) -> AgentProfile | None:
        if outcome.to_agent and outcome.to_agent in self._profiles:
            return self._profiles[outcome.to_agent]
        if task.handoff_node_id and self.tree is not None:
            tool = self.tree.nodes[task.handoff_node_id].tool_name
            for profile in self.config.profiles:
                if profile.role == "expert" and tool in profile.allowed_tools:
                    return profile
        return None

    def cross_review(self, message: CrossReviewMessage) -> None:
        """Deliver suggested tasks, recruiting the recipient if absent."""
        recipient = self._profiles[message.to_agent]
        self._recruit(recipient, via="cross_review")
        queue = self._queues.setdefault(recipient.agent_id, [])
        for task in message.suggested_tasks:
            if len(queue) < self.config.task_cap:
                queue.append(task)
        self._log("cross_review", from_agent=message.from_agent,
                  to_agent=message.to_agent, payload=message.payload,
                  tasks=[t.instruction for t in message.suggested_tasks])

    def _handoff_task(self, outcome: StepOutcome, task: DiagnosisTask,
                      recipient: AgentProfile) -> DiagnosisTask:
        self._task_seq += 1
        node_id = task.handoff_node_id
        hints: dict[str, str] = {}
        instruction = outcome.payload or "continue the diagnosis"
        if node_id and self.tree is not None:
            node = self.tree.nodes[node_id]
            hints = dict(node.argument_hints)
            if node.tool_name not in instruction:
                instruction = f"{instruction} using {node.tool_name}"
            instruction += _hint_suffix(hints)
        return DiagnosisTask(
            task_id=f"{recipient.agent_id}-x{self._task_seq}",
            assignee=recipient.agent_id,
            instruction=instruction,
            node_id=node_id,
            hints=hints,
        )

    # -- main loop -------------------------------------------------------------

    def run_until_blocked(self) -> str:
        """Advance until done or a parameter elicitation pause; returns state."""
        if self.state == "done":
            return self.state
        if not self._prepared:
            self._prepare()
        self.state = "active"

        while self._rounds_used < self.config.round_limit:
            if not any(self._queues.get(a) for a in self._recruit_order):
                break
            self._rounds_used += 1
            self._log("round", number=self._rounds_used)
            for agent_id in list(self._recruit_order):
                queue = self._queues.get(agent_id, [])
                if not queue:
                    continue
                task = queue[0]
                expert = self._profiles[agent_id]
                task.status = "running"
                context = self.alert + "".join(
                    "\n" + r.normalized_text for r in self._results.values())
                outcome = expert_step(task, self.config.llm, self.config.registry,
                                      self.session, expert, context=context)

                if outcome.kind == "missing_params":
                    task.status = "pending"
                    self.state = "awaiting_params"
                    self.pending_params = outcome.missing
                    self._log("pause", agent=agent_id, task=task.task_id,
                              params=[p.name for p in outcome.missing])
                    return self.state

                queue.pop(0)
                if outcome.result is not None:
                    self._results[task.task_id] = outcome.result
                    self._log("tool_call", agent=agent_id, task=task.task_id,
                              tool=outcome.result.tool_name,
                              arguments=(outcome.result.raw or {}).get("echo")
                              if isinstance(outcome.result.raw, dict) else None,
                              status=outcome.result.status)

                if outcome.kind == "concluded":
                    task.status = "done"
                    self._findings.append((agent_id, task, outcome.finding))
                    if outcome.result is not None:
                        self._evidence.append(EvidenceItem(
                            task_id=task.task_id,
                            text=outcome.result.normalized_text,
                            metrics=outcome.result.metrics))
                    elif task.kind == "verify":
                        self._evidence.append(EvidenceItem(
                            task_id=task.task_id, text=outcome.finding))
                    self._log("reflection", agent=agent_id, task=task.task_id,
                              verdict="concluded", finding=outcome.finding)
                elif outcome.kind == "needs_more":
                    task.attempts += 1
                    self._log("reflection", agent=agent_id, task=task.task_id,
                              verdict="needs_more", hint=outcome.hint)
                    if task.attempts <= RETRY_CAP:
                        task.status = "pending"
                        task.instruction += f" (previous attempt: {outcome.hint})"
                        queue.append(task)
                    else:
                        task.status = "done"
                elif outcome.kind == "handoff":
                    recipient = self._resolve_handoff_target(outcome, task)
                    if recipient is None or recipient.agent_id == agent_id:
                        task.status = "done"
                        if outcome.result is not None:
                            self._findings.append((agent_id, task,
                                                   outcome.result.normalized_text))
                        self._log("reflection", agent=agent_id, task=task.task_id,
                                  verdict="handoff_unresolved")
                        continue
                    task.status = "handed_off"
                    suggested = self._handoff_task(outcome, task, recipient)
                    message = CrossReviewMessage(
                        from_agent=agent_id, to_agent=recipient.agent_id,
                        payload=outcome.payload or suggested.instruction,
                        suggested_tasks=[suggested])
                    self._log("reflection", agent=agent_id, task=task.task_id,
                              verdict="handoff", to_agent=recipient.agent_id)
                    self.cross_review(message)

        self._finalize()
        return self.state

    def resume(self, values: dict[str, object]) -> str:
        """Feed user-supplied parameter values and continue the run."""
        self.session.provided_params.update(values)
        self.pending_params = []
        self._log("resume", params=sorted(values))
        self.state = "active"
        return self.run_until_blocked()

    # -- aggregation -----------------------------------------------------------

    def _finalize(self) -> None:
        leftover = any(self._queues.get(a) for a in self._recruit_order)
        status = "inconclusive" if leftover or not self._findings else "complete"

        root_causes: list[RootCause] = []
        for agent_id, task, finding in self._findings:
            result = self._results.get(task.task_id)
            raw = result.raw if result is not None and isinstance(result.raw, dict) else {}
            if raw.get("root_cause"):
                family = root_cause_family(str(raw["root_cause"]))
                root_causes.append(RootCause(
                    cause=str(raw["root_cause"]),
                    confidence_note=f"supported by {result.tool_name} evidence "
                                    f"from {self._profiles[agent_id].name}",
                    recommendation=str(raw.get("recommendation")
                                       or FAMILY_GUIDELINES[family]),
                    evidence_task_ids=[task.task_id],
                ))
        if not root_causes and status == "complete":
            status = "inconclusive"

        summaries: dict[str, str] = {}
        family = root_cause_family(" ".join([self.alert]
                                            + [rc.cause for rc in root_causes]))
        guideline = FAMILY_GUIDELINES[family]
        for agent_id in self._recruit_order:
            expert = self._profiles[agent_id]
            own = [f for a, t, f in self._findings if a == agent_id]
            summary = None
            if self.config.llm is not None:
                try:
                    summary = self.config.llm.complete([
                        ChatMessage("system", f"Summarize the expert's diagnosis "
                                              f"steps. {guideline}"),
                        ChatMessage("user", f"summarize {expert.name}: "
                                            + " | ".join(own or ["no findings"])),
                    ])
                except Exception:
                    summary = None
            if not summary:
                summary = (f"{expert.name} completed {len(own)} finding(s). "
                           + ("; ".join(own) if own else "No conclusive finding."))
            summaries[expert.name] = summary

        report_id = f"diag-{fnv1a64(json.dumps(self.trace, sort_keys=True).encode()) % 10 ** 10:010d}"
        self.report = DiagnosisReport(
            report_id=report_id,
            alert=self.alert,
            status=status,
            recruited_experts=[self._profiles[a].name for a in self._recruit_order],
            expert_summaries=summaries,
            evidence=self._evidence,
            root_causes=root_causes,
            trace=self.trace,
        )
        self.state = "done"


class MissingParamsError(Exception):
    def __init__(self, names: list[str]):
        super().__init__(f"diagnosis requires parameters: {names}")
        self.names = names


def run_diagnosis(alert: str, config: DiagnosisConfig,
                  session: ToolSession | None = None) -> DiagnosisReport:
    """One-shot diagnosis; raises if the run pauses for parameters (use the
    engine directly when user elicitation is possible)."""
    engine = DiagnosisEngine(alert, config, session=session)
    state = engine.run_until_blocked()
    if state == "awaiting_params":
        raise MissingParamsError([p.name for p in engine.pending_params])
    assert engine.report is not None
    return engine.report


def aggregate_and_render(engine: DiagnosisEngine,
                         llm: Backend | None = None) -> DiagnosisReport:
    """Re-run aggregation on a finished engine (exposed for tests)."""
    if llm is not None:
        engine.config.llm = llm
    engine._finalize()
    assert engine.report is not None
    return engine.report
