"""Expert runbooks as tool-binding trees.

A tree node names a diagnostic tool plus argument hints; its ordered edges
carry predicates evaluated against the tool's result, first match wins,
and every non-leaf ends with an ``always`` catch-all so traversal is
total. Leaves render a root-cause conclusion from the accumulated trace.
Traversal is deterministic given fixed tool responses, and pauses (rather
than aborting) when a required argument cannot be extracted, resuming on
the same session once the user supplies it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (CycleDetected, MalformedPredicate, MissingCatchAll,
                     NoTreeMatched, ToolNotFound, TreeValidationError,
                     UnreachableNode)
from .kb import Chunk, KnowledgeBase, content_hash
from .retrieval import Retriever
from .tools import (BoundArguments, MissingParams, ParamSpec, ToolCall,
                    ToolResult, ToolSession, fill_parameters)

PREDICATE_KINDS = ("always", "status_ok", "status_error", "field_equals",
                   "field_gt", "contains")

_MISSING = object()
_TEMPLATE_RE = re.compile(r"\{([\w.-]+)(?::([^}]*))?\}")


def _lookup(raw: object, path: str) -> object:
    node = raw
    for part in path.split("/"):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                return _MISSING
        else:
            return _MISSING
    return node


@dataclass
class Predicate:
    kind: str
    path: str | None = None
    value: object = None
    threshold: float | None = None
    text: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "Predicate":
        kind = raw.get("kind")
        if kind not in PREDICATE_KINDS:
            raise MalformedPredicate(f"unknown predicate kind: {kind!r}")
        if kind in ("field_equals", "field_gt") and not raw.get("path"):
            raise MalformedPredicate(f"{kind} requires a path")
        if kind == "field_equals" and "value" not in raw:
            raise MalformedPredicate("field_equals requires a value")
        if kind == "field_gt" and "threshold" not in raw:
            raise MalformedPredicate("field_gt requires a threshold")
        if kind == "contains" and not raw.get("text"):
            raise MalformedPredicate("contains requires text")
        return cls(kind=kind, path=raw.get("path"), value=raw.get("value"),
                   threshold=raw.get("threshold"), text=raw.get("text"))

    def evaluate(self, result: ToolResult) -> bool:
        if self.kind == "always":
            return True
        if self.kind == "status_ok":
            return result.status == "ok"
        if self.kind == "status_error":
            return result.status == "error"
        if self.kind == "field_equals":
            return _lookup(result.raw, self.path or "") == self.value
        if self.kind == "field_gt":
            found = _lookup(result.raw, self.path or "")
            try:
                return float(found) > float(self.threshold)  # type: ignore[arg-type]
            except (TypeError, ValueError):
                return False
        if self.kind == "contains":
            return (self.text or "").lower() in result.normalized_text.lower()
        return False


@dataclass
class TreeNode:
    node_id: str
    tool_name: str
    argument_hints: dict[str, str] = field(default_factory=dict)
    edges: list[tuple[Predicate, str]] = field(default_factory=list)
    conclusion: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.edges


@dataclass
class DiagnosisTree:
    tree_id: str
    title: str
    description: str
    root: str
    nodes: dict[str, TreeNode]

    def node(self, node_id: str) -> TreeNode:
        return self.nodes[node_id]

    def primary_path(self) -> list[TreeNode]:
        """Nodes along the first-edge (expected) path, root to leaf."""
        path = []
        node = self.nodes[self.root]
        while True:
            path.append(node)
            if node.is_leaf:
                return path
            node = self.nodes[node.edges[0][1]]

    def validate_against(self, registry) -> None:
        for node in self.nodes.values():
            if not node.is_leaf and registry.get(node.tool_name) is None:
                raise ToolNotFound(f"tree {self.tree_id}: unknown tool {node.tool_name!r}")


def _validate_structure(tree: DiagnosisTree) -> None:
    if tree.root not in tree.nodes:
        raise TreeValidationError(f"root {tree.root!r} not among nodes")
    for node in tree.nodes.values():
        if node.is_leaf:
            if node.conclusion is None:
                raise TreeValidationError(f"leaf {node.node_id!r} lacks a conclusion")
        else:
            if node.conclusion is not None:
                raise TreeValidationError(
                    f"non-leaf {node.node_id!r} must not carry a conclusion")
            if node.edges[-1][0].kind != "always":
                raise MissingCatchAll(
                    f"non-leaf {node.node_id!r} lacks a final 'always' edge")
            for _, child in node.edges:
                if child not in tree.nodes:
                    raise TreeValidationError(
                        f"{node.node_id!r} references unknown child {child!r}")

    # iterative DFS: cycle check plus reachability
    visiting: set[str] = set()
    done: set[str] = set()
    stack: list[tuple[str, int]] = [(tree.root, 0)]
    visiting.add(tree.root)
    while stack:
        node_id, edge_i = stack[-1]
        node = tree.nodes[node_id]
        if edge_i < len(node.edges):
            stack[-1] = (node_id, edge_i + 1)
            child = node.edges[edge_i][1]
            if child in visiting:
                raise CycleDetected(f"cycle through {child!r}")
            if child not in done:
                visiting.add(child)
                stack.append((child, 0))
        else:
            stack.pop()
            visiting.discard(node_id)
            done.add(node_id)
    unreachable = set(tree.nodes) - done
    if unreachable:
        raise UnreachableNode(f"unreachable nodes: {sorted(unreachable)}")


def parse_tree(raw: dict) -> DiagnosisTree:
    nodes = {}
    for node_id, spec in raw["nodes"].items():
        edges = [(Predicate.from_dict(e["condition"]), e["child"])
                 for e in spec.get("edges", [])]
        nodes[node_id] = TreeNode(
            node_id=node_id,
            tool_name=spec.get("tool_name", ""),
            argument_hints=dict(spec.get("argument_hints", {})),
            edges=edges,
            conclusion=spec.get("conclusion"),
        )
    tree = DiagnosisTree(
        tree_id=raw["tree_id"],
        title=raw["title"],
        description=raw["description"],
        root=raw["root"],
        nodes=nodes,
    )
    _validate_structure(tree)
    return tree


def load_tree(path: str | Path) -> DiagnosisTree:
    return parse_tree(json.loads(Path(path).read_text(encoding="utf-8")))


def load_tree_dir(directory: str | Path) -> list[DiagnosisTree]:
    return [load_tree(p) for p in sorted(Path(directory).glob("*.tree.json"))]


# ---------------------------------------------------------------------------
# matching

@dataclass
class HistoricalCase:
    case_id: str
    text: str


def match_tree(alert_text: str, tree_library: list[DiagnosisTree],
               history: list[HistoricalCase] | None = None,
               ) -> tuple[DiagnosisTree, list[HistoricalCase]]:
    """Expand the alert with similar historical cases, then pick the best
    tree by retrieval over tree descriptions; raises NoTreeMatched when
    nothing reranks above zero."""
    if not tree_library:
        raise NoTreeMatched("tree library is empty")

    matched_cases: list[HistoricalCase] = []
    context = alert_text
    if history:
        case_kb = KnowledgeBase([
            Chunk(chunk_id=f"case-{c.case_id}:0000", text=c.text,
                  content_hash=content_hash(c.text), version_tag="history",
                  source="history")
            for c in history
        ])
        hits = Retriever(case_kb).retrieve(alert_text, k=2)
        by_id = {f"case-{c.case_id}:0000": c for c in history}
        matched_cases = [by_id[h.chunk_id] for h in hits if h.chunk_id in by_id]
        if matched_cases:
            context = alert_text + "\n" + "\n".join(c.text for c in matched_cases)

    tree_kb = KnowledgeBase([
        Chunk(chunk_id=f"tree-{t.tree_id}:0000", text=f"{t.title}. {t.description}",
              content_hash=content_hash(t.description), version_tag="trees",
              source="tree-library")
        for t in tree_library
    ])
    hits = Retriever(tree_kb).retrieve(context, k=1)
    if not hits:
        raise NoTreeMatched(f"no tree matched alert: {alert_text!r}")
    tree_id = hits[0].chunk_id[len("tree-"):-len(":0000")]
    tree = next(t for t in tree_library if t.tree_id == tree_id)
    return tree, matched_cases


# ---------------------------------------------------------------------------
# traversal

@dataclass
class TraversalStep:
    node_id: str
    call: ToolCall
    result: ToolResult
    chosen_edge: int

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "tool_name": self.call.tool_name,
            "arguments": self.call.arguments,
            "result": self.result.to_dict(),
            "chosen_edge": self.chosen_edge,
        }


@dataclass
class TraversalTrace:
    tree_id: str
    steps: list[TraversalStep]
    conclusion: str

    def to_json(self) -> str:
        return json.dumps(
            {"tree_id": self.tree_id, "conclusion": self.conclusion,
             "steps": [s.to_dict() for s in self.steps]},
            sort_keys=True, separators=(",", ":"))


class TraversalPaused(Exception):
    """Raised when a node's required arguments need user input; the
    traversal state lives on the session and the same call resumes it."""

    def __init__(self, node_id: str, params: list[ParamSpec]):
        super().__init__(f"awaiting parameters {[p.name for p in params]} at {node_id}")
        self.node_id = node_id
        self.params = params


def render_conclusion(template: str, steps: list[TraversalStep]) -> str:
    """Fill ``{node_id}`` with that step's normalized text and
    ``{node_id:slash/path}`` with a raw-field lookup."""
    by_node = {s.node_id: s for s in steps}

    def sub(match: re.Match) -> str:
        node_id, path = match.group(1), match.group(2)
        step = by_node.get(node_id)
        if step is None:
            return match.group(0)
        if path:
            found = _lookup(step.result.raw, path)
            return str(found) if found is not _MISSING else match.group(0)
        return step.result.normalized_text
    return _TEMPLATE_RE.sub(sub, template)


def traverse(tree: DiagnosisTree, alert_context: str, invoker,
             session: ToolSession, llm=None) -> TraversalTrace:
    """Walk the tree from the root, invoking each node's tool.

    ``invoker`` is a callable ``(tool_name, arguments) -> ToolResult``
    exposing its ``registry`` (see tools.RegistryInvoker). Arguments are
    extracted from the alert plus all prior normalized results; missing
    required ones raise ``TraversalPaused`` after saving the resume point
    on the session.
    """
    state_key = f"traversal:{tree.tree_id}"
    state = session.state.get(state_key)
    if state is None:
        state = {"node_id": tree.root, "steps": [], "extra": ""}
        session.state[state_key] = state

    steps: list[TraversalStep] = state["steps"]
    node = tree.nodes[state["node_id"]]
    while not node.is_leaf:
        descriptor = invoker.registry.get(node.tool_name)
        if descriptor is None:
            raise ToolNotFound(node.tool_name)
        context = alert_context + state["extra"]
        binding = fill_parameters(descriptor, context, session=session, llm=llm,
                                  hints=node.argument_hints)
        if isinstance(binding, MissingParams):
            state["node_id"] = node.node_id
            raise TraversalPaused(node.node_id, binding.params)
        assert isinstance(binding, BoundArguments)
        result = invoker(node.tool_name, binding.values)
        chosen = next(i for i, (pred, _) in enumerate(node.edges)
                      if pred.evaluate(result))
        steps.append(TraversalStep(
            node_id=node.node_id,
            call=ToolCall(node.tool_name, binding.values, session.session_id),
            result=result,
            chosen_edge=chosen,
        ))
        state["extra"] += "\n" + result.normalized_text
        state["node_id"] = node.edges[chosen][1]
        node = tree.nodes[state["node_id"]]

    conclusion = render_conclusion(node.conclusion or "", steps)
    del session.state[state_key]
    return TraversalTrace(tree_id=tree.tree_id, steps=steps, conclusion=conclusion)
