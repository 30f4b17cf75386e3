"""Exception hierarchy shared across the copilot engine."""

from __future__ import annotations


class CopilotError(Exception):
    """Base class for all engine errors."""


# knowledge base -------------------------------------------------------------

class UnsupportedFormat(CopilotError):
    pass


class InvalidEncoding(CopilotError):
    pass


# retrieval ------------------------------------------------------------------

class DimensionMismatch(CopilotError):
    pass


class UnknownChunkId(CopilotError):
    pass


# safety ---------------------------------------------------------------------

class EmptyWord(CopilotError):
    pass


# tools ----------------------------------------------------------------------

class DuplicateName(CopilotError):
    pass


class ToolNotFound(CopilotError):
    pass


class UnboundArguments(CopilotError):
    pass


class TypeMismatch(CopilotError):
    pass


# diagnosis trees ------------------------------------------------------------

class TreeValidationError(CopilotError):
    pass


class CycleDetected(TreeValidationError):
    pass


class MissingCatchAll(TreeValidationError):
    pass


class MalformedPredicate(TreeValidationError):
    pass


class UnreachableNode(TreeValidationError):
    pass


class NoTreeMatched(CopilotError):
    """Signal, not a failure: no runbook tree is relevant to the alert."""


# agents ---------------------------------------------------------------------

class EmptyAlert(CopilotError):
    pass


# q&a ------------------------------------------------------------------------

class UnknownAnswerId(CopilotError):
    pass


# llm backends ---------------------------------------------------------------

class BackendUnavailable(CopilotError):
    pass


class ScriptMissingDefault(CopilotError):
    pass


# evaluation -----------------------------------------------------------------

class EmptyEvalSet(CopilotError):
    pass
