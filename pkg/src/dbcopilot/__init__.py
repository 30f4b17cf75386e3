"""Database maintenance copilot engine.

Offline-testable by construction: retrieval, safety checks, tool
orchestration and multi-agent diagnosis all run against bundled fixtures,
a scripted LLM backend and a mock diagnostic-tool server.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
