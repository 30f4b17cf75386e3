"""Hot-loop kernels with a compiled core and a pure-Python fallback.

Two operations dominate the engine's compute: the multi-pattern byte scan of
the sensitive-word automaton (run twice per question, against a 20k+ word
lexicon under a 500 ms budget) and BM25 posting-list accumulation (run per
query variant per retrieval). Both are implemented twice with identical
semantics:

* ``dbcopilot._kernels._native`` - Cython extension, built via
  ``python setup.py build_ext --inplace``
* ``dbcopilot._kernels._pure``   - plain Python, always available

The native module is preferred when importable; set ``DBCOPILOT_PURE=1`` to
force the fallback (the benchmark suite uses this to compare both).
"""

from __future__ import annotations

import os

if os.environ.get("DBCOPILOT_PURE") == "1":
    from . import _pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        from . import _pure as _impl  # type: ignore[no-redef]

        BACKEND = "pure"

ac_scan = _impl.ac_scan
bm25_accumulate = _impl.bm25_accumulate

__all__ = ["BACKEND", "ac_scan", "bm25_accumulate"]
