"""Shared exception base.

Every concrete error carries a short machine-readable ``code`` so the relay
can map failures onto wire-level Error messages without string matching.
"""

from __future__ import annotations


class ArcallError(Exception):
    code = "error"

    @property
    def detail(self) -> str:
        return str(self)
