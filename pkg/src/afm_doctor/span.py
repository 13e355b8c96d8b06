"""Source positions attached to model elements and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int       # 1-based
    column: int     # 1-based
    end_line: int
    end_column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"

    @staticmethod
    def point(file: str, line: int, column: int) -> "SourceSpan":
        return SourceSpan(file, line, column, line, column + 1)
