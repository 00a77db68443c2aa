"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`CrashMineError`. The CLI
maps the three families onto exit codes: configuration problems (1), bad input
data (2) and storage failures (3).
"""

from __future__ import annotations


class CrashMineError(Exception):
    exit_code = 2


class ConfigError(CrashMineError):
    exit_code = 1


class DataError(CrashMineError):
    exit_code = 2


class StorageError(CrashMineError):
    exit_code = 3


class DeckError(DataError):
    """Raised by the deck parser; carries every collected diagnostic."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)

    def __str__(self):
        head = super().__str__()
        if not self.diagnostics:
            return head
        lines = [head] + [f"  {d}" for d in self.diagnostics[:50]]
        if len(self.diagnostics) > 50:
            lines.append(f"  ... {len(self.diagnostics) - 50} more")
        return "\n".join(lines)


class DeckParseError(DeckError):
    pass


class DeckIntegrityError(DeckError):
    pass


class MissingMaterialError(DataError):
    def __init__(self, part_id):
        super().__init__(f"part {part_id} has surface elements but no MATER record")
        self.part_id = part_id


class DegenerateElementError(DataError):
    def __init__(self, element_id, reason):
        super().__init__(f"element {element_id} is degenerate: {reason}")
        self.element_id = element_id


class MetadataError(DataError):
    pass


class ConflictError(DataError):
    pass


class ClusterError(DataError):
    pass


class MiningError(DataError):
    pass


class ReportError(DataError):
    pass
