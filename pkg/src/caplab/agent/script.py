"""Command script files for reproducible agent runs.

Format: one command per line, `<frame_index_at_or_after> <KIND> [<value>]`,
e.g. `45 SET_STEERING 15` or `240 STOP`.  Blank lines and lines starting
with '#' are skipped.  The agent applies each command at the first capture
tick whose frame index is >= the given one, in file order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from caplab.model import CommandKind


@dataclass(frozen=True)
class ScriptedCommand:
    at_or_after_frame: int
    kind: CommandKind
    value: float | int | None


def _parse_number(text: str) -> float | int:
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_script(text: str) -> list[ScriptedCommand]:
    commands: list[ScriptedCommand] = []
    last_frame = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"script line {lineno}: expected 'FRAME KIND [VALUE]', got {raw!r}")
        try:
            frame = int(parts[0])
        except ValueError:
            raise ValueError(f"script line {lineno}: bad frame index {parts[0]!r}") from None
        if frame < 0:
            raise ValueError(f"script line {lineno}: frame index must be >= 0")
        if frame < last_frame:
            raise ValueError(f"script line {lineno}: frame indices must be non-decreasing")
        last_frame = frame
        try:
            kind = CommandKind(parts[1])
        except ValueError:
            raise ValueError(f"script line {lineno}: unknown command kind {parts[1]!r}") from None
        if kind is CommandKind.STOP:
            if len(parts) == 3:
                raise ValueError(f"script line {lineno}: STOP takes no value")
            value: float | int | None = None
        else:
            if len(parts) != 3:
                raise ValueError(f"script line {lineno}: {kind.value} needs a value")
            value = _parse_number(parts[2])
        commands.append(ScriptedCommand(at_or_after_frame=frame, kind=kind, value=value))
    return commands


def load_script(path: Path) -> list[ScriptedCommand]:
    return parse_script(Path(path).read_text())


def format_script(commands: list[ScriptedCommand]) -> str:
    lines = []
    for cmd in commands:
        if cmd.value is None:
            lines.append(f"{cmd.at_or_after_frame} {cmd.kind.value}")
        else:
            lines.append(f"{cmd.at_or_after_frame} {cmd.kind.value} {cmd.value}")
    return "\n".join(lines) + "\n"
