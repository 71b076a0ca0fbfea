"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {name}"
    if detail:
        line += f" ({detail})"
    LINES.append(line)
    print(line)
