"""One pass/fail line per acceptance criterion, shared with the pytest summary."""

LINES: dict[int, str] = {}


def record(number: int, passed: bool, text: str) -> bool:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}"
    LINES[number] = line
    print(line, flush=True)
    return passed


def lines() -> list[str]:
    return [LINES[n] for n in sorted(LINES)]
