import time

import pytest

_LINES: list[str] = []


class Criterion:
    """Collects one pass/fail line per acceptance criterion."""

    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.t0 = time.perf_counter()

    def report(self, ok: bool, detail: str) -> bool:
        dt = time.perf_counter() - self.t0
        in_time = dt < self.budget
        verdict = "PASS" if ok and in_time else "FAIL"
        budget = f"budget {self.budget:g}s" if self.budget != float("inf") else "no time budget"
        line = f"[{verdict}] criterion {self.number:2d} {self.title}: {detail} ({dt:.1f}s, {budget})"
        if not in_time:
            line += " over budget"
        _LINES.append(line)
        print(line)
        return ok and in_time


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0].split()[0])):
            terminalreporter.write_line(line)
