"""Shared test plumbing: the acceptance-criteria report.

Acceptance tests register one line per criterion; the lines are printed in
their own section at the end of the pytest run so the pass/fail status of
each numbered criterion is visible regardless of output capturing.
"""

from __future__ import annotations

import time

_ACCEPTANCE: list[tuple[int, str, bool, float, float]] = []


class CriterionGate:
    """Times one acceptance criterion and records its outcome.

    Fails the test if the body raises or if the runtime budget is blown;
    either way the criterion line shows up in the summary section.
    """

    def __init__(self, num: int, label: str, budget_s: float):
        self.num = num
        self.label = label
        self.budget_s = budget_s

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok = exc_type is None and elapsed < self.budget_s
        _ACCEPTANCE.append((self.num, self.label, ok, elapsed, self.budget_s))
        status = "PASS" if ok else "FAIL"
        print(f"criterion {self.num:2d} [{status}] {self.label} ({elapsed:.1f}s)")
        if exc_type is None and elapsed >= self.budget_s:
            raise AssertionError(
                f"criterion {self.num} exceeded its {self.budget_s:.0f}s budget"
                f" ({elapsed:.1f}s)"
            )
        return False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, label, ok, elapsed, budget in sorted(_ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {num:2d} [{status}] {label}"
            f" ({elapsed:.1f}s, budget {budget:.0f}s)"
        )
