"""Shared pytest plumbing: a PASS/FAIL summary line per acceptance test."""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status, mark in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if getattr(rep, "when", "call") != "call" and status == "passed":
                continue
            lines.append((nodeid, mark))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, mark in sorted(set(lines)):
        short = nodeid.split("::", 1)[-1]
        terminalreporter.write_line(f"[{mark}] {short}")
