def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    rows = []
    for status, tag in (("passed", "PASS"), ("failed", "FAIL"),
                        ("error", "FAIL"), ("skipped", "SKIP")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(rep, "when", "call") in ("call", "setup"):
                rows.append((nodeid.split("::")[-1], tag))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, tag in sorted(rows):
            terminalreporter.write_line(f"[{tag}] {name}")
