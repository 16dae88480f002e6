import re

_CRITERION = re.compile(r"test_criterion_(\d+)_")


def pytest_terminal_summary(terminalreporter):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m and rep.when in ("call", "setup"):
                k = int(m.group(1))
                if outcome == "passed" and rep.when == "call":
                    results.setdefault(k, "PASS")
                elif outcome != "passed":
                    results[k] = "FAIL"
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(f"criterion {k:2d}: {results[k]}")
