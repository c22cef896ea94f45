"""Shared pytest wiring.

The acceptance suite must emit one visible PASS/FAIL line per criterion
regardless of output capturing, so the reporting happens in a hook that
runs outside the captured region.
"""


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if name.startswith("test_"):
        name = name[len("test_"):]
    name = name.replace("_", "-")
    outcome = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE] {name}: {outcome}", flush=True)
