import os

# sampler threads change nothing numerically; keep test runs single-threaded
os.environ.setdefault("LOSSSCAPE_THREADS", "0")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
