# Acceptance tests register one line each; printing them from the terminal
# summary keeps the scorecard visible under default output capture.
SCORECARD: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if SCORECARD:
        terminalreporter.section("acceptance scorecard")
        for line in SCORECARD:
            terminalreporter.write_line(line)
