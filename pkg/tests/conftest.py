import support


def pytest_terminal_summary(terminalreporter):
    if not support.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(support.ACCEPTANCE):
        terminalreporter.write_line(line)
