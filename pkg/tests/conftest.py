def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(RESULTS, key=lambda t: int(t[2:])):
            terminalreporter.write_line(RESULTS[tag])
