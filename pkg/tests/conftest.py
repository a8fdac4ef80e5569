def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda s: (int(s.split(".")[0]), s)):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key:<5} {'PASS' if ok else 'FAIL'}  {detail}")
