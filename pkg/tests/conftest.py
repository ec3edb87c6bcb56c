def pytest_terminal_summary(terminalreporter):
    mod = terminalreporter.config.pluginmanager.get_plugin("tests.test_acceptance")
    if mod is None:
        import sys
        mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
