def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [ln for ln in rep.capstdout.splitlines() if " criterion " in ln and ln[:4] in ("PASS", "FAIL")]
    if lines:
        terminalreporter.section("acceptance criteria")
        key = lambda ln: int(ln.split(" criterion ")[1].split(":")[0])
        for ln in sorted(lines, key=key):
            terminalreporter.write_line(ln)
