ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
