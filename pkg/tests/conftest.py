import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Record one PASS/FAIL line; lines are echoed immediately and again in the summary."""

    def record(number: int, title: str, ok: bool, detail: str, soft: bool = False) -> bool:
        tag = "PASS" if ok else ("WARN" if soft else "FAIL")
        line = f"[{tag}] criterion {number:>2}: {title} | {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
