import pytest
from hypothesis import settings

settings.register_profile("torusreg", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("torusreg")

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; returns the verdict."""
    lines = request.config.stash[_LINES]

    def record(number: int, name: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
