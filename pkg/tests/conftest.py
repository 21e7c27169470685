import numpy as np
import pytest

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


class _Recorder:
    def __call__(self, criterion, passed: bool, detail: str) -> None:
        criterion = str(criterion)
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE[criterion] = (bool(passed), detail)


@pytest.fixture
def acceptance():
    return _Recorder()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def _order(key: str):
    digits = "".join(ch for ch in key if ch.isdigit())
    return (int(digits) if digits else 0, key)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=_order):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
