import json

import pytest

from slscc import make_instance


def tiny():
    """T=2, p=1, one certain scenario; optimum 15.5 at y=(1,1)."""
    return make_instance((1, 1), (10, 0.5), (1, 1), (2,), [(1.0, (3,))], 0.0)


def two_scen():
    """T=3, p=1, two equally likely scenarios, half may be dropped."""
    return make_instance(
        (1, 1, 1), (5, 5, 5), (0.1, 0.1, 0.1), (4,), [(0.5, (3, 2)), (0.5, (2, 4))], 0.5
    )


@pytest.fixture
def i1():
    return tiny()


@pytest.fixture
def i2():
    return two_scen()


@pytest.fixture
def i1_file(tmp_path, i1):
    path = tmp_path / "i1.json"
    path.write_text(i1.dumps())
    return path


@pytest.fixture
def i2_file(tmp_path, i2):
    path = tmp_path / "i2.json"
    path.write_text(json.dumps(i2.to_dict()))
    return path


# -- acceptance summary -------------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Record ``criterion N: PASS|FAIL - detail`` and fail the test on FAIL."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
