from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

#: criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict = {}


def load_y(name: str, width: int, height: int) -> np.ndarray:
    raw = np.fromfile(DATA / name, dtype=np.uint8)
    return raw.reshape(-1, height, width)


@pytest.fixture(scope="session")
def carphone() -> np.ndarray:
    return load_y("carphone_176x144.y", 176, 144)


@pytest.fixture(scope="session")
def bikes() -> np.ndarray:
    return load_y("bikes_176x176.y", 176, 176)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        status = "N/A" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
