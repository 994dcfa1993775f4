from __future__ import annotations

import math

import numpy as np
import pytest

from symmext.data_model import load_data
from symmext.geometry import ball_tuple


@pytest.fixture(scope="session")
def eq32():
    return load_data("eq32")


@pytest.fixture(scope="session")
def unit_disks():
    return ball_tuple([math.pi] * 4, 1 / 128)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(mod.RESULTS):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
