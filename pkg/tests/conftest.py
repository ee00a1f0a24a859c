import numpy as np
import pytest
import torch

from helpers import tiny_model_config
from motion_retarget.model import RetargetModel


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_model():
    torch.manual_seed(0)
    return RetargetModel(tiny_model_config())


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def accept(request):
    """Record one acceptance verdict; all verdicts are echoed in the terminal summary."""
    lines = request.config.acceptance_lines

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance")
        for line in sorted(config.acceptance_lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
