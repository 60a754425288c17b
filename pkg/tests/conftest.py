import numpy as np
import pytest

from markercal.models import demo_manipulator, industrial_manipulator


@pytest.fixture(scope="session")
def demo():
    return demo_manipulator()


@pytest.fixture(scope="session")
def industrial():
    return industrial_manipulator()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def random_joint_states(model, rng, count, margin=0.02):
    """Joint vectors drawn uniformly inside the model's limits."""
    lo = model.joint_limits[:, 0] * (1 - margin)
    hi = model.joint_limits[:, 1] * (1 - margin)
    return rng.uniform(lo, hi, size=(count, model.dof))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance pass/fail lines after the test run."""
    import sys

    for name, module in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            lines = getattr(module, "RESULTS", None)
            if lines:
                terminalreporter.section("acceptance criteria")
                for line in lines:
                    terminalreporter.write_line(line)
            break
