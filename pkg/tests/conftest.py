import numpy as np
import pytest

from envbounds.density import default_logreg_config, make_logreg_target, make_table1

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def logreg():
    """The seeded reference instance (J=10, s=1.2)."""
    return make_logreg_target(default_logreg_config())


@pytest.fixture(scope="session")
def quadratic():
    return make_table1("quadratic")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance(request):
    """Recorder for acceptance verdicts, echoed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(label, ok, detail=""):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_order):
            terminalreporter.write_line(line)


def _criterion_order(line):
    label = line.split(":", 1)[0].split()[1]
    head = "".join(ch for ch in label if ch.isdigit())
    return (int(head) if head else 0, label)
