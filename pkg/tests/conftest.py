import os
import sys

import pytest

from advworkbench.runtime import tune_allocator

sys.path.insert(0, os.path.dirname(__file__))
tune_allocator()

MNIST_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "mnist")

# criterion number -> (title, passed, detail)
RESULTS = {}


def record(number, title, passed, detail=""):
    RESULTS[number] = (title, bool(passed), detail)
    print(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    """The desk experiment, run once per session.

    Set ADVWB_DESK_DIR to reuse (or fill) a results directory across sessions.
    """
    from advworkbench.desk import is_complete, load_desk, run_desk
    cached = os.environ.get("ADVWB_DESK_DIR")
    if cached and is_complete(cached):
        return load_desk(cached)
    out = cached or str(tmp_path_factory.mktemp("desk"))
    return run_desk(MNIST_DIR, out)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, passed, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
