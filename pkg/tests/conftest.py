import json
from pathlib import Path

import pytest

from edgewatt.arch import DeviceProfile, network_from_dict

DATA = Path(__file__).parent / "data"


@pytest.fixture
def lenet_path():
    return DATA / "lenet.json"


@pytest.fixture
def lenet_doc(lenet_path):
    return json.loads(lenet_path.read_text())


@pytest.fixture
def lenet(lenet_doc):
    return network_from_dict(lenet_doc)


@pytest.fixture
def tx2():
    return DeviceProfile("jetson-tx2", 2.6727e-08, 1.21334e-10)


@pytest.fixture
def xavier():
    return DeviceProfile("jetson-xavier-nx", 2.8674e-08, 4.7639e-10, 6.2454e-09)


@pytest.fixture(autouse=True)
def _no_user_profiles(monkeypatch):
    monkeypatch.delenv("EDGEWATT_PROFILE_DIR", raising=False)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    results = config.stash.get(ACCEPTANCE_KEY, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, elapsed, detail in sorted(results):
        terminalreporter.write_line(f"{status}  {name:<40} {elapsed:7.2f}s  {detail}")
