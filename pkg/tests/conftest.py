import pytest

from afdm._backend import available_backends
from afdm.data import LabeledDataset, balance_dataset
from afdm.generator import GeneratorConfig, generate


@pytest.fixture(scope="session")
def default_transactions():
    return list(generate(GeneratorConfig()))


@pytest.fixture(scope="session")
def default_dataset(default_transactions):
    return LabeledDataset.from_transactions(default_transactions)


@pytest.fixture(scope="session")
def balanced_dataset(default_dataset):
    return balance_dataset(default_dataset, 3.0, 0)


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda l: (l.startswith("info"), l)):
        terminalreporter.write_line(line)
