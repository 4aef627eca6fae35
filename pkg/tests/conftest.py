import numpy as np
import pytest

from uwbnet.data import SynthConfig, fit_apply_standardization, generate_synthetic, kfold_splits
from uwbnet.models import ModelSpec
from uwbnet.training import TrainConfig, train_model

_acceptance: list[tuple[str, str, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_split():
    ds = generate_synthetic(SynthConfig())
    train_idx, test_idx = kfold_splits(ds, 1, 0)[0]
    train, (test,) = fit_apply_standardization(ds.subset(train_idx), [ds.subset(test_idx)])
    return train, test


@pytest.fixture(scope="session")
def trained_multi_rbf(default_split):
    train, test = default_split
    model, rows = train_model(ModelSpec.for_kind("multi_rbf"), train, test, TrainConfig(epochs=1000, seed=0))
    return model, rows


@pytest.fixture(scope="session")
def trained_adx(default_split):
    train, test = default_split
    model, rows = train_model(ModelSpec.for_kind("multi_rbf_nr_l4_mh_adx"), train, test,
                              TrainConfig(epochs=300, seed=0))
    return model, rows


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance.append((name, report.outcome, getattr(report, "_doc", "")))


def pytest_collection_modifyitems(items):
    for item in items:
        doc = (item.function.__doc__ or "").strip().splitlines()
        item.user_properties.append(("doc", doc[0] if doc else ""))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    rep._doc = dict(item.user_properties).get("doc", "")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, doc in _acceptance:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {doc}")
