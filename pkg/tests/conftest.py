import os
from collections import OrderedDict
from pathlib import Path

import numpy as np
import pytest

from chanforecast.series import MultivariateSeries
from chanforecast.synth import ArSpec, gen_multichannel

_ACCEPTANCE = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    cid, text = crit
    prev = _ACCEPTANCE.get(cid, (text, True, []))
    ok = prev[1] and report.outcome == "passed"
    notes = prev[2]
    if report.outcome != "passed" and report.longrepr is not None:
        msg = getattr(report.longrepr, "reprcrash", None)
        notes.append(msg.message.splitlines()[0] if msg else str(report.longrepr).splitlines()[-1])
    _ACCEPTANCE[cid] = (text, ok, notes)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1] if len(m.args) > 1 else "")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda s: (int("".join(ch for ch in s if ch.isdigit()) or 0), s)):
        text, ok, notes = _ACCEPTANCE[cid]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {text}"
        if notes:
            line += f" -- {notes[0][:160]}"
        tr.write_line(line)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_series():
    return gen_multichannel([ArSpec((0.7,), 600, seed=1), ArSpec((0.4, 0.3), 600, seed=1)])


@pytest.fixture
def data_dir():
    return Path(os.environ.get("CHANFORECAST_DATA", Path(__file__).resolve().parents[1] / "data"))


def make_series(values, names=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or tuple(f"c{i}" for i in range(values.shape[1]))
    return MultivariateSeries(values, tuple(names))
