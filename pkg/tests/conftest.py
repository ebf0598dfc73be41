"""Shared fixtures: the 645-cow replica and lazily cached full-length fits."""

import time

import numpy as np
import pytest

from rfisem.data import ModelSpec
from rfisem.simulate import paper_replica
from rfisem.workflow import fit_model

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): acceptance criterion")


@pytest.fixture(scope="session")
def replica():
    return paper_replica()


class ReplicaFits:
    """Full 30 x 2200 fits of the replica, each computed at most once per session."""

    def __init__(self, sim):
        self.sim = sim
        self._fits = {}
        self.seconds = {}

    def get(self, family, **kw):
        key = (family,) + tuple(sorted(kw.items()))
        if key not in self._fits:
            t0 = time.perf_counter()
            self._fits[key] = fit_model(ModelSpec(family=family, **kw), self.sim.records, self.sim.pedigree)
            self.seconds[key] = time.perf_counter() - t0
        return self._fits[key]

    def phenotyped_rows(self, fit):
        pos = {a: i for i, a in enumerate(fit.animal_ids)}
        return np.array([pos[r.animal_id] for r in self.sim.records])


@pytest.fixture(scope="session")
def replica_fits(replica):
    return ReplicaFits(replica)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, text = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        note = getattr(rep, "wasxfail", "") or ""
        _ACCEPTANCE.setdefault(number, (text, []))[1].append((item.name, rep.passed and not note, note))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        text, parts = _ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {text}")
        for name, passed, note in parts:
            if not passed:
                terminalreporter.write_line(f"       {name}: {note or 'assertion failed'}")
