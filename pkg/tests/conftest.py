from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

# fixed seed for every property test
settings.register_profile(
    "repro",
    derandomize=True,
    deadline=None,
    max_examples=200,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repro")

PROPERTY_CASES = 1000


@pytest.fixture(scope="session")
def table1():
    from qdscreen.curated import load_shipped_table1

    return load_shipped_table1()


@pytest.fixture(scope="session")
def tuned_records():
    from qdscreen.modellab.corpus import default_phonon_model, tuned_finalist_records

    return tuned_finalist_records(phonon_model=default_phonon_model())


@pytest.fixture(scope="session")
def small_corpus():
    """Twenty seeded model defects (one charge state each)."""
    from qdscreen.modellab.corpus import generate_corpus, model_chempots, model_host, random_specs

    specs, labels = random_specs(20, seed=7)
    recs = generate_corpus(specs, labels)
    return recs, model_host(), model_chempots(sorted({r.element for r in recs}))


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
