import pytest

from pathlib import Path

from ocedf import extraction, specmodel

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str):
    """Parse a bundled fixture's spec and load its source tables."""
    base = FIXTURES / name
    spec = specmodel.parse_spec(base / "spec.json")
    sources = {}
    for rule in spec.mappings:
        if rule.source_table not in sources:
            sources[rule.source_table] = extraction.load_source(
                base / "sources" / f"{rule.source_table}.csv", rule.source_table)
    return spec, sources


@pytest.fixture(scope="session")
def case_study():
    """(spec, log, report) for the Moodle-style course fixture."""
    spec, sources = load_fixture("case_study")
    log, report = extraction.extract(spec, sources)
    return spec, log, report


@pytest.fixture(scope="session")
def conformant():
    """(spec, log, report) for the fully conformant course fixture."""
    spec, sources = load_fixture("conformant")
    log, report = extraction.extract(spec, sources)
    return spec, log, report
