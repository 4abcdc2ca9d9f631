"""Session fixtures: fixture databases are built once from fixture_data."""

from __future__ import annotations

import sqlite3
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import fixture_data as fd  # noqa: E402
from fixture_data import TOKENIZER_FILE, build_db  # noqa: E402
from rotesql.catalog import DatabaseCatalog, profile_database  # noqa: E402


@pytest.fixture(scope="session")
def db_dir(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("dbs")


@pytest.fixture(scope="session")
def fleet_db(db_dir) -> str:
    return build_db(db_dir / "fleet.db", fd.FLEET_DDL, fd.FLEET_ROWS)


@pytest.fixture(scope="session")
def battles_db(db_dir) -> str:
    return build_db(db_dir / "battles.db", fd.BATTLES_DDL, fd.BATTLES_ROWS)


@pytest.fixture(scope="session")
def values_db(db_dir) -> str:
    return build_db(db_dir / "values.db", fd.VALUES_DDL, fd.VALUES_ROWS)


@pytest.fixture(scope="session")
def wide_db(db_dir) -> str:
    return build_db(
        db_dir / "wide.db", fd.wide_ddl("records", 95),
        fd.wide_rows("records", 95),
    )


@pytest.fixture(scope="session")
def narrow_db(db_dir) -> str:
    return build_db(
        db_dir / "narrow.db", fd.wide_ddl("records", 30),
        fd.wide_rows("records", 30),
    )


@pytest.fixture(scope="session")
def empty_db(db_dir) -> str:
    path = db_dir / "empty.db"
    conn = sqlite3.connect(path)
    conn.close()
    return str(path)


@pytest.fixture(scope="session")
def fleet_catalog(fleet_db) -> DatabaseCatalog:
    return profile_database(fleet_db, "fleet")


@pytest.fixture(scope="session")
def battles_catalog(battles_db) -> DatabaseCatalog:
    return profile_database(battles_db, "battles")


@pytest.fixture(scope="session")
def values_catalog(values_db) -> DatabaseCatalog:
    return profile_database(values_db, "sports")


@pytest.fixture(scope="session")
def wide_catalog(wide_db) -> DatabaseCatalog:
    return profile_database(wide_db, "registry_wide")


@pytest.fixture(scope="session")
def narrow_catalog(narrow_db) -> DatabaseCatalog:
    return profile_database(narrow_db, "registry_narrow")


@pytest.fixture(scope="session")
def prompt_corpus(
    fleet_catalog, battles_catalog, values_catalog, wide_catalog,
    narrow_catalog,
) -> list[tuple[str, DatabaseCatalog]]:
    """The shipped (question, catalog) pairs used for cost comparisons."""
    catalogs = {
        "fleet": fleet_catalog,
        "battles": battles_catalog,
        "sports": values_catalog,
        "registry_wide": wide_catalog,
        "registry_narrow": narrow_catalog,
    }
    pairs = []
    for db_id, questions in fd.PROMPT_QUESTIONS.items():
        for question in questions:
            pairs.append((question, catalogs[db_id]))
    assert len(pairs) >= 20
    return pairs


@pytest.fixture(scope="session")
def tokenizer_path() -> str:
    assert TOKENIZER_FILE.exists(), "run tests/fixtures/build_tokenizer.py"
    return str(TOKENIZER_FILE)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one verdict line per acceptance criterion, capture or not."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict in results:
        terminalreporter.write_line(f"{label}: {verdict}")
