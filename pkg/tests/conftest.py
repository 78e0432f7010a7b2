import csv
import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
BIN = FIXTURES / "bin"
LISTINGS = FIXTURES / "listings"


def manifest():
    with open(FIXTURES / "MANIFEST.tsv", newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


FIXTURE_NAMES = [r["name"] for r in manifest()]
ELF_NAMES = [r["name"] for r in manifest() if r["format"] == "ELF"]
PE_NAMES = [r["name"] for r in manifest() if r["format"] == "PE"]


def fixture_path(name: str) -> str:
    return str(BIN / name)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("analysis-cache"))


@pytest.fixture(scope="session")
def apis(cache_dir):
    """One BinaryAPI per fixture, sharing a session cache."""
    from binoracle.queryapi import BinaryAPI
    return {n: BinaryAPI(fixture_path(n), cache_dir=cache_dir) for n in FIXTURE_NAMES}


@pytest.fixture(autouse=True)
def _no_user_cache(monkeypatch, tmp_path):
    # never touch ~/.cache from tests
    monkeypatch.setenv("BINORACLE_CACHE_DIR", str(tmp_path / "default-cache"))


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
