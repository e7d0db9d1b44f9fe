"""Shared test helpers: optional real-data fixtures.

The two application datasets are not redistributed with the code. When a
checkout lacks them the tests that need them skip with a visible reason;
see tests/fixtures/README.md for the export procedure.
"""

import json
from pathlib import Path

import pytest

from plm.io import check_fixture_manifest, load_csv

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / name


def load_fixture(name: str):
    """Load a committed data fixture, skipping the caller when absent.

    When a manifest entry exists the loaded file is checked against it so
    silently drifting fixtures fail loudly instead of shifting numbers.
    """
    path = fixture_path(name)
    if not path.is_file():
        pytest.skip(
            f"fixture {name} is not committed in this checkout; "
            "see tests/fixtures/README.md for the export procedure"
        )
    data = load_csv(path)
    manifest_file = FIXTURE_DIR / "manifest.json"
    if manifest_file.is_file():
        manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
        if name in manifest:
            check_fixture_manifest(data, manifest[name])
    return data
