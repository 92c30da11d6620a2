import pathlib
import shutil
import subprocess
import sys

import pytest

from xrflow import build_default_registry
from xrflow.datastore import DataStore


@pytest.fixture()
def registry():
    return build_default_registry()


@pytest.fixture()
def store(tmp_path):
    return DataStore(tmp_path / "data")


@pytest.fixture(scope="session")
def seeded_root(tmp_path_factory):
    """One demo-seeded data root shared by the read-only integration tests."""
    root = tmp_path_factory.mktemp("seeded")
    proc = subprocess.run(
        [sys.executable, "-m", "xrflow.cli", "seed-demos", "--data-root", str(root)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return root


def fresh_copy(seeded_root, tmp_path) -> pathlib.Path:
    """Writable clone of the seeded root for tests that mutate workspaces."""
    dst = tmp_path / "root"
    shutil.copytree(seeded_root, dst)
    return dst
