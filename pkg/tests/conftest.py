import hashlib
from pathlib import Path

import pytest

from editsynth.sampledata import StorePlan, build_store


@pytest.fixture(scope="session")
def store(tmp_path_factory):
    """Small procedural asset store shared across the whole run."""
    root = tmp_path_factory.mktemp("store")
    return build_store(root, StorePlan(seed=11))


def tree_hashes(root: Path) -> dict[str, str]:
    """Relative path -> sha256 for every file under root."""
    root = Path(root)
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }
