import os
import shutil
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("GCONV_CLI") or shutil.which("gconv")
    if not path:
        candidate = ROOT / "build" / "tools" / "gconv"
        path = str(candidate) if candidate.exists() else None
    if not path:
        pytest.skip("gconv executable not found")
    return path


@pytest.fixture(scope="session")
def configs():
    return Path(os.environ.get("GCONV_CONFIGS", ROOT / "configs"))
