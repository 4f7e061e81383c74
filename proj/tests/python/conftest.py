import os
import pathlib
import shutil

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def problems_dir():
    return pathlib.Path(os.environ.get("STOCHSAFE_PROBLEMS", ROOT / "problems"))


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("STOCHSAFE_CLI") or shutil.which("stochsafe")
    if not path or not pathlib.Path(path).exists():
        candidate = ROOT / "build" / "stochsafe"
        if not candidate.exists():
            pytest.skip("stochsafe CLI not built")
        path = str(candidate)
    return path
