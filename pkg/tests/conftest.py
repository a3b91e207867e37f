import shutil
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
CRUNTIME = ROOT / "cruntime"


def has_cc() -> bool:
    return shutil.which("cc") is not None or shutil.which("gcc") is not None


requires_cc = pytest.mark.skipif(not has_cc(), reason="no C compiler")


@pytest.fixture
def store():
    from mswasm.store import Store

    return Store()
