from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
CATALOGS = FIXTURES / "catalogs"
RESPONSES = FIXTURES / "responses"

sys.path.insert(0, str(Path(__file__).parent))

from recaudit import _pykernels  # noqa: E402
from recaudit.catalog import load_catalog  # noqa: E402

try:
    from recaudit import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNEL_IMPLS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    KERNEL_IMPLS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=KERNEL_IMPLS, scope="session")
def kern(request):
    return request.param


@pytest.fixture(scope="session")
def movie_catalog():
    return load_catalog(CATALOGS / "movie.csv", "movie")


@pytest.fixture(scope="session")
def music_catalog():
    return load_catalog(CATALOGS / "music.csv", "music")


@pytest.fixture(scope="session")
def college_catalog():
    return load_catalog(CATALOGS / "college.csv", "college")


@pytest.fixture(scope="session")
def tiny_catalog():
    return load_catalog(CATALOGS / "tiny_movie.csv", "movie")


@pytest.fixture(scope="session")
def catalogs(movie_catalog, music_catalog, college_catalog):
    return {"movie": movie_catalog, "music": music_catalog, "college": college_catalog}


def write_config(tmp_path: Path, body: str, name: str = "config.toml") -> Path:
    """Config file in ``tmp_path`` with cache/output dirs kept inside it."""
    text = (
        f'cache_dir = "cache"\noutput_dir = "runs"\n'
        f'{body}\n'
    )
    path = tmp_path / name
    path.write_text(text.replace("@CATALOGS@", CATALOGS.as_posix()), encoding="utf-8")
    return path
