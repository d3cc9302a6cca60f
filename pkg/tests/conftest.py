import hashlib
import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from esi.enumeration import build_catalogue, read_catalogue  # noqa: E402
from esi.fingerprint import Evaluator, make_grid  # noqa: E402

SRC = Path(__file__).resolve().parents[1] / "src" / "esi"
# modules whose behaviour reaches the bytes of a catalogue file
CATALOGUE_MODULES = ("expr.py", "parse.py", "fingerprint.py", "deriv.py", "enumeration.py")


def _code_key() -> str:
    h = hashlib.md5()
    for name in CATALOGUE_MODULES:
        h.update((SRC / name).read_bytes())
    return h.hexdigest()[:12]


@pytest.fixture(scope="session")
def grid():
    return make_grid()


@pytest.fixture(scope="session")
def evaluator(grid):
    return Evaluator(grid)


@pytest.fixture(scope="session")
def catalogue_cache(request):
    """Catalogues keyed by (basis, k_max, code hash), reused across runs.

    A cached file is checksum-validated on read and is only reused while the
    catalogue-producing sources are byte-identical to the build that wrote it.
    """
    root = os.environ.get("ESI_TEST_CACHE")
    base = Path(root) if root else Path(request.config.cache.mkdir("esi-catalogues"))
    key = _code_key()
    built = {}

    def get(basis: str, k_max: int):
        if (basis, k_max) not in built:
            path = base / f"{basis}_k{k_max}_{key}.tsv"
            if path.exists():
                built[basis, k_max] = read_catalogue(path)
            else:
                built[basis, k_max] = build_catalogue(basis, k_max, checkpoint=path)
        return built[basis, k_max]

    return get


@pytest.fixture(scope="session")
def small_core(catalogue_cache):
    return catalogue_cache("core_maths", 5)


@pytest.fixture(scope="session")
def small_ext_log(catalogue_cache):
    return catalogue_cache("ext_log_maths", 4)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
