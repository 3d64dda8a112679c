import numpy as np
import pytest

from occlucode import Block, BlockedDictionary
from occlucode.core import FACE, normalize_columns


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dictionary(rng, m, n, blocks=None, kind=FACE):
    """Unit-norm random dictionary; blocks = list of (label, size) or None
    for a single block spanning all columns."""
    atoms = normalize_columns(rng.standard_normal((m, n)))
    if blocks is None:
        blocks = [("all", n)]
    out, pos = [], 0
    for label, size in blocks:
        out.append(Block(label, kind, pos, pos + size))
        pos += size
    assert pos == n
    return BlockedDictionary(atoms, tuple(out))
