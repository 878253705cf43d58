import numpy as np
import pytest

from metsob.corpus import FAMILIES, load_corpus, random_corpus, random_field, save_corpus


def test_corpus_is_reproducible_and_prefix_stable(square32):
    a = random_corpus(square32, "bd", 12, seed=3)
    b = random_corpus(square32, "bd", 5, seed=3)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
    c = random_corpus(square32, "bd", 5, seed=4)
    assert not np.array_equal(a[0].values, c[0].values)


@pytest.mark.parametrize("family", FAMILIES)
def test_families_are_nonconstant(square32, family):
    for i in range(10):
        f = random_field(square32, "mu", 0, i, family)
        assert np.ptp(f.values) > 0 and np.all(np.isfinite(f.values))


def test_unknown_family(square32):
    with pytest.raises(ValueError):
        random_field(square32, "bd", 0, 0, "fractal")


def test_empty_corpus(square32):
    with pytest.raises(ValueError, match="empty corpus"):
        random_corpus(square32, "bd", 0)


def test_corpus_roundtrip(tmp_path, square32):
    fields = random_corpus(square32, "bd", 4, seed=1)
    manifest = save_corpus(square32, fields, tmp_path / "c", 1)
    back = load_corpus(square32, manifest)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(fields, back))
