import logging
import os
import struct

import numpy as np
import pytest

import cache
from schemas import DickeParams, EigenSystem, EnsembleSpec
from services import rmt_service, spectra_service


@pytest.fixture
def eig():
    return spectra_service.eigendecompose(rmt_service.sample_matrix(EnsembleSpec(dim=12, seed=3), 0))


def test_store_then_load_is_bit_identical(tmp_path, eig):
    assert cache.cache_eigensystem(str(tmp_path), "k", eig)
    loaded = cache.load_eigensystem(str(tmp_path), "k")
    assert loaded.energies.tobytes() == eig.energies.tobytes()
    np.testing.assert_array_equal(loaded.vectors, eig.vectors)
    assert [name for name in os.listdir(tmp_path) if name.endswith(".tmp")] == []


def test_file_layout(tmp_path, eig):
    cache.cache_eigensystem(str(tmp_path), "k", eig)
    data = (tmp_path / ("k" + cache.SUFFIX)).read_bytes()
    magic, version, d = struct.unpack("<4sIQ", data[:16])
    assert (magic, version, d) == (b"OPFD", 1, 12)
    assert len(data) == 16 + 8 * (12 + 144)
    # second stored vector value is row 1 of column 0
    assert struct.unpack("<d", data[16 + 8 * 12 + 8:16 + 8 * 12 + 16])[0] == eig.vectors[1, 0]


def test_missing_key_is_a_miss(tmp_path):
    assert cache.load_eigensystem(str(tmp_path), "absent") is None


def test_foreign_file_is_a_miss(tmp_path, caplog):
    (tmp_path / ("k" + cache.SUFFIX)).write_bytes(b"%PDF-1.4 not an eigensystem at all")
    with caplog.at_level(logging.WARNING):
        assert cache.load_eigensystem(str(tmp_path), "k") is None
    assert "unknown header" in caplog.text


def test_future_version_is_a_miss(tmp_path, eig):
    cache.cache_eigensystem(str(tmp_path), "k", eig)
    path = tmp_path / ("k" + cache.SUFFIX)
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", 2)
    path.write_bytes(bytes(data))
    assert cache.load_eigensystem(str(tmp_path), "k") is None


def test_partial_file_is_a_miss_with_warning(tmp_path, eig, caplog):
    cache.cache_eigensystem(str(tmp_path), "k", eig)
    path = tmp_path / ("k" + cache.SUFFIX)
    path.write_bytes(path.read_bytes()[:-100])
    with caplog.at_level(logging.WARNING):
        assert cache.load_eigensystem(str(tmp_path), "k") is None
    assert "recomputing" in caplog.text


def test_unreadable_entry_is_a_miss(tmp_path, caplog):
    (tmp_path / ("k" + cache.SUFFIX)).mkdir()
    with caplog.at_level(logging.WARNING):
        assert cache.load_eigensystem(str(tmp_path), "k") is None
    assert "could not be read" in caplog.text


def test_store_into_unusable_directory_is_logged(tmp_path, eig, caplog):
    blocker = tmp_path / "not-a-dir"
    blocker.write_text("x", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        assert not cache.cache_eigensystem(str(blocker), "k", eig)
    assert "Could not cache" in caplog.text


def test_store_over_a_directory_leaves_no_temp_file(tmp_path, eig, caplog):
    target = tmp_path / ("k" + cache.SUFFIX)
    target.mkdir()
    (target / "occupant").write_bytes(b"")
    with caplog.at_level(logging.WARNING):
        assert not cache.cache_eigensystem(str(tmp_path), "k", eig)
    assert "Could not cache" in caplog.text
    assert sorted(os.listdir(tmp_path)) == ["k" + cache.SUFFIX]


def test_complex_eigensystems_are_not_stored(tmp_path):
    H = rmt_service.sample_matrix(EnsembleSpec(kind="GUE", dim=6), 0)
    assert not cache.cache_eigensystem(str(tmp_path), "k", spectra_service.eigendecompose(H))
    assert os.listdir(tmp_path) == []


def test_key_separates_couplings_sectors_and_models():
    p = DickeParams(n_atoms=4, boson_cutoff=16)
    key = cache.eigensystem_key(p, 0.3, "full")
    assert key != cache.eigensystem_key(p, 0.3 + 1e-12, "full")
    assert key != cache.eigensystem_key(p, 0.3, "even")
    assert key != cache.eigensystem_key(p.model_copy(update={"rwa": True}), 0.3, "full")
    assert key == cache.eigensystem_key(p.model_copy(update={"max_dim": 50000}), 0.3, "full")
    assert len(key) == 64
