import numpy as np
import pytest

from app.core.errors import AddressError, DataFormatError, WidthMismatchError
from app.models.hypervector import Geometry, HyperVector, hamming, random_vector
from app.models.memory import AssociativeMemory, SearchResult, interrupt_eval


@pytest.fixture
def memory():
    am = AssociativeMemory(Geometry(d=1024, k=2, am_rows=8))
    for row in range(8):
        am.write_row(row, random_vector(1024, 100 + row))
    return am


def test_starts_zeroed():
    am = AssociativeMemory(Geometry(d=256, k=1, am_rows=4))
    assert am.read(2, 0) == HyperVector.zeros(256)


def test_read_write_per_part(memory):
    v = random_vector(512, 1)
    memory.write(3, 1, v)
    assert memory.read(3, 1) == v
    with pytest.raises(AddressError):
        memory.read(8, 0)
    with pytest.raises(AddressError):
        memory.write(0, 2, v)
    with pytest.raises(WidthMismatchError):
        memory.write(0, 0, random_vector(1024, 1))


def test_search_matches_flat_oracle(memory):
    search = memory.flat_row(7)
    for max_index in range(1, 8):
        distances = [hamming(memory.flat_row(r), search) for r in range(max_index)]
        result = memory.associative_search(max_index)
        assert result.distance == min(distances)
        assert result.index == int(np.argmin(distances))


def test_search_ties_pick_lowest_index():
    am = AssociativeMemory(Geometry(d=256, k=1, am_rows=4))
    v = random_vector(256, 9)
    am.write_row(1, v)
    am.write_row(2, v)
    am.write_row(3, v)
    assert am.associative_search(3) == SearchResult(index=1, distance=0)


def test_search_range(memory):
    with pytest.raises(AddressError):
        memory.associative_search(0)
    with pytest.raises(AddressError):
        memory.associative_search(8)


def test_search_distance_never_grows_with_max_index(memory):
    results = [memory.associative_search(m) for m in range(1, 8)]
    distances = [r.distance for r in results]
    assert distances == sorted(distances, reverse=True)
    assert all(r.index < m for r, m in zip(results, range(1, 8)))


def _flipped(v, n):
    bits = v.bits.copy()
    bits[:n] ^= True
    return HyperVector.from_bits(bits)


def test_search_winner_changes_only_for_closer_rows():
    am = AssociativeMemory(Geometry(d=1024, k=1, am_rows=8))
    query = random_vector(1024, 1)
    am.write_row(7, query)
    for row in range(3):
        am.write_row(row, random_vector(1024, 50 + row))
    before = am.associative_search(3)
    assert before.distance > 300

    am.write_row(3, _flipped(query, 100))
    assert am.associative_search(4) == SearchResult(index=3, distance=100)
    am.write_row(4, _flipped(query, 250))
    assert am.associative_search(5) == SearchResult(index=3, distance=100)
    am.write_row(5, _flipped(query, 40))
    assert am.associative_search(6) == SearchResult(index=5, distance=40)


def test_interrupt_eval_is_inclusive():
    assert interrupt_eval(SearchResult(2, 400), 400, 2)
    assert not interrupt_eval(SearchResult(3, 400), 400, 2)
    assert not interrupt_eval(SearchResult(2, 401), 400, 2)
    assert interrupt_eval(SearchResult(5, 2048), 4095, 63)


def test_image_dump_and_load(memory, tmp_path):
    path = tmp_path / "am.img"
    memory.dump(path)
    assert AssociativeMemory.load(path) == memory
    header = path.read_bytes()[:12]
    assert np.frombuffer(header, dtype="<u4").tolist() == [1024, 2, 8]


def test_image_truncated(memory, tmp_path):
    path = tmp_path / "am.img"
    memory.dump(path)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(DataFormatError):
        AssociativeMemory.load(path)


def test_image_bad_geometry(tmp_path):
    path = tmp_path / "am.img"
    path.write_bytes(np.array([1000, 3, 8], dtype="<u4").tobytes())
    with pytest.raises(DataFormatError):
        AssociativeMemory.load(path)


def test_snapshot_is_frozen(memory):
    frozen = memory.snapshot()
    assert frozen == memory
    with pytest.raises(ValueError):
        frozen.write(0, 0, random_vector(512, 3))
