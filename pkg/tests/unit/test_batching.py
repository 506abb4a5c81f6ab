import pytest
from umeit_monotonicity.batching import batched, ordered_map

def test_happy_path_chunk_sizes():
    items = list(range(10))            # 0..9
    chunks = list(batched(items, 4))   # expect 4,4,2
    assert chunks == [[0,1,2,3], [4,5,6,7], [8,9]]

def test_accepts_generator_and_last_partial():
    gen = (i for i in range(5))
    assert list(batched(gen, 2)) == [[0,1], [2,3], [4]]

def test_size_must_be_positive():
    with pytest.raises(ValueError):
        list(batched([1,2], 0))

def test_ordered_map_keeps_input_order_with_threads():
    def work(x):
        return x * x
    assert ordered_map(work, list(range(20)), threads=4) == [x * x for x in range(20)]
    assert ordered_map(work, [3], threads=4) == [9]
    assert ordered_map(work, [], threads=1) == []

def test_ordered_map_propagates_errors():
    def work(x):
        if x == 2:
            raise RuntimeError("bad item")
        return x
    with pytest.raises(RuntimeError, match="bad item"):
        ordered_map(work, [0, 1, 2, 3], threads=2)
