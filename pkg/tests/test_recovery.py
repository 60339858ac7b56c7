import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustmoments import (
    ConfigError,
    RecoveryError,
    RecoverySketch,
    SparseVector,
    deserialize_sketch,
    serialize_sketch,
)
from robustmoments.hashing import derive_seed


def feed(sketch, stream):
    for i, d in stream:
        sketch.update(i, d)


def aggregate(stream, n):
    entries: dict[int, int] = {}
    for i, d in stream:
        entries[i] = entries.get(i, 0) + d
        if entries[i] == 0:
            del entries[i]
    return SparseVector(n, entries)


class TestRecoverExamples:
    def test_zero_vector(self):
        sketch = RecoverySketch(8, 1 << 16, seed=1)
        assert sketch.recover().entries == {}

    def test_cancellation_leaves_singleton(self):
        sketch = RecoverySketch(4, 1 << 16, seed=1)
        feed(sketch, [(7, 1), (3, 1), (7, -1)])
        assert sketch.recover().entries == {3: 1}

    def test_dense_churn_then_sparse(self):
        sketch = RecoverySketch(8, 1 << 16, seed=2)
        feed(sketch, [(i, 1) for i in range(1, 1001)])
        feed(sketch, [(i, -1) for i in range(1, 998)])
        expected = aggregate(
            [(i, 1) for i in range(1, 1001)] + [(i, -1) for i in range(1, 998)],
            1 << 16,
        )
        assert sketch.recover() == expected

    def test_multiplicity_above_one(self):
        sketch = RecoverySketch(4, 100, seed=3)
        feed(sketch, [(5, 1)] * 7 + [(9, -1)] * 3)
        assert sketch.recover().entries == {5: 7, 9: -3}

    def test_not_recoverable_when_dense(self):
        sketch = RecoverySketch(4, 1000, seed=4)
        feed(sketch, [(i, 1) for i in range(1, 200)])
        with pytest.raises(RecoveryError):
            sketch.recover()

    def test_recover_does_not_mutate_state(self):
        sketch = RecoverySketch(4, 100, seed=5)
        feed(sketch, [(5, 1), (9, 1)])
        first = sketch.recover()
        second = sketch.recover()
        assert first == second


class TestLinearity:
    def test_order_independence(self):
        a = RecoverySketch(8, 256, seed=6)
        b = RecoverySketch(8, 256, seed=6)
        stream = [(i % 30 + 1, 1 if i % 3 else -1) for i in range(100)]
        feed(a, stream)
        feed(b, list(reversed(stream)))
        assert a.bucket_words() == b.bucket_words()

    def test_buckets_match_reencoding_of_exact_vector(self):
        # bucket triples are linear, so feeding the aggregated vector
        # directly must reproduce every word
        stream = [(i % 40 + 1, 1) for i in range(90)] + [(7, -1)] * 4
        vector = aggregate(stream, 64)
        a = RecoverySketch(8, 64, seed=7)
        feed(a, stream)
        b = RecoverySketch(8, 64, seed=7)
        feed(b, list(vector.entries.items()))
        assert a.bucket_words() == b.bucket_words()

    def test_all_cancel_gives_zero_sketch(self):
        sketch = RecoverySketch(8, 256, seed=8)
        stream = [(i % 30 + 1, 1) for i in range(60)]
        feed(sketch, stream)
        feed(sketch, [(i, -d) for i, d in stream])
        counts, isums, fps = sketch.bucket_words()
        assert not any(counts) and not any(isums) and not any(fps)


class TestRoundTrip:
    @given(
        entries=st.dictionaries(
            st.integers(1, 4096), st.integers(-5, 5).filter(bool), max_size=16
        ),
        seed=st.integers(0, 2**32),
    )
    @settings(max_examples=150, deadline=None)
    def test_random_sparse_vectors(self, entries, seed):
        sketch = RecoverySketch(16, 4096, seed=seed)
        for i, c in entries.items():
            step = 1 if c > 0 else -1
            for _ in range(abs(c)):
                sketch.update(i, step)
        assert sketch.recover().entries == entries

    def test_adaptive_sequence_driven_by_previous_recoveries(self):
        # each round chooses its support from the previous recovered vector
        seed = derive_seed(99, "adaptive")
        n = 1 << 12
        failures = 0
        support = list(range(1, 17))
        for round_no in range(200):
            sketch = RecoverySketch(16, n, seed=derive_seed(seed, round_no))
            stream = [(i, 1) for i in support]
            churn = [(i + 2000) % n + 1 for i in support[:8]]
            stream += [(i, 1) for i in churn]
            stream += [(i, -1) for i in churn]
            feed(sketch, stream)
            try:
                got = sketch.recover()
            except RecoveryError:
                failures += 1
                continue
            assert got.entries == {i: 1 for i in support}
            digest = sum(got.entries) % n
            support = sorted({(i * 31 + digest) % n + 1 for i in support})
        assert failures <= 2

    def test_failure_is_never_silent(self):
        # corrupting one bucket word must never yield an unverified vector
        sketch = RecoverySketch(8, 256, seed=11)
        feed(sketch, [(3, 1), (200, 1), (77, -1)])
        sketch._count[5] += 1
        with pytest.raises(RecoveryError):
            sketch.recover()

    def test_fingerprint_corruption_detected(self):
        sketch = RecoverySketch(8, 256, seed=12)
        feed(sketch, [(3, 1), (200, 1)])
        pos = next(i for i, c in enumerate(sketch._count) if c != 0)
        sketch._fp[pos] = (sketch._fp[pos] + 1) % ((1 << 61) - 1)
        with pytest.raises(RecoveryError):
            sketch.recover()


class TestContracts:
    def test_rejects_bad_k(self):
        with pytest.raises(ConfigError):
            RecoverySketch(0, 10, seed=1)

    def test_rejects_out_of_range_index(self):
        sketch = RecoverySketch(4, 10, seed=1)
        with pytest.raises(ConfigError):
            sketch.update(11, 1)

    def test_words_independent_of_content(self):
        a = RecoverySketch(8, 256, seed=13)
        b = RecoverySketch(8, 256, seed=13)
        feed(a, [(i, 1) for i in range(1, 20)])
        assert a.words_used() == b.words_used()
        assert a.words_used() == 3 * 4 * 16 + 4 + 4

    def test_serialization_round_trip(self):
        sketch = RecoverySketch(8, 256, seed=14)
        feed(sketch, [(i, 1) for i in range(1, 12)])
        clone = deserialize_sketch(serialize_sketch(sketch))
        assert isinstance(clone, RecoverySketch)
        assert clone.recover() == sketch.recover()
