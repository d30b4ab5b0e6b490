import hashlib
import json

import numpy as np
import pytest

from itrc.rng import SeededRng
from itrc.store import (EmbeddingStore, PairRecord, StoreChecksumError, StoreCountError,
                        StoreDimensionError, StoreFormatError, StoreLabelError,
                        StoreValueError, load_store, save_store, split, synth_generate)


def small_store(n=6, dim=8, seed=0):
    rng = SeededRng(seed)
    records = [PairRecord(pair_id=f"p{i}", label=("Similar" if i % 2 else "Complementary"))
               for i in range(n)]
    return EmbeddingStore(records=records,
                          text_matrix=rng.normal(size=(n, dim)),
                          image_matrix=rng.normal(size=(n, dim)))


class TestRoundTrip:
    def test_save_load_bitwise(self, tmp_path):
        store = small_store()
        save_store(store, tmp_path / "s")
        loaded = load_store(tmp_path / "s")
        assert loaded.pair_ids == store.pair_ids
        assert loaded.labels == store.labels
        assert np.array_equal(loaded.text_matrix, store.text_matrix)
        assert np.array_equal(loaded.image_matrix, store.image_matrix)

    def test_matrices_promoted_float64(self, tmp_path):
        store = small_store()
        save_store(store, tmp_path / "s")
        loaded = load_store(tmp_path / "s")
        assert loaded.text_matrix.dtype == np.float64


class TestLoadValidation:
    @pytest.fixture
    def store_dir(self, tmp_path):
        save_store(small_store(), tmp_path / "s")
        return tmp_path / "s"

    def _manifest(self, store_dir):
        return json.loads((store_dir / "manifest.json").read_text())

    def _write(self, store_dir, manifest):
        (store_dir / "manifest.json").write_text(json.dumps(manifest))

    def test_bad_format_magic(self, store_dir):
        m = self._manifest(store_dir)
        m["format"] = "other"
        self._write(store_dir, m)
        with pytest.raises(StoreFormatError):
            load_store(store_dir)

    def test_bad_version(self, store_dir):
        m = self._manifest(store_dir)
        m["version"] = 99
        self._write(store_dir, m)
        with pytest.raises(StoreFormatError):
            load_store(store_dir)

    def test_truncated_blob_is_count_error(self, store_dir):
        blob = (store_dir / "text.f32le").read_bytes()
        (store_dir / "text.f32le").write_bytes(blob[:-4])
        with pytest.raises(StoreCountError):
            load_store(store_dir)

    def test_whole_rows_missing_is_count_error(self, store_dir):
        blob = (store_dir / "text.f32le").read_bytes()
        (store_dir / "text.f32le").write_bytes(blob[:-8 * 4])
        with pytest.raises(StoreCountError):
            load_store(store_dir)

    def test_wrong_row_width_is_dimension_error(self, store_dir):
        # declared dim=8 but rows actually carry 4 floats
        m = self._manifest(store_dir)
        n = m["n"]
        rows = np.arange(n * 4, dtype="<f4").tobytes()
        (store_dir / "text.f32le").write_bytes(rows)
        m["checksums"]["text.f32le"] = hashlib.sha256(rows).hexdigest()
        self._write(store_dir, m)
        with pytest.raises(StoreDimensionError):
            load_store(store_dir)

    def test_checksum_failure(self, store_dir):
        blob = bytearray((store_dir / "image.f32le").read_bytes())
        blob[0] ^= 0xFF
        (store_dir / "image.f32le").write_bytes(bytes(blob))
        with pytest.raises(StoreChecksumError):
            load_store(store_dir)

    def test_nan_detected(self, store_dir):
        m = self._manifest(store_dir)
        data = np.frombuffer((store_dir / "text.f32le").read_bytes(), dtype="<f4").copy()
        data[3] = np.nan
        (store_dir / "text.f32le").write_bytes(data.tobytes())
        m["checksums"]["text.f32le"] = hashlib.sha256(data.tobytes()).hexdigest()
        self._write(store_dir, m)
        with pytest.raises(StoreValueError):
            load_store(store_dir)

    def test_unrelated_label_rejected(self, store_dir):
        m = self._manifest(store_dir)
        m["pairs"][2]["label"] = "Unrelated"
        self._write(store_dir, m)
        with pytest.raises(StoreLabelError, match="Unrelated"):
            load_store(store_dir)

    def test_pair_count_mismatch(self, store_dir):
        m = self._manifest(store_dir)
        m["pairs"] = m["pairs"][:-1]
        self._write(store_dir, m)
        with pytest.raises(StoreCountError):
            load_store(store_dir)

    def test_duplicate_pair_id(self, store_dir):
        m = self._manifest(store_dir)
        m["pairs"][1]["id"] = m["pairs"][0]["id"]
        self._write(store_dir, m)
        with pytest.raises(StoreFormatError, match="duplicate"):
            load_store(store_dir)


class TestSplit:
    def test_paper_scale_counts(self):
        s = split(4700, (0.6, 0.2, 0.2), seed=1)
        assert len(s.train_indices) == 2820
        assert len(s.val_indices) == 940
        assert len(s.test_indices) == 940

    def test_determinism(self):
        a = split(10, seed=5)
        b = split(10, seed=5)
        assert a.tags == b.tags
        assert a.tags != split(10, seed=6).tags

    def test_partition_property(self):
        for n in (7, 10, 53, 101):
            s = split(n, seed=3)
            union = set(s.train_indices) | set(s.val_indices) | set(s.test_indices)
            assert union == set(range(n))
            assert len(s.train_indices) + len(s.val_indices) + len(s.test_indices) == n

    def test_proportions_close_to_ratios(self):
        # test absorbs both floor residues, so its share can drift up to 2/n
        for n in (10, 33, 100, 997):
            s = split(n, seed=2)
            assert abs(len(s.train_indices) / n - 0.6) <= 1.0 / n
            assert abs(len(s.val_indices) / n - 0.2) <= 1.0 / n
            assert abs(len(s.test_indices) / n - 0.2) < 2.0 / n

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split(10, (0.5, 0.2, 0.2), seed=0)


class TestSynth:
    def test_balanced_labels(self):
        store = synth_generate(101, 2.0, seed=0, dim=16)
        counts = {lab: store.labels.count(lab) for lab in set(store.labels)}
        assert abs(counts["Similar"] - counts["Complementary"]) <= 1

    def test_same_seed_identical_bytes(self, tmp_path):
        for i, out in enumerate(("a", "b")):
            save_store(synth_generate(24, 1.5, seed=99, dim=32), tmp_path / out)
        assert (tmp_path / "a" / "text.f32le").read_bytes() == \
               (tmp_path / "b" / "text.f32le").read_bytes()
        assert (tmp_path / "a" / "manifest.json").read_text() == \
               (tmp_path / "b" / "manifest.json").read_text()

    def test_separated_means_at_requested_distance(self):
        store = synth_generate(2000, 3.0, seed=4, dim=64)
        y = store.label_indices()
        mean0 = store.text_matrix[y == 0].mean(axis=0)
        mean1 = store.text_matrix[y == 1].mean(axis=0)
        assert np.linalg.norm(mean0 - mean1) == pytest.approx(3.0, abs=0.1)

    def test_unit_ish_norms_at_zero_separation(self):
        store = synth_generate(500, 0.0, seed=4)
        norms = np.linalg.norm(store.image_matrix, axis=1)
        assert 0.5 < norms.mean() < 1.5

    def test_linear_probe_oracle_separation_four(self):
        from sklearn.linear_model import LogisticRegression

        store = synth_generate(1000, 4.0, seed=21)
        x = np.hstack([store.text_matrix, store.image_matrix])
        y = store.label_indices()
        probe = LogisticRegression(max_iter=1000).fit(x, y)
        assert probe.score(x, y) >= 0.99

    def test_chance_level_oracle_separation_zero(self):
        from sklearn.linear_model import LogisticRegression

        store = synth_generate(1000, 0.0, seed=22)
        x = np.hstack([store.text_matrix, store.image_matrix])
        y = store.label_indices()
        probe = LogisticRegression(max_iter=1000).fit(x[:800], y[:800])
        assert probe.score(x[800:], y[800:]) == pytest.approx(0.5, abs=0.05)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            synth_generate(3, 1.0, seed=0)
        with pytest.raises(ValueError):
            synth_generate(10, -1.0, seed=0)
