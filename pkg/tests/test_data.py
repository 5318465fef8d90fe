"""Probability-map files, manifests, and the synthetic corpus."""
import json

import numpy as np
import pytest

from bayesteach.data import (
    ImageStore,
    LabeledImage,
    generate_synthetic_corpus,
    load_manifest,
    read_probmap,
    save_manifest,
    write_probmap,
)
from bayesteach.errors import (
    BadDimensions,
    BadMagic,
    DuplicateId,
    MissingFile,
    SchemaError,
    ValueOutOfRange,
)
from bayesteach.model import ABSENT, PRESENT, ProbMap
from bayesteach.training import TrainItem, default_train_config, evaluate_accuracy, train_theta


class TestProbmapFormat:
    def test_round_trip_is_bit_exact(self, rng, tmp_path):
        m = ProbMap(rng.uniform(0.0, 1.0, (64, 64)))
        path = tmp_path / "m.btpm"
        write_probmap(path, m)
        back = read_probmap(path)
        assert np.array_equal(back.values, m.values)
        assert back.values.dtype == np.float32

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.btpm"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(BadMagic):
            read_probmap(path)

    def test_wrong_version(self, tmp_path, rng):
        path = tmp_path / "m.btpm"
        write_probmap(path, ProbMap(rng.uniform(0, 1, (2, 2))))
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(BadMagic):
            read_probmap(path)

    def test_truncated_payload(self, tmp_path, rng):
        path = tmp_path / "m.btpm"
        write_probmap(path, ProbMap(rng.uniform(0, 1, (4, 4))))
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(BadDimensions):
            read_probmap(path)

    def test_value_out_of_range(self, tmp_path, rng):
        path = tmp_path / "m.btpm"
        write_probmap(path, ProbMap(rng.uniform(0, 1, (2, 2))))
        raw = bytearray(path.read_bytes())
        raw[14:18] = np.array([1.5], dtype="<f4").tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueOutOfRange):
            read_probmap(path)


class TestManifest:
    def test_empty_manifest_is_valid(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"images": []}))
        assert load_manifest(path) == []

    def test_duplicate_id_rejected(self, tmp_path, rng):
        write_probmap(tmp_path / "a.btpm", ProbMap(rng.uniform(0, 1, (2, 2))))
        doc = {"images": [
            {"id": "a", "probmap": "a.btpm", "ground_truth": "present"},
            {"id": "a", "probmap": "a.btpm", "ground_truth": "absent"},
        ]}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(DuplicateId):
            load_manifest(path)

    def test_missing_file_rejected(self, tmp_path):
        doc = {"images": [{"id": "a", "probmap": "gone.btpm", "ground_truth": "absent"}]}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(MissingFile):
            load_manifest(path)

    def test_schema_violations(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("not json")
        with pytest.raises(SchemaError):
            load_manifest(path)
        path.write_text(json.dumps({"images": [{"id": "a"}]}))
        with pytest.raises(SchemaError):
            load_manifest(path)
        path.write_text(json.dumps({"images": [
            {"id": "a", "probmap": "x", "ground_truth": "maybe"}]}))
        with pytest.raises(SchemaError):
            load_manifest(path)

    def test_save_load_round_trip(self, tmp_path, rng):
        images = generate_synthetic_corpus(8, 8, 8, 0.0, 1, tmp_path)
        loaded = load_manifest(tmp_path / "manifest.json")
        assert [i.id for i in loaded] == [i.id for i in images]
        assert [i.ground_truth for i in loaded] == [i.ground_truth for i in images]

    def test_model_prob_round_trip_and_label(self, tmp_path, rng):
        write_probmap(tmp_path / "a.btpm", ProbMap(rng.uniform(0, 1, (2, 2))))
        images = [LabeledImage(id="a", probmap_path=tmp_path / "a.btpm",
                               ground_truth=PRESENT, model_prob=0.75)]
        save_manifest(tmp_path / "m.json", images)
        loaded = load_manifest(tmp_path / "m.json")
        assert loaded[0].model_prob == 0.75
        assert loaded[0].model_label == PRESENT
        assert loaded[0].category == "tp"


class TestSyntheticCorpus:
    def test_large_manifest_loads(self, desk_corpus):
        _, _, root = desk_corpus
        loaded = load_manifest(root / "manifest.json")
        assert len(loaded) == 96
        assert all(img.probmap_path.is_file() for img in loaded)

    def test_noise_free_corpus_is_learnable_to_perfection(self, tmp_path):
        images = generate_synthetic_corpus(40, 24, 24, 0.0, 3, tmp_path)
        store = ImageStore(images)
        items = [TrainItem(store.map_for(i.id), i.ground_truth) for i in images]
        result = train_theta(items, default_train_config(len(items)))
        assert evaluate_accuracy(items, result.theta, 0.5) == 1.0

    def test_label_noise_creates_all_categories(self, desk_corpus):
        store, _, _ = desk_corpus
        cats = {img.category for img in store.images}
        assert cats == {"tp", "tn", "fp", "fn"}

    def test_minimum_corpus_with_noise_covers_categories(self, tmp_path):
        # seed chosen so the 8-image corpus hits all four categories
        # under its own trained model
        images = generate_synthetic_corpus(8, 16, 16, 0.25, 7, tmp_path / "c8")
        store = ImageStore(images)
        items = [TrainItem(store.map_for(i.id), i.ground_truth) for i in images]
        result = train_theta(items, default_train_config(len(items)))
        annotated = store.annotate(result.theta)
        cats = {img.category for img in annotated.images}
        assert cats == {"tp", "tn", "fp", "fn"}

    def test_same_seed_is_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_synthetic_corpus(12, 16, 16, 0.3, 9, a)
        generate_synthetic_corpus(12, 16, 16, 0.3, 9, b)
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
        for pm in sorted((a / "probmaps").iterdir()):
            assert pm.read_bytes() == (b / "probmaps" / pm.name).read_bytes()

    def test_content_shapes(self, tmp_path):
        images = generate_synthetic_corpus(10, 24, 24, 0.0, 2, tmp_path)
        store = ImageStore(images)
        for i, img in enumerate(images):
            values = store.map_for(img.id).values
            if i % 2 == 0:
                assert values.max() >= 0.70
            else:
                assert values.max() < 0.30

    def test_too_small_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(4, 8, 8, 0.0, 1, tmp_path)


class TestImageStore:
    def test_annotate_fills_model_outputs(self, desk_corpus):
        store, theta, _ = desk_corpus
        for img in store.images:
            assert img.model_prob is not None
            assert img.model_label in (ABSENT, PRESENT)

    def test_unknown_id(self, desk_corpus):
        store, _, _ = desk_corpus
        with pytest.raises(KeyError):
            store.image_for("nope")
