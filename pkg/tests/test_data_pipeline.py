import json

import numpy as np
import pytest
import torch
from PIL import Image

from dosiqa.data import (
    DATA_ROOT_ENV,
    DatasetManifest,
    ManifestEntry,
    generate_synthetic_dataset,
    load_image,
    load_manifest,
    make_splits,
    preprocess,
    save_manifest,
)
from dosiqa.data.preprocess import crop_offsets, default_resize, resize
from dosiqa.errors import ConfigError, DecodeError, ImageIOError, ParseError, ValidationError
from dosiqa.rating_stats import KONIQ_SCALE, LabelCategory, fit_a, mos_of


def write_manifest(path, header, entries):
    lines = [json.dumps(header)] + [json.dumps(e) for e in entries]
    path.write_text("\n".join(lines) + "\n")
    return path


HEADER = {"name": "t", "scale": KONIQ_SCALE.to_dict()}


# --- manifests -------------------------------------------------------------

def test_dos_sum_tolerance_boundary(tmp_path):
    dos = [0.2, 0.2, 0.2, 0.2, 0.199999]
    mos = float(np.dot(dos, [1, 2, 3, 4, 5]) / sum(dos))
    m = load_manifest(write_manifest(tmp_path / "m.jsonl", HEADER,
                                     [{"image_path": "a.png", "mos": mos, "dos": dos}]))
    assert m.category is LabelCategory.DOS_AVAILABLE
    with pytest.raises(ValidationError):
        load_manifest(write_manifest(tmp_path / "m2.jsonl", HEADER,
                                     [{"image_path": "a.png", "mos": 3.0, "dos": [0.2] * 4 + [0.19]}]))


def test_declared_category_is_enforced(tmp_path):
    header = dict(HEADER, category="MOS_ONLY")
    with pytest.raises(ValidationError, match="entry 1"):
        load_manifest(write_manifest(tmp_path / "m.jsonl", header, [
            {"image_path": "a.png", "mos": 3.0}, {"image_path": "b.png", "mos": 3.0, "sos": 0.5}]))


def test_category_inference(tmp_path):
    cases = [([{"image_path": "a", "mos": 2.0}], LabelCategory.MOS_ONLY),
             ([{"image_path": "a", "mos": 2.0, "sos": 0.4}], LabelCategory.MOS_SOS_AVAILABLE),
             ([{"image_path": "a", "mos": 2.0, "raw_ratings": [1, 2, 3]}], LabelCategory.DOS_AVAILABLE)]
    for i, (entries, cat) in enumerate(cases):
        assert load_manifest(write_manifest(tmp_path / f"{i}.jsonl", HEADER, entries)).category is cat
    with pytest.raises(ValidationError):
        load_manifest(write_manifest(tmp_path / "mix.jsonl", HEADER, [
            {"image_path": "a", "mos": 2.0}, {"image_path": "b", "mos": 2.0, "sos": 0.3}]))


def test_parse_errors_carry_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(HEADER) + "\n" + '{"image_path": "a", "mos": 3}\n{not json\n')
    with pytest.raises(ParseError, match=":3:"):
        load_manifest(p)
    p.write_text(json.dumps(HEADER) + "\n" + '{"mos": 3}\n')
    with pytest.raises(ParseError, match="line 2"):
        load_manifest(p)


def test_data_root_env(tmp_path, monkeypatch):
    m = load_manifest(write_manifest(tmp_path / "m.jsonl", HEADER, [{"image_path": "x.png", "mos": 3.0}]))
    assert m.image_file(0) == tmp_path / "x.png"
    monkeypatch.setenv(DATA_ROOT_ENV, "/data/iqa")
    assert str(m.image_file(0)) == "/data/iqa/x.png"


def test_missing_image_names_path(tmp_path):
    with pytest.raises(ImageIOError, match="nope.png"):
        load_image(tmp_path / "nope.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ImageIOError):
        load_image(tmp_path / "junk.png")


# --- preprocessing ---------------------------------------------------------

def test_constant_image_any_crop():
    img = np.full((120, 90, 3), 77, dtype=np.uint8)
    for seed in range(5):
        out = preprocess(img, True, np.random.default_rng(seed), 86, 64)
        assert out.shape == (3, 64, 64)
        assert torch.all(out == 77 / 255.0)


def test_crop_determinism_and_eval_centre():
    a = [crop_offsets(512, 384, True, np.random.default_rng(7)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    assert crop_offsets(512, 384, False) == (64, 64)
    img = np.random.default_rng(0).integers(0, 256, (100, 100, 3), dtype=np.uint8)
    e1 = preprocess(img, False, np.random.default_rng(1), 86, 64)
    e2 = preprocess(img, False, np.random.default_rng(2), 86, 64)
    assert torch.equal(e1, e2)


def test_resize_identity_at_target_and_crop_bounds():
    img = np.random.default_rng(0).integers(0, 256, (512, 512, 3), dtype=np.uint8)
    assert np.array_equal(resize(img, 512), img)
    for seed in range(20):
        top, left = crop_offsets(512, 384, True, np.random.default_rng(seed))
        assert 0 <= top <= 128 and 0 <= left <= 128
    out = preprocess(img, True, np.random.default_rng(3))
    assert out.shape == (3, 384, 384) and 0 <= float(out.min()) and float(out.max()) <= 1


def test_non_rgb_rejected():
    with pytest.raises(DecodeError):
        preprocess(np.zeros((10, 10)), False)
    with pytest.raises(DecodeError):
        preprocess(Image.new("L", (10, 10)), False)


def test_default_resize_pairs():
    assert default_resize(384) == 512 and default_resize(64) == 86


# --- splits ----------------------------------------------------------------

def test_split_sizes_and_partition():
    plan = make_splits(10, 0)
    assert len(plan) == 10
    for tr, te in plan.splits:
        assert len(tr) == 8 and len(te) == 2
        assert set(tr).isdisjoint(te) and set(tr) | set(te) == set(range(10))


def test_split_determinism():
    a, b = make_splits(101, 3), make_splits(101, 3)
    for (t1, s1), (t2, s2) in zip(a.splits, b.splits):
        assert t1.tobytes() == t2.tobytes() and s1.tobytes() == s2.tobytes()
    assert [a.digest(k) for k in range(10)] == [b.digest(k) for k in range(10)]
    assert make_splits(101, 4).digest(0) != a.digest(0)


def test_split_test_frequency():
    counts = np.zeros(10000)
    for _, te in make_splits(10000, 0).splits:
        counts[te] += 1
    assert abs(counts.mean() - 2.0) < 1e-12
    assert 0.15 < np.mean(counts == 2) < 0.45  # binomial(10, 0.2) mass at 2 is ~0.30


def test_split_errors():
    with pytest.raises(ConfigError):
        make_splits(4, 0)
    with pytest.raises(ConfigError):
        make_splits(10, 0, train_fraction=1.0)


# --- synthetic generator ---------------------------------------------------

def test_synthetic_deterministic_bytes(tmp_path):
    generate_synthetic_dataset(6, KONIQ_SCALE, "DOS_AVAILABLE", 11, 0.15, tmp_path / "a", image_size=32)
    generate_synthetic_dataset(6, KONIQ_SCALE, "DOS_AVAILABLE", 11, 0.15, tmp_path / "b", image_size=32)
    for rel in ["manifest.jsonl", "oracle.json", "images/00003.png"]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_synthetic_oracle_and_roundtrip(tmp_path):
    m = generate_synthetic_dataset(12, KONIQ_SCALE, "DOS_AVAILABLE", 2, 0.15, tmp_path, image_size=32)
    back = load_manifest(tmp_path / "manifest.jsonl")
    assert back.entries == m.entries and back.scale == m.scale and back.category == m.category
    assert [e.mos for e in m.entries] == m.oracle["mos"]
    for i in range(len(m)):
        assert abs(mos_of(m.labels(i).dos) - m.entries[i].mos) < 1e-12


def test_synthetic_categories_expose_labels(tmp_path):
    for cat in LabelCategory:
        m = generate_synthetic_dataset(4, KONIQ_SCALE, cat, 0, 0.15, tmp_path / cat.value, image_size=32)
        e = m.entries[0]
        assert (e.sos is not None) == (cat is LabelCategory.MOS_SOS_AVAILABLE)
        assert (e.dos is not None) == (cat is LabelCategory.DOS_AVAILABLE)
        assert load_manifest(tmp_path / cat.value / "manifest.jsonl").category is cat


def test_synthetic_quadratic_law_recovered(tmp_path):
    m = generate_synthetic_dataset(256, KONIQ_SCALE, "MOS_SOS_AVAILABLE", 0, 0.15, tmp_path, image_size=24)
    a = fit_a([(e.mos, e.sos) for e in m.entries], KONIQ_SCALE)
    assert abs(a - 0.15) / 0.15 < 0.05


def test_manifest_save_load_roundtrip(tmp_path):
    entries = [ManifestEntry("a.png", 2.5, sos=0.6), ManifestEntry("b.png", 4.0, sos=0.3)]
    m = DatasetManifest("rt", KONIQ_SCALE, LabelCategory.MOS_SOS_AVAILABLE, entries)
    back = load_manifest(save_manifest(m, tmp_path / "m.jsonl"))
    assert back.entries == entries and back.name == "rt"
