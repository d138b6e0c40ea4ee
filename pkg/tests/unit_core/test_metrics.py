# Folder: platter/tests/unit_core
# File:   test_metrics.py

import csv

import numpy as np
import pytest
import scipy.linalg
from PIL import Image

from pl_core.block_1_data.b1f3_synthesize_dataset import SynthSpec, b1f3_synthesize_dataset
from pl_core.block_2_model.b2f2_init_params import b2f2_init_params
from pl_core.block_5_metrics.b5f1_gaussian_stats import GaussianStats, b5f1_gaussian_stats
from pl_core.block_5_metrics.b5f2_frechet import b5f2_frechet_distance
from pl_core.block_5_metrics.b5f3_extractors import (
    DeskClassifier,
    DeskExtractor,
    ImportedFeatures,
    load_extractor,
    load_imported,
    read_feature_file,
    save_extractor,
    write_feature_file,
)
from pl_core.block_5_metrics.b5f4_fid import POOLED, b5f4_compute_fid, b5f4_fid_from_features, b5f4_per_category_fid
from pl_core.block_5_metrics.b5f5_segmentation import b5f5_iou, b5f5_segment_generated
from pl_core.block_5_metrics.b5f6_shape_report import (
    IoUReport,
    IoURow,
    b5f6_generate_samples,
    b5f6_generate_styles,
    b5f6_shape_preservation_report,
)
from pl_core.block_5_metrics.b5f7_reports import FID_FIELDS, IOU_FIELDS, iou_report_rows, render_grid, write_csv_report
from pl_core.errors import ConfigError, DataError

TINY = dict(latent_dim=8, feature_channels=8, base_channels=8, max_channels=16, latent_channels=4, class_channels=4)


class ChannelMeans:
    """Per-channel image means as a 3-dim feature."""

    name = "channel-means"
    version = "t1"
    dim = 3

    def extract(self, images):
        arr = np.asarray(images, dtype=np.float64)
        return arr.reshape(len(arr), -1, 3).mean(axis=1)


def _stats(mean, cov):
    return GaussianStats(mean=np.asarray(mean, dtype=np.float64), cov=np.asarray(cov, dtype=np.float64), n=10)


def _random_spd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + 0.1 * np.eye(d)


def _images(n, seed, size=8):
    return np.random.default_rng(seed).uniform(-1, 1, size=(n, size, size, 3)).astype(np.float32)


def _oracle(a, b):
    diff = a.mean - b.mean
    root = scipy.linalg.sqrtm(a.cov @ b.cov).real
    return float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2 * np.trace(root))


# ---- gaussian fit ----

def test_gaussian_stats_two_points():
    s = b5f1_gaussian_stats(np.array([[0.0, 0.0], [2.0, 2.0]]))
    assert np.allclose(s.mean, [1.0, 1.0])
    assert np.allclose(s.cov, [[2.0, 2.0], [2.0, 2.0]])
    p = b5f1_gaussian_stats(np.array([[0.0, 0.0], [2.0, 2.0]]), population=True)
    assert np.allclose(p.cov, [[1.0, 1.0], [1.0, 1.0]])


def test_gaussian_stats_rejects_bad_input():
    with pytest.raises(DataError):
        b5f1_gaussian_stats(np.zeros((1, 4)))
    with pytest.raises(DataError):
        b5f1_gaussian_stats(np.zeros(4))
    with pytest.raises(DataError):
        b5f1_gaussian_stats(np.array([[0.0, np.nan], [1.0, 1.0]]))


def test_gaussian_stats_one_dim_cov_is_matrix():
    s = b5f1_gaussian_stats(np.array([[0.0], [1.0], [2.0]]))
    assert s.cov.shape == (1, 1)
    assert s.cov[0, 0] == pytest.approx(1.0)


# ---- fréchet ----

def test_frechet_of_identical_gaussians_is_zero():
    rng = np.random.default_rng(0)
    s = _stats(rng.normal(size=4), _random_spd(rng, 4))
    assert b5f2_frechet_distance(s, s) == pytest.approx(0.0, abs=1e-8)


def test_frechet_one_dim_unit_shift():
    assert b5f2_frechet_distance(_stats([0.0], [[1.0]]), _stats([1.0], [[1.0]])) == pytest.approx(1.0)


def test_frechet_matches_matrix_sqrt_oracle():
    rng = np.random.default_rng(1)
    for d in (2, 5, 16):
        a = _stats(rng.normal(size=d), _random_spd(rng, d))
        b = _stats(rng.normal(size=d), _random_spd(rng, d))
        fd = b5f2_frechet_distance(a, b)
        assert fd == pytest.approx(_oracle(a, b), rel=1e-6, abs=1e-8)
        assert fd == pytest.approx(b5f2_frechet_distance(b, a), rel=1e-8, abs=1e-10)


def test_frechet_is_rotation_invariant():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    a = _stats(rng.normal(size=6), _random_spd(rng, 6))
    b = _stats(rng.normal(size=6), _random_spd(rng, 6))
    ra = _stats(q @ a.mean, q @ a.cov @ q.T)
    rb = _stats(q @ b.mean, q @ b.cov @ q.T)
    assert b5f2_frechet_distance(ra, rb) == pytest.approx(b5f2_frechet_distance(a, b), rel=1e-7)


def test_frechet_handles_singular_covariances():
    a = _stats([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])
    assert b5f2_frechet_distance(a, a) == pytest.approx(0.0, abs=1e-8)


def test_frechet_dim_mismatch():
    with pytest.raises(DataError):
        b5f2_frechet_distance(_stats([0.0], [[1.0]]), _stats([0.0, 0.0], np.eye(2)))


def test_gaussian_stats_rejects_indefinite_covariance():
    with pytest.raises(ValueError):
        _stats([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])


# ---- fid ----

def test_fid_of_a_set_with_itself_is_zero():
    x = _images(12, seed=3)
    assert b5f4_compute_fid(x, x, ChannelMeans()) == pytest.approx(0.0, abs=1e-8)


def test_population_fid_ignores_duplication():
    x, y = _images(10, seed=4), _images(9, seed=5)
    once = b5f4_compute_fid(x, y, ChannelMeans(), population=True)
    twice = b5f4_compute_fid(np.concatenate([x, x]), y, ChannelMeans(), population=True)
    assert twice == pytest.approx(once, rel=1e-9)


def test_fid_rejects_empty_side():
    with pytest.raises(DataError):
        b5f4_compute_fid(np.zeros((0, 8, 8, 3)), _images(3, seed=0), ChannelMeans())


def test_per_category_fid_marks_undersized_and_pools():
    gen = {0: _images(4, seed=1), 1: _images(1, seed=2)}
    ref = {0: _images(4, seed=3), 1: _images(3, seed=4)}
    res = b5f4_per_category_fid(gen, ref, ChannelMeans(), category_names=["soup", "rice"])
    assert res["status"] == "OK"
    rows = res["rows"]
    assert [r["category"] for r in rows] == [0, 1, POOLED]
    assert rows[0]["name"] == "soup" and rows[0]["fid"] is not None and rows[0]["warning"] == ""
    assert rows[1]["fid"] is None and rows[1]["warning"].startswith("undersized")
    assert (rows[2]["n_generated"], rows[2]["n_reference"]) == (5, 7)
    expected = b5f4_fid_from_features(
        ChannelMeans().extract(np.concatenate([gen[0], gen[1]])),
        ChannelMeans().extract(np.concatenate([ref[0], ref[1]])),
    )
    assert res["pooled"] == pytest.approx(expected)
    assert res["diag"]["skipped"] == [1]


def test_per_category_fid_without_categories_fails():
    res = b5f4_per_category_fid({}, {}, ChannelMeans())
    assert res["status"] == "FAIL"
    assert res["diag"]["reason"] == "no_categories"


# ---- extractors and feature files ----

def test_feature_file_round_trip(tmp_path):
    x = np.random.default_rng(0).normal(size=(5, 3))
    write_feature_file(tmp_path / "a.feat", x, "channel-means")
    name, back = read_feature_file(tmp_path / "a.feat")
    assert name == "channel-means"
    assert np.array_equal(back, x)
    imported = load_imported(tmp_path / "a.feat", expected_name="channel-means")
    assert isinstance(imported, ImportedFeatures) and imported.dim == 3
    with pytest.raises(DataError):
        imported.extract(_images(1, seed=0))
    with pytest.raises(DataError):
        load_imported(tmp_path / "a.feat", expected_name="other")


def test_feature_file_header_must_match_rows(tmp_path):
    p = tmp_path / "bad.feat"
    p.write_text('{"extractor": "x", "dim": 2, "n": 3}\n1.0 2.0\n3.0 4.0\n', encoding="utf-8")
    with pytest.raises(DataError):
        read_feature_file(p)
    p.write_text('{"extractor": "x", "dim": 2, "n": 2}\n1.0 2.0\n3.0\n', encoding="utf-8")
    with pytest.raises(DataError):
        read_feature_file(p)
    p.write_text("not json\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_feature_file(p)


def test_desk_extractor_is_deterministic_and_persists(tmp_path):
    ext = DeskExtractor(DeskClassifier(3, feature_dim=16, width=8), image_size=32)
    x = _images(5, seed=6, size=32)
    f1, f2 = ext.extract(x), ext.extract(x)
    assert f1.shape == (5, 16) and f1.dtype == np.float64
    assert np.array_equal(f1, f2)
    assert ext.classify(x).shape == (5,)

    save_extractor(ext, tmp_path / "extractor.pt")
    back = load_extractor(tmp_path / "extractor.pt")
    assert back.version == ext.version
    assert np.array_equal(back.extract(x), f1)
    with pytest.raises(DataError):
        ext.extract(_images(2, seed=0, size=16))


# ---- segmentation and iou ----

def test_iou_cases():
    a = np.array([[1, 1, 1]])
    b = np.array([[1, 0, 0]])
    assert b5f5_iou(a, b) == pytest.approx(1 / 3)
    assert b5f5_iou(np.zeros((4, 4)), np.zeros((4, 4))) == 1.0
    assert b5f5_iou(np.eye(3), 1 - np.eye(3)) == 0.0
    with pytest.raises(DataError):
        b5f5_iou(np.zeros((2, 2)), np.zeros((3, 3)))


def test_segmentation_keeps_largest_component_and_fills_holes():
    img = np.full((20, 20, 3), -1.0, dtype=np.float32)
    img[2:12, 2:12] = 0.5
    img[5:8, 5:8] = -1.0
    img[16, 16] = 0.5
    seg = b5f5_segment_generated(img, (0, 0, 0))
    expected = np.zeros((20, 20), dtype=np.uint8)
    expected[2:12, 2:12] = 1
    assert np.array_equal(seg, expected)
    assert not b5f5_segment_generated(np.full((8, 8, 3), -1.0), (0, 0, 0)).any()


# ---- generation reports ----

def _shape_inputs(n=3):
    res = b1f3_synthesize_dataset(SynthSpec(num_images=2 * n, num_categories=2, image_size=32, seed=1, render_container=False))
    return res["shape_set"]


def test_generate_styles_shares_z_per_column():
    p = b2f2_init_params(32, seed=0, **TINY)
    shape_set = _shape_inputs()
    out = b5f6_generate_styles(p, shape_set.images(), styles_per_input=4, seed=9)
    assert out.shape == (3, 4, 32, 32, 3)
    again = b5f6_generate_styles(p, shape_set.images(), styles_per_input=4, seed=9)
    assert np.array_equal(out, again)
    with pytest.raises(ConfigError):
        b5f6_generate_styles(p, shape_set.images(), styles_per_input=2, seed=0, category=1)


def test_generate_samples_carry_categories():
    p = b2f2_init_params(32, num_categories=2, seed=0, **TINY)
    ds = b5f6_generate_samples(p, _shape_inputs(), n=5, seed=2, category=1)
    assert ds.size == 5
    assert ds.categories().tolist() == [1] * 5
    assert ds.category_names == _shape_inputs().category_names


def test_shape_report_on_untrained_model_is_bounded():
    p = b2f2_init_params(32, seed=0, **TINY)
    shape_set = _shape_inputs()
    inputs = [(it.image, it.mask) for it in shape_set.items]
    report = b5f6_shape_preservation_report(inputs, p, styles_per_input=2, seed=0)
    assert len(report.rows) == 6
    assert all(0.0 <= r.iou <= 1.0 for r in report.rows)
    assert report.min_iou <= report.mean_iou
    with pytest.raises(DataError):
        b5f6_shape_preservation_report([], p, styles_per_input=2, seed=0)


def test_iou_report_must_agree_with_rows():
    rows = [IoURow(input_id="a", style_index=0, iou=0.5), IoURow(input_id="a", style_index=1, iou=1.0)]
    assert IoUReport.from_rows(rows).mean_iou == pytest.approx(0.75)
    with pytest.raises(ValueError):
        IoUReport(rows=rows, mean_iou=0.9, min_iou=0.5)
    with pytest.raises(ValueError):
        IoUReport(rows=[], mean_iou=0.0, min_iou=0.0)


def test_reports_on_disk(tmp_path):
    rows = [IoURow(input_id="a", style_index=0, iou=0.5), IoURow(input_id="b", style_index=0, iou=1.0)]
    path = write_csv_report(tmp_path / "iou.csv", iou_report_rows(IoUReport.from_rows(rows)), IOU_FIELDS)
    with path.open(newline="") as fh:
        table = list(csv.DictReader(fh))
    assert [r["input_id"] for r in table] == ["a", "b", "mean", "min"]
    assert table[-1]["style_index"] == ""

    write_csv_report(tmp_path / "fid.csv", [{"category": 0, "fid": None}], FID_FIELDS)
    assert (tmp_path / "fid.csv").read_text().splitlines()[0] == ",".join(FID_FIELDS)

    grid = render_grid(np.zeros((2, 3, 8, 8, 3), dtype=np.float32), tmp_path / "grid.png", pad=2)
    with Image.open(grid) as im:
        assert im.size == (3 * 8 + 4 * 2, 2 * 8 + 3 * 2)


# ---- statistical properties ----

def test_gaussian_stats_of_standard_normal_sample():
    x = np.random.default_rng(30).standard_normal((10000, 4))
    s = b5f1_gaussian_stats(x)
    assert np.all(np.abs(s.mean) < 0.05)
    assert np.all(np.abs(s.cov - np.eye(4)) < 0.05)


def test_gaussian_stats_ignore_row_order():
    rng = np.random.default_rng(31)
    x = rng.normal(size=(50, 6))
    a, b = b5f1_gaussian_stats(x), b5f1_gaussian_stats(x[rng.permutation(50)])
    assert np.allclose(a.mean, b.mean, rtol=0, atol=1e-12)
    assert np.allclose(a.cov, b.cov, rtol=0, atol=1e-12)


def test_frechet_matches_oracle_on_many_random_pairs():
    rng = np.random.default_rng(32)
    for _ in range(100):
        a = _stats(rng.normal(size=8), _random_spd(rng, 8))
        b = _stats(rng.normal(size=8), _random_spd(rng, 8))
        assert b5f2_frechet_distance(a, b) == pytest.approx(_oracle(a, b), rel=1e-6, abs=1e-8)


def test_fid_halves_of_one_category_beat_another_category():
    res = b1f3_synthesize_dataset(SynthSpec(num_images=80, num_categories=2, image_size=32, seed=33, render_container=False))
    groups = res["texture_set"].by_category()
    own = groups[0].images()
    half = len(own) // 2
    same = b5f4_compute_fid(own[:half], own[half:], ChannelMeans())
    other = b5f4_compute_fid(own[:half], groups[1].images(), ChannelMeans())
    assert same < other


def test_iou_is_symmetric_and_grows_with_overlap():
    rng = np.random.default_rng(34)
    truth = np.zeros((16, 16), dtype=np.uint8)
    truth[4:12, 4:12] = 1
    other = (rng.uniform(size=(16, 16)) < 0.4).astype(np.uint8)
    assert b5f5_iou(truth, other) == b5f5_iou(other, truth)

    pred = np.zeros_like(truth)
    scores = []
    for row in range(4, 12):
        pred[row, 4:12] = 1
        scores.append(b5f5_iou(pred, truth))
    assert all(a < b for a, b in zip(scores, scores[1:]))
    assert scores[-1] == 1.0


def test_container_scenes_segment_worse_than_food_only_scenes():
    def mean_iou(render_container):
        spec = SynthSpec(num_images=8, num_categories=2, image_size=32, seed=35, render_container=render_container)
        texture_set = b1f3_synthesize_dataset(spec)["texture_set"]
        scores = [
            b5f5_iou(b5f5_segment_generated(it.image, texture_set.background_color), it.mask)
            for it in texture_set.items
        ]
        return float(np.mean(scores))

    with_plate = mean_iou(True)
    assert with_plate < 0.9
    assert with_plate < mean_iou(False)
