import numpy as np
import pytest

from valopt.dataset import (
    BatchSampler,
    FeaturePipeline,
    SplitDataset,
    apportion,
    temporal_split,
    write_split_manifest,
)
from valopt.simulator import (
    FEATURE_DIM,
    BehaviorSpec,
    EnvConfig,
    TaskSpec,
    generate_dataset,
    trajectory_features,
)
from valopt.temporal import PeriodFeatureParams


def env(k=3):
    specs = [
        TaskSpec(f"t{i}", 2.0 + i, 0.4, 100.0 * (i + 1), 5.0 + 3 * i, volume_amplitude=0.4)
        for i in range(k)
    ]
    return EnvConfig(tasks=tuple(specs), steps_per_day=24)


def make_corpus(k=3, days=10, counts=(20, 20, 10), seed=0):
    cfg = env(k)
    trajs, _ = generate_dataset(cfg, days, counts[:k], BehaviorSpec(), seed)
    return cfg, trajs


# -- temporal split -------------------------------------------------------------


def test_split_train_days_follow_protocol():
    _, trajs = make_corpus()
    split = temporal_split(trajs, 9, 10)
    assert {t.day for t in split.train} == set(range(1, 9))
    assert {t.day for t in split.val} == {9}
    assert {t.day for t in split.test} == {10}


def test_split_counts_conserved():
    _, trajs = make_corpus()
    split = temporal_split(trajs, 9, 10)
    assert len(split.train) + len(split.val) + len(split.test) == len(trajs)
    assert split.task_histogram == (20, 20, 10)


def test_split_temporal_integrity():
    _, trajs = make_corpus()
    split = temporal_split(trajs, 9, 10)
    assert max(t.day for t in split.train) < min(t.day for t in split.val)
    assert max(t.day for t in split.val) < min(t.day for t in split.test)


def test_split_single_day_rejected():
    cfg, trajs = make_corpus(days=1, counts=(3, 3, 3))
    with pytest.raises(ValueError, match="day|empty"):
        temporal_split(trajs, 1, 2)


def test_split_overlap_rejected():
    _, trajs = make_corpus()
    with pytest.raises(ValueError, match="overlapping"):
        temporal_split(trajs, 9, 9)


def test_split_unassigned_day_rejected():
    _, trajs = make_corpus()
    with pytest.raises(ValueError, match="not assigned"):
        temporal_split(trajs, 8, 10)  # day 9 would fall in no split


def test_split_manifest(tmp_path):
    _, trajs = make_corpus()
    split = temporal_split(trajs, 9, 10)
    path = tmp_path / "split.cfg"
    write_split_manifest(split, path)
    text = path.read_text()
    assert "1 = train" in text and "9 = val" in text and "10 = test" in text


# -- apportionment -----------------------------------------------------------------


def test_apportion_largest_remainder_exact():
    assert apportion((20, 20, 10), 10) == [4, 4, 2]


def test_apportion_rounds_by_remainder():
    assert apportion((1, 1, 1), 4) == [2, 1, 1]
    assert apportion((5, 3, 2), 7) == [4, 2, 1]  # raw 3.5/2.1/1.4 -> remainder picks task 0


def test_apportion_minimum_one_per_task():
    quotas = apportion((98, 1, 1), 4)
    assert quotas == [2, 1, 1]
    assert sum(quotas) == 4


def test_apportion_size_below_task_count():
    with pytest.raises(ValueError, match="batch size"):
        apportion((1, 1, 1), 2)


# -- sampling --------------------------------------------------------------------


def pipeline_for(cfg, temporal=False, window=4):
    params = PeriodFeatureParams.seeded(FEATURE_DIM, FEATURE_DIM, 7) if temporal else None
    return FeaturePipeline(cfg, window=window, history=16, k_top=2, feature_params=params)


def test_sample_batch_quotas_and_shapes():
    cfg, trajs = make_corpus()
    sampler = BatchSampler(temporal_split(trajs, 9, 10), pipeline_for(cfg))
    batch = sampler.sample_batch("train", 10, seed=0)
    assert batch.sizes == {0: 4, 1: 4, 2: 2}
    assert batch.total == 10
    for task, wins in batch.windows.items():
        assert wins.shape == (batch.sizes[task], 4, FEATURE_DIM + 1)


def test_sample_batch_deterministic():
    cfg, trajs = make_corpus()
    sampler = BatchSampler(temporal_split(trajs, 9, 10), pipeline_for(cfg))
    a = sampler.sample_batch("val", 12, seed=[3, 4])
    b = sampler.sample_batch("val", 12, seed=[3, 4])
    for task in a.windows:
        assert np.array_equal(a.windows[task], b.windows[task])
        assert np.array_equal(a.targets[task], b.targets[task])


def test_sample_batch_single_task_corpus():
    cfg, trajs = make_corpus(k=1, counts=(12,))
    sampler = BatchSampler(temporal_split(trajs, 9, 10), pipeline_for(cfg))
    batch = sampler.sample_batch("train", 6, seed=1)
    assert batch.sizes == {0: 6}


def test_sample_batch_restricted_task():
    cfg, trajs = make_corpus()
    sampler = BatchSampler(temporal_split(trajs, 9, 10), pipeline_for(cfg))
    batch = sampler.sample_batch("train", 8, seed=2, restrict_to_task=1)
    assert batch.sizes == {1: 8}


def test_sample_batch_missing_task_errors():
    cfg, trajs = make_corpus()
    only_two = [t for t in trajs if t.task != 2 or t.day == 9 or t.day == 10]
    split = temporal_split(only_two, 9, 10)
    sampler = BatchSampler(split, pipeline_for(cfg))
    with pytest.raises(ValueError, match="task missing in split"):
        sampler.sample_batch("train", 9, seed=0)


def test_window_padding_flag_and_content():
    cfg, trajs = make_corpus()
    pipe = pipeline_for(cfg, window=4)
    rows = trajectory_features(cfg, trajs[0])
    win = pipe.window_at(rows, 1)  # only steps 0..1 exist
    assert win.shape == (4, FEATURE_DIM + 1)
    assert np.all(win[:2, -1] == 1.0)  # padded rows flagged
    assert np.all(win[2:, -1] == 0.0)
    assert np.array_equal(win[2, :-1], rows[0])
    assert np.array_equal(win[3, :-1], rows[1])
    full = pipe.window_at(rows, 10)
    assert np.array_equal(full[:, :-1], rows[7:11])
    assert np.all(full[:, -1] == 0.0)


def test_pipeline_no_temporal_params_is_identity():
    cfg, trajs = make_corpus()
    pipe = pipeline_for(cfg, temporal=False)
    rows = trajectory_features(cfg, trajs[0])
    assert pipe.augment_series(rows) is rows


def test_pipeline_temporal_augments_rows():
    cfg, trajs = make_corpus()
    pipe = pipeline_for(cfg, temporal=True)
    rows = trajectory_features(cfg, trajs[0])
    aug = pipe.augment_series(rows)
    assert aug.shape == rows.shape
    assert not np.allclose(aug, rows)


def test_rollout_window_fn_matches_series_path():
    # live (incremental) augmentation must agree with whole-episode augmentation
    cfg, trajs = make_corpus()
    pipe = pipeline_for(cfg, temporal=True, window=3)
    rows = trajectory_features(cfg, trajs[0])
    series = pipe.augment_series(rows)
    build = pipe.rollout_window_fn()
    for t in range(rows.shape[0]):
        live = build(rows[: t + 1])
        stored = pipe.window_at(series, t)
        assert np.allclose(live, stored, atol=1e-12)
