from __future__ import annotations

import numpy as np
import pytest

from defenses.clipping import norm_clip, weak_dp
from defenses.diagnostics import DefenseDiagnostics
from defenses.flame import flame
from defenses.multi_krum import krum_scores, multi_krum
from defenses.pipeline import (
    DefensePipeline,
    FlameStage,
    MultiKrumStage,
    NormClipStage,
    WeakDPStage,
    apply_pipeline,
    parse_pipeline,
)
from utils import ConfigurationError


def brute_force_scores(rows: np.ndarray, f: int) -> np.ndarray:
    n = rows.shape[0]
    scores = []
    for i in range(n):
        distances = sorted(float(np.sum((rows[i] - rows[j]) ** 2)) for j in range(n) if j != i)
        scores.append(sum(distances[: n - f - 2]))
    return np.array(scores)


def clustered_rows(rng: np.random.Generator, n: int = 10, dim: int = 20) -> np.ndarray:
    base = rng.normal(size=dim)
    return base + 0.01 * rng.normal(size=(n, dim))


# ---------------------------------------------------------------------------
# Multi-Krum
# ---------------------------------------------------------------------------


def test_krum_scores_match_brute_force(update_factory):
    rng = np.random.default_rng(0)
    for _ in range(20):
        rows = rng.normal(size=(9, 6))

        np.testing.assert_allclose(krum_scores(update_factory(rows), 2), brute_force_scores(rows, 2), rtol=1e-12)


def test_multi_krum_filters_a_large_outlier(update_factory):
    rng = np.random.default_rng(1)
    for _ in range(100):
        rows = clustered_rows(rng)
        outlier = int(rng.integers(0, 10))
        rows[outlier] = rng.normal(size=20) * 100 * np.linalg.norm(rows[0]) / np.sqrt(20)

        survivors, diagnostics = multi_krum(update_factory(rows), f=1, m=8)

        assert len(survivors) == 8
        assert outlier in diagnostics.filtered_ids
        assert diagnostics.admitted_ids | diagnostics.filtered_ids == frozenset(range(10))


def test_identical_updates_keep_the_lowest_client_ids(update_factory):
    updates = update_factory(np.ones((10, 4)))

    survivors, _ = multi_krum(updates, f=1, m=6)

    assert [update.client_id for update in survivors] == [0, 1, 2, 3, 4, 5]


def test_m_equal_to_n_minus_f_keeps_that_many(update_factory):
    rows = np.random.default_rng(2).normal(size=(10, 5))

    survivors, diagnostics = multi_krum(update_factory(rows), f=2, m=8)

    assert len(survivors) == 8
    assert len(diagnostics.filtered_ids) == 2


def test_default_m_keeps_n_minus_f_minus_one(update_factory):
    survivors, _ = multi_krum(update_factory(np.random.default_rng(3).normal(size=(10, 5))), f=1)

    assert len(survivors) == 8


def test_multi_krum_skips_small_rounds(update_factory):
    updates = update_factory(np.eye(4))

    survivors, diagnostics = multi_krum(updates, f=1)

    assert survivors == updates
    assert diagnostics.notes == ("multi_krum_skipped(n=4)",)
    assert not diagnostics.filtered_ids


# ---------------------------------------------------------------------------
# Norm clipping and weak DP
# ---------------------------------------------------------------------------


def test_norm_clip_halves_a_norm_six_delta(update_factory):
    rows = np.array([[0.0, 0.0, 0.0, 6.0], [1.0, 0.0, 0.0, 0.0]])

    clipped, diagnostics = norm_clip(update_factory(rows), 3.0)

    assert clipped[0].delta.values.tolist() == [0.0, 0.0, 0.0, 3.0]
    assert clipped[1].delta.values.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert diagnostics.clip_count == 1
    assert diagnostics.admitted_ids == frozenset({0, 1})


def test_norm_clip_bounds_every_update(update_factory):
    rows = np.random.default_rng(4).normal(scale=5.0, size=(30, 12))

    clipped, _ = norm_clip(update_factory(rows), 3.0)

    assert all(update.delta.norm() <= 3.0 + 1e-9 for update in clipped)
    with pytest.raises(ConfigurationError):
        norm_clip(update_factory(rows), 0.0)


def test_weak_dp_with_zero_sigma_is_norm_clip(update_factory):
    rows = np.random.default_rng(5).normal(scale=3.0, size=(5, 8))

    noisy, diagnostics = weak_dp(update_factory(rows), 3.0, 0.0, np.random.default_rng(0))
    clipped, _ = norm_clip(update_factory(rows), 3.0)

    for left, right in zip(noisy, clipped):
        assert left.delta.values.tobytes() == right.delta.values.tobytes()
    assert diagnostics.noise_sigma_applied == 0.0


def test_weak_dp_noise_has_the_requested_std(update_factory):
    rows = np.zeros((1, 20000))

    noisy, diagnostics = weak_dp(update_factory(rows), 3.0, 0.01, np.random.default_rng(6))

    assert np.std(noisy[0].delta.values) == pytest.approx(0.01, rel=0.03)
    assert diagnostics.noise_sigma_applied == 0.01


def test_weak_dp_is_reproducible_from_the_server_stream(update_factory):
    rows = np.random.default_rng(7).normal(size=(4, 6))

    first, _ = weak_dp(update_factory(rows), 3.0, 0.1, np.random.default_rng(11))
    second, _ = weak_dp(update_factory(rows), 3.0, 0.1, np.random.default_rng(11))

    assert [update.delta.values.tobytes() for update in first] == [update.delta.values.tobytes() for update in second]


# ---------------------------------------------------------------------------
# FLAME
# ---------------------------------------------------------------------------


def test_flame_admits_identical_updates_and_only_adds_noise(update_factory):
    rows = np.tile(np.arange(1.0, 9.0), (5, 1))
    updates = update_factory(rows)

    survivors, diagnostics = flame(updates, 0.001, np.random.default_rng(0))

    assert diagnostics.admitted_ids == frozenset(range(5))
    assert diagnostics.clip_count == 0
    assert diagnostics.noise_sigma_applied == pytest.approx(0.001 * np.linalg.norm(rows[0]))
    for update in survivors:
        assert np.abs(update.delta.values - rows[0]).max() < 0.1


def test_flame_excludes_the_opposite_update(update_factory):
    rng = np.random.default_rng(8)
    rows = clustered_rows(rng)
    rows[3] = -rows[3]

    survivors, diagnostics = flame(update_factory(rows), 0.001, np.random.default_rng(0))

    assert 3 in diagnostics.filtered_ids
    assert 3 not in [update.client_id for update in survivors]
    assert not diagnostics.notes


def test_flame_noise_scales_with_median_norm(update_factory):
    rows = np.ones((3, 20000))
    norm = float(np.linalg.norm(rows[0]))

    survivors, _ = flame(update_factory(rows), 0.001, np.random.default_rng(9))

    assert np.std(survivors[0].delta.values - 1.0) == pytest.approx(0.001 * norm, rel=0.03)


def test_flame_clips_admitted_updates_to_the_median_norm(update_factory):
    direction = np.array([1.0, 2.0, 2.0])
    rows = np.array([direction * scale for scale in (1.0, 2.0, 3.0, 4.0, 5.0)])

    survivors, diagnostics = flame(update_factory(rows), 0.0, np.random.default_rng(0))

    assert diagnostics.clip_count == 2
    assert max(update.delta.norm() for update in survivors) == pytest.approx(9.0)


def test_flame_zeroes_admitted_updates_when_the_median_norm_is_zero(update_factory):
    rows = np.zeros((5, 4))
    rows[3] = rows[4] = [1.0, 2.0, 0.0, 0.0]

    survivors, diagnostics = flame(update_factory(rows), 0.001, np.random.default_rng(0))

    assert diagnostics.admitted_ids == frozenset(range(5))
    assert diagnostics.clip_count == 2
    assert diagnostics.noise_sigma_applied == 0.0
    assert all(not update.delta.values.any() for update in survivors)


def test_flame_skips_fewer_than_three_updates(update_factory):
    updates = update_factory([[1.0, 0.0], [0.0, 1.0]])

    survivors, diagnostics = flame(updates, 0.001, np.random.default_rng(0))

    assert survivors == updates
    assert diagnostics.notes == ("flame_skipped(n=2)",)


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


def test_parse_pipeline_reads_stage_calls():
    pipeline = parse_pipeline("norm_clip(3.0), multi_krum(1, 8)")

    assert pipeline.stages == (NormClipStage(3.0), MultiKrumStage(1, 8))
    assert str(pipeline) == "norm_clip(3.0), multi_krum(1, 8)"
    assert parse_pipeline(str(pipeline)) == pipeline


@pytest.mark.parametrize("text", ["", "none", "  "])
def test_blank_pipeline_is_empty(text):
    assert parse_pipeline(text) == DefensePipeline()


def test_parse_pipeline_defaults_and_all_stage_kinds():
    pipeline = parse_pipeline("weak_dp(2.0), flame(), multi_krum(2)")

    assert pipeline.stages == (WeakDPStage(2.0, 0.001), FlameStage(0.001), MultiKrumStage(2, None))


@pytest.mark.parametrize(
    "text", ["median(1)", "norm_clip(abc)", "norm_clip(3.0", "multi_krum(1, 2, 3)", "norm_clip(-1.0)", "flame(-0.1)"]
)
def test_bad_pipeline_text_is_rejected(text):
    with pytest.raises(ConfigurationError):
        parse_pipeline(text)


def test_empty_pipeline_is_identity(update_factory):
    updates = update_factory(np.random.default_rng(10).normal(size=(4, 6)))

    survivors, diagnostics = apply_pipeline(updates, DefensePipeline())

    assert survivors == updates
    assert diagnostics == DefenseDiagnostics.passthrough(updates)


def test_stage_order_changes_the_outcome(update_factory):
    rng = np.random.default_rng(12)
    rows = 0.1 * clustered_rows(rng)
    rows[0] = rows[0] * 1000.0
    clip_first = parse_pipeline("norm_clip(3.0), multi_krum(1, 8)")
    krum_first = parse_pipeline("multi_krum(1, 8), norm_clip(3.0)")

    _, clipped_then_filtered = apply_pipeline(update_factory(rows), clip_first)
    _, filtered_then_clipped = apply_pipeline(update_factory(rows), krum_first)

    assert clipped_then_filtered.clip_count == 1
    assert filtered_then_clipped.clip_count == 0
    assert 0 in filtered_then_clipped.filtered_ids


def test_merged_diagnostics_track_every_stage(update_factory):
    rows = np.random.default_rng(13).normal(scale=4.0, size=(10, 6))
    rows[5] *= 100.0

    survivors, diagnostics = apply_pipeline(
        update_factory(rows), parse_pipeline("weak_dp(3.0, 0.001), multi_krum(1, 8)"), np.random.default_rng(0)
    )

    assert len(survivors) == 8
    assert diagnostics.admitted_ids == frozenset(update.client_id for update in survivors)
    assert diagnostics.admitted_ids | diagnostics.filtered_ids == frozenset(range(10))
    assert diagnostics.clip_count >= 1
    assert diagnostics.noise_sigma_applied == 0.001
