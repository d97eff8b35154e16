from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import corpus
import oracles
from clickkit.annotations import Annotation
from clickkit.errors import ConfigError
from clickkit.evaluation import (MatchReport, filter_by_class, match_overlap, match_point,
                                 rate_correlation, render_rate_table, render_table)
from clickkit.events import EventBox
from clickkit.fod import detect
from clickkit.synth import preset_scene, synth_scene

GOLDEN = Path(__file__).parent / "golden"

interval_lists = st.lists(st.tuples(st.floats(0, 10), st.floats(0, 0.5)), max_size=25).map(
    lambda rows: sorted((s, s + d) for s, d in rows))


class TestPoint:
    def test_inside(self):
        rep = match_point([(1.0, 1.001)], [(0.999, 1.002)])
        assert (rep.tp, rep.fp, rep.found, rep.missed) == (1, 0, 1, 0)
        assert rep.precision == 100.0 and rep.recall == 100.0

    def test_no_detections(self):
        rep = match_point([], [(0.0, 1.0)])
        assert rep.precision == 0.0 and rep.recall == 0.0
        assert "precision-undefined" in rep.flags

    def test_boundary_inclusive(self):
        assert match_point([(0.9, 1.1)], [(0.0, 1.0)]).tp == 1

    def test_event_boxes_need_rate(self):
        with pytest.raises(ConfigError):
            match_point([EventBox(0, 10)], [])

    @given(interval_lists, interval_lists)
    def test_matches_oracle(self, det, ann):
        rep = match_point(det, ann)
        tp, found = oracles.containment_counts(det, ann)
        assert (rep.tp, rep.found) == (tp, found)
        assert rep.tp + rep.fp == rep.detections
        assert rep.found + rep.missed == rep.all_annotations


class TestOverlap:
    def test_identical(self):
        rep = match_overlap([(0.0, 1.0)], [(0.0, 1.0)])
        assert (rep.tp_full, rep.found_full) == (1, 1)

    def test_small_overlap(self):
        rep = match_overlap([(0.0, 100.0)], [(90.0, 200.0)])
        assert (rep.tp_partial, rep.fp, rep.found_partial, rep.missed) == (0, 1, 0, 1)

    def test_partial_not_full(self):
        rep = match_overlap([(0.0, 1.0)], [(0.5, 1.0)])
        assert (rep.tp_partial, rep.tp_full) == (1, 0)
        assert (rep.found_partial, rep.found_full) == (1, 1)

    @pytest.mark.parametrize("p, f", [(0.0, 0.9), (0.5, 0.4), (0.2, 1.1)])
    def test_bad_thresholds(self, p, f):
        with pytest.raises(ConfigError):
            match_overlap([], [], p, f)

    @given(interval_lists, interval_lists, st.floats(0.05, 1.0), st.floats(0.0, 1.0))
    def test_matches_pairwise_oracle(self, det, ann, full, frac):
        partial = max(full * frac, 1e-3)
        rep = match_overlap(det, ann, partial, full)
        ref = oracles.pairwise_overlap_counts(det, ann, partial, full)
        assert {k: getattr(rep, k) for k in ref} == ref

    @given(interval_lists, interval_lists)
    def test_ordering_invariants(self, det, ann):
        rep = match_overlap(det, ann)
        assert rep.tp_full <= rep.tp_partial <= rep.detections
        assert rep.found_full <= rep.found_partial <= rep.all_annotations

    @given(interval_lists, interval_lists, st.floats(0.01, 0.5), st.floats(0.01, 0.5))
    def test_tightening_partial_monotone(self, det, ann, a, b):
        lo, hi = sorted((a, b))
        assert match_overlap(det, ann, hi, 0.9).tp_partial <= \
            match_overlap(det, ann, lo, 0.9).tp_partial

    @given(interval_lists)
    def test_self_evaluation(self, ann):
        for p, f in ((0.2, 0.9), (0.2, 0.2), (0.9, 0.9)):
            rep = match_overlap(ann, ann, p, f)
            assert rep.tp_full == rep.detections and rep.found_full == rep.all_annotations

    def test_class_filter_uses_label_prefix(self):
        items = [EventBox(0, 10, 0.5, "click"), Annotation(0, 1, "echo:0.7000"),
                 Annotation(0, 1, "click:0.9")]
        assert len(filter_by_class(items, "click")) == 2
        assert filter_by_class(items, None) == items


class TestRate:
    def test_identical(self, rng):
        ann = corpus.random_intervals(rng, 200, span=20.0)
        rep = rate_correlation(ann, ann, 20.0)
        assert rep.correlation_pct == pytest.approx(100.0)
        assert rep.flags == ()

    def test_shuffled_within_bins(self, rng):
        ann = corpus.random_intervals(rng, 200, span=20.0)
        moved = []
        for s, e in ann:
            b = np.floor((s + e) / 2)
            mid = b + rng.uniform(0.1, 0.9)
            moved.append((mid - 0.01, mid + 0.01))
        assert rate_correlation(moved, ann, 20.0).correlation_pct == pytest.approx(100.0)

    def test_deletions_match_pearson_oracle(self, rng):
        ann = corpus.random_intervals(rng, 300, span=30.0)
        det = [iv for iv in ann if rng.random() >= 0.1]
        rep = rate_correlation(det, ann, 30.0)
        dc = [0] * 30
        ac = [0] * 30
        for s, e in det:
            dc[int((s + e) / 2)] += 1
        for s, e in ann:
            ac[int((s + e) / 2)] += 1
        assert rep.detected_counts.tolist() == dc
        assert rep.correlation == pytest.approx(oracles.pearson(dc, ac), abs=1e-12)

    def test_zero_variance_flagged(self):
        rep = rate_correlation([(0.5, 0.6)], [(0.5, 0.6)], 1.0)
        assert rep.correlation == 0.0
        assert rep.flags == ("correlation-undefined",)

    def test_translation_invariance(self, rng):
        ann = corpus.random_intervals(rng, 100, span=10.0)
        det = [iv for iv in ann if rng.random() < 0.7]
        shift = lambda xs: [(s + 3.0, e + 3.0) for s, e in xs]  # noqa: E731
        a = rate_correlation(det, ann, 13.0)
        b = rate_correlation(shift(det), shift(ann), 13.0)
        assert b.correlation == pytest.approx(a.correlation, abs=1e-12)

    def test_class_filter(self):
        det = [Annotation(0.5, 0.6, "click:0.5"), Annotation(1.5, 1.6, "echo:0.5")]
        ann = [Annotation(0.5, 0.6, "click"), Annotation(1.5, 1.6, "echo")]
        rep = rate_correlation(det, ann, 2.0, "click")
        assert rep.detected_counts.tolist() == [1, 0]
        assert rep.correlation_pct == pytest.approx(100.0)

    @pytest.mark.parametrize("dur, bins", [(0.0, 1.0), (1.0, 0.0)])
    def test_bad_args(self, dur, bins):
        with pytest.raises(ConfigError):
            rate_correlation([], [], dur, bin_seconds=bins)


class TestTables:
    def test_empty(self):
        assert render_table([]) == "Metric\n"

    def test_point_row_order(self):
        text = render_table(match_point([(0, 1)], [(0, 1)]))
        names = [line.split("|")[0].strip() for line in text.splitlines()[2:]]
        assert names == ["Detection", "TP", "FP", "Precision", "All", "Found", "Missed",
                         "Recall"]

    @pytest.mark.parametrize("mode", ["overlap", "point"])
    def test_golden(self, mode):
        audio, truth = synth_scene(preset_scene("click_echo_pairs"))
        boxes = detect(audio)
        fn = match_overlap if mode == "overlap" else match_point
        rep = fn(boxes, truth, sample_rate=audio.sample_rate)
        expected = (GOLDEN / f"click_echo_pairs_{mode}.txt").read_text()
        assert render_table(rep) == expected

    def test_multi_column(self):
        reps = [MatchReport("overlap", 4, 2, 1, 2, 4, 2, 1, 2),
                MatchReport("overlap", 2, 2, 2, 0, 4, 2, 2, 2)]
        text = render_table(reps, ["15", "30"])
        assert [c.strip() for c in text.splitlines()[0].split("|")[1:]] == ["15", "30"]
        widths = {len(line) for line in text.splitlines()[2:]}
        assert len(widths) == 1
        assert "50.00" in text

    def test_rate_table(self):
        ivs = [(0.5, 0.6), (1.2, 1.3), (1.5, 1.6)]
        rep = rate_correlation(ivs, ivs, 2.0)
        text = render_rate_table([("30", [rep, rep, rep])])
        assert text.splitlines()[2].split("|")[0].strip() == "30"
        assert "100.00" in text
