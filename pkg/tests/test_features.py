import datetime as dt

import numpy as np
import pytest

from betaforge.features import (
    ALPHA_BETA_FEATURES,
    BASIC_FEATURES,
    ArtistProfile,
    EventSeries,
    EventSnapshot,
    SchemaError,
    aggregate_window,
    augment_zero_variance,
    build_alpha_beta,
    build_basic,
    load_digits,
    load_event_csv,
    load_profiles,
    matched_profile_pair,
    select_columns,
    synth_generate,
    write_event_csv,
)
from betaforge.scaled_beta import beta_mean, beta_median_approx

HEADER = "artist,event_id,snapshot_date,mean_price,median_price,low_price,high_price,listing_count\n"


def _snap(artist, event, day, mean, median, lo, hi, n=10):
    return EventSnapshot(artist, event, dt.date(2024, 1, day), mean, median, lo, hi, n)


def _series(artist, event, rows):
    return EventSeries(event, artist, tuple(_snap(artist, event, *r) for r in rows))


class TestIngest:
    def test_round_trip(self, tmp_path):
        corpus = synth_generate(
            [ArtistProfile("a", (2, 3), (4, 5)), ArtistProfile("b", (4, 5), (2, 3))], seed=1
        )
        path = tmp_path / "ev.csv"
        write_event_csv(corpus.series, path)
        res = load_event_csv(path)
        assert not res.rejected
        assert len(res.series) == 80
        got = {s.event_id: s for s in res.series}
        for s in corpus.series:
            assert got[s.event_id].snapshots == s.snapshots

    def test_rejects_bad_rows_with_line_numbers(self, tmp_path):
        path = tmp_path / "ev.csv"
        path.write_text(
            HEADER
            + "a,e1,2024-01-01,10,9,5,20,3\n"
            + "a,e1,2024-01-02,30,9,5,20,3\n"  # mean above high
            + "a,e1,2024-01-03,10,9,5,20,-1\n"  # negative listings
            + "a,e1,2024-01-01,11,9,5,20,3\n"  # duplicate date
        )
        res = load_event_csv(path)
        assert len(res.series) == 1 and len(res.series[0].snapshots) == 1
        assert [line for line, _ in res.rejected[:2]] == [3, 4]
        assert len(res.rejected) == 3

    def test_schema_errors(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("artist,event\n")
        with pytest.raises(SchemaError, match=r"csv:1:"):
            load_event_csv(path)
        path.write_text(HEADER + "a,e1,2024-01-01,10\n")
        with pytest.raises(SchemaError, match=r"csv:2:"):
            load_event_csv(path)


class TestWindow:
    def test_full_and_last_days(self):
        s = _series("a", "e", [(1, 10, 8, 4, 20), (2, 12, 10, 6, 22), (3, 14, 12, 8, 24)])
        full = aggregate_window(s)
        assert (full.mean_price, full.median_price, full.min_price, full.max_price) == (12, 10, 6, 22)
        last = aggregate_window(s, last_days=1)
        assert last.mean_price == 14
        assert aggregate_window(s, last_days=2).mean_price == 13

    def test_bad_window(self):
        s = _series("a", "e", [(1, 10, 8, 4, 20)])
        with pytest.raises(ValueError):
            aggregate_window(s, last_days=0)


def _events():
    return {
        "x": [
            _series("x", "x1", [(1, 30, 25, 10, 70)]),
            _series("x", "x2", [(1, 40, 38, 20, 80)]),
            _series("x", "x3", [(1, 50, 50, 50, 50)]),  # zero range
        ],
        "y": [
            _series("y", "y1", [(1, 60, 65, 20, 90)]),
            _series("y", "y2", [(1, 55, 55, 10, 100)]),  # symmetric: not estimable
        ],
    }


class TestDatasets:
    def test_basic_columns_and_drop(self):
        ds = build_basic(_events(), ("x", "y"))
        assert ds.feature_names == tuple(BASIC_FEATURES)
        np.testing.assert_array_equal(ds.X[0], [30, 25, 70, 10])
        np.testing.assert_array_equal(ds.y, [0, 0, 1, 1])
        assert ds.notes["dropped_zero_range"] == 1

    def test_alpha_beta_sentinel_keeps_rows(self):
        basic = build_basic(_events(), ("x", "y"))
        ab = build_alpha_beta(basic)
        assert ab.feature_names == tuple(ALPHA_BETA_FEATURES)
        assert ab.n_rows == basic.n_rows
        np.testing.assert_array_equal(ab.X[:, :4], basic.X)
        np.testing.assert_array_equal(ab.X[3, 4:], [0.0, 0.0])
        assert ab.flags == (False, False, False, True)
        assert ab.notes["imputed_shapes"] == 1

    def test_alpha_beta_drop(self):
        ab = build_alpha_beta(build_basic(_events(), ("x", "y")), policy="drop")
        assert ab.n_rows == 3

    def test_zero_variance_columns(self):
        ab = build_alpha_beta(build_basic(_events(), ("x", "y")))
        reg = augment_zero_variance(ab, 5, fill=3.0)
        assert reg.width == 11 and reg.n_informative == 6 and reg.n_zero_variance == 5
        assert reg.variant == "alpha_beta_reg"
        np.testing.assert_array_equal(reg.X[:, 6:], 3.0)
        assert np.all(reg.X[:, 6:].std(axis=0) == 0)

    def test_single_class_rejected(self):
        ev = _events()
        ev["z"] = []
        with pytest.raises(ValueError):
            build_basic(ev, ("x", "z"))


class TestDigits:
    def test_subset_is_seeded_and_sorted(self):
        assert select_columns(6, 42) == select_columns(6, 42)
        cols = select_columns(6, 42)
        assert list(cols) == sorted(cols) and len(set(cols)) == 6

    def test_pairs(self, digits_csv):
        src = load_digits(digits_csv)
        assert src.pixels.shape == (1797, 64)
        assert len(src.pairs()) == 45 and len(src.pairs(ordered=True)) == 90
        ds = src.pair_dataset(3, 8)
        assert ds.width == 6
        assert set(np.unique(ds.y)) == {0, 1}
        assert (ds.y == 1).sum() == (src.classes == 8).sum()

    def test_schema_error(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(",".join(["1"] * 65) + "\n" + ",".join(["1"] * 10) + "\n")
        with pytest.raises(SchemaError, match=r"csv:2:"):
            load_digits(path)


class TestSynthetic:
    def test_window_averages_reproduce_analytic_stats(self):
        prof = [ArtistProfile("a", (2, 3), (4, 6)), ArtistProfile("b", (5, 8), (2, 3))]
        corpus = synth_generate(prof, seed=3)
        for s in corpus.series:
            truth = corpus.truth[s.event_id]
            st = aggregate_window(s)
            assert st.mean_price == pytest.approx(beta_mean(truth), rel=1e-9)
            assert st.median_price == pytest.approx(beta_median_approx(truth), rel=1e-9)

    def test_estimator_recovers_truth(self):
        prof = [ArtistProfile("a", (2, 3), (4, 6)), ArtistProfile("b", (5, 8), (2, 3))]
        corpus = synth_generate(prof, seed=4)
        ds = build_alpha_beta(build_basic(corpus.by_artist(), ("a", "b")))
        truth = np.array([[corpus.truth[r].alpha, corpus.truth[r].beta] for r in ds.row_ids])
        np.testing.assert_allclose(ds.X[:, 4:], truth, rtol=1e-6)

    def test_seeded(self):
        prof = [ArtistProfile("a", (2, 3), (4, 6)), ArtistProfile("b", (5, 8), (2, 3))]
        a = synth_generate(prof, seed=9, noise=0.01)
        b = synth_generate(prof, seed=9, noise=0.01)
        assert [s.snapshots for s in a.series] == [s.snapshots for s in b.series]

    def test_matched_pair_priors(self):
        pa, pb = matched_profile_pair(0, seed=1)
        ra = pa.alpha_range[0] / (pa.alpha_range[0] + pa.beta_range[0])
        rb = pb.alpha_range[0] / (pb.alpha_range[0] + pb.beta_range[0])
        assert ra == pytest.approx(rb)
        assert pa.min_price_range == pb.min_price_range and pa.width_range == pb.width_range
        assert pb.alpha_range[0] > pa.alpha_range[0]

    def test_profiles_ini(self, tmp_path):
        path = tmp_path / "p.ini"
        path.write_text("[a]\nalpha = 2, 3\nbeta = 4, 5\nevents = 7\n\n[b]\nalpha = 3\nbeta = 1, 2\n")
        profs = load_profiles(path)
        assert [p.name for p in profs] == ["a", "b"]
        assert profs[0].events_per_artist == 7 and profs[1].alpha_range == (3.0, 3.0)
        path.write_text("[a]\nalpha = 2\nbeta = 4\ncolour = red\n")
        with pytest.raises(ValueError, match="unknown keys"):
            load_profiles(path)
