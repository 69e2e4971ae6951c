import json
import math

import jsonschema
import numpy as np
import pytest

from betaforge.experiments import (
    derive_seed,
    digits_pairs,
    run_pairs,
    run_pairwise,
    sign_test,
    split_train_test,
    sweep_m,
    synthetic_ticket_pairs,
    verdict_of,
)
from betaforge.features import load_digits
from betaforge.forest import ForestConfig
from betaforge.reports import CSV_FILES, build_report, dumps, emit_report, load_schema

SMALL = ForestConfig(n_estimators=10, max_features=2, seed=42)


@pytest.fixture(scope="module")
def few_digit_pairs(digits_csv):
    return digits_pairs(load_digits(digits_csv, 6, 42), n_zv=5)[:3]


class TestSignTest:
    def test_formula(self):
        r = sign_test(52, 14)
        assert r.n_effective == 66 and r.mu == 33 and r.sigma == pytest.approx(math.sqrt(16.5))
        assert r.z == pytest.approx((52 - 0.5 - 33) / math.sqrt(16.5))
        assert r.p_one_sided == pytest.approx(0.5 * math.erfc(r.z / math.sqrt(2)))

    def test_reference_counts(self):
        assert sign_test(52, 14).z == pytest.approx(4.56, abs=0.01)
        assert sign_test(1084, 675).z == pytest.approx(9.72, abs=0.01)

    def test_ties_excluded(self):
        assert sign_test(10, 5, 100).n_effective == 15

    def test_undefined(self):
        with pytest.raises(ValueError):
            sign_test(0, 0, 4)

    def test_verdict(self):
        assert [verdict_of(0.5, 0.6), verdict_of(0.6, 0.5), verdict_of(0.5, 0.5)] == ["better", "worse", "tie"]


class TestSplit:
    def test_stratified_and_seeded(self, few_digit_pairs):
        ds = few_digit_pairs[0].arm_a
        s = split_train_test(ds, 0.8, seed=3)
        assert np.intersect1d(s.train, s.test).size == 0
        assert s.train.size + s.test.size == ds.n_rows
        for c in (0, 1):
            n_c = (ds.y == c).sum()
            assert (ds.y[s.train] == c).sum() == round(0.8 * n_c)
        s2 = split_train_test(ds, 0.8, seed=3)
        np.testing.assert_array_equal(s.train, s2.train)

    def test_bad_ratio(self, few_digit_pairs):
        with pytest.raises(ValueError):
            split_train_test(few_digit_pairs[0].arm_a, 1.0)

    def test_derive_seed_stable(self):
        assert derive_seed(42, 0) == derive_seed(42, 0)
        assert derive_seed(42, 0) != derive_seed(42, 1)


class TestPairwise:
    def test_same_rows_both_arms(self, few_digit_pairs):
        spec = few_digit_pairs[0]
        out = run_pairwise(spec.arm_a, spec.arm_b, SMALL, split_seed=1)
        assert out.n_train + out.n_test == spec.arm_a.n_rows
        assert 0 <= out.accuracy_a <= 1 and 0 <= out.accuracy_b <= 1
        assert out.verdict == verdict_of(out.accuracy_a, out.accuracy_b)
        assert sum(out.diagnostics_b["aggregate_usage"][6:]) == 0

    def test_misaligned_arms(self, few_digit_pairs):
        with pytest.raises(ValueError):
            run_pairwise(few_digit_pairs[0].arm_a, few_digit_pairs[1].arm_b, SMALL, 1)

    def test_thread_independent(self, few_digit_pairs):
        a = run_pairs(few_digit_pairs, SMALL, 7, threads=1)
        b = run_pairs(few_digit_pairs, SMALL, 7, threads=3)
        assert [o.to_dict() for o in a] == [o.to_dict() for o in b]


class TestSweep:
    def test_records_and_skips(self, few_digit_pairs):
        res = sweep_m(few_digit_pairs, [1, 3, 7], SMALL, 5)
        assert res.m_values == [1, 3] and res.skipped == [7]
        assert len(res.records) == 4
        assert set(res.accuracy("a")) == {1, 3}
        m, acc = res.best("b")
        assert acc == max(res.accuracy("b").values())

    def test_synthetic_pairs(self):
        pairs = synthetic_ticket_pairs(2, seed=1, events_per_artist=15)
        assert pairs[0].arm_a.variant == "basic" and pairs[0].arm_b.variant == "alpha_beta"
        reg = synthetic_ticket_pairs(1, seed=1, events_per_artist=15, n_zv=4)
        assert reg[0].arm_b.width == 10


class TestReports:
    def test_schema_and_csv(self, few_digit_pairs, tmp_path):
        res = sweep_m(few_digit_pairs, [1, 2], SMALL, 5)
        doc = build_report({"k": 1}, {"experiment": 5}, sweep=res)
        jsonschema.validate(doc, load_schema())
        assert doc["sign_test"]["m"] in (1, 2)
        assert len(doc["outcomes"]) == 6 and len(doc["diagnostics"]) == 12
        emit_report(doc, "json", tmp_path / "r.json")
        assert json.loads((tmp_path / "r.json").read_text()) == doc
        emit_report(doc, "csv", tmp_path / "csv")
        for name in CSV_FILES:
            assert (tmp_path / "csv" / name).exists()
        bars = (tmp_path / "csv" / "outcome_bars.csv").read_text().splitlines()
        assert bars[0] == "m,verdict,count" and len(bars) == 7

    def test_deterministic_bytes(self, few_digit_pairs):
        outs = run_pairs(few_digit_pairs, SMALL, 9)
        again = run_pairs(few_digit_pairs, SMALL, 9)
        assert dumps(build_report({}, {}, outs)) == dumps(build_report({}, {}, again))

    def test_nan_becomes_null(self):
        assert json.loads(dumps({"x": float("nan")})) == {"x": None}

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(build_report({}, {}), "json", tmp_path / "x.json")
